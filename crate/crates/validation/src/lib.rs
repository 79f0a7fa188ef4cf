//! Shared reporting for the acceptance suite.

use std::fmt::Write as _;

/// One named sub-check of a criterion.
#[derive(Debug, Clone)]
pub struct Part {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Collects the sub-checks of one criterion and renders a single line.
#[derive(Debug, Default)]
pub struct Criterion {
    pub number: u32,
    pub parts: Vec<Part>,
}

impl Criterion {
    pub fn new(number: u32) -> Self {
        Self { number, parts: Vec::new() }
    }

    pub fn check(&mut self, name: impl Into<String>, pass: bool, detail: impl Into<String>) -> &mut Self {
        self.parts.push(Part { name: name.into(), pass, detail: detail.into() });
        self
    }

    pub fn passed(&self) -> bool {
        !self.parts.is_empty() && self.parts.iter().all(|p| p.pass)
    }

    pub fn line(&self) -> String {
        let mut s = format!("criterion {}: {}", self.number, if self.passed() { "PASS" } else { "FAIL" });
        for p in &self.parts {
            let tag = if p.pass { "ok" } else { "FAILED" };
            let _ = write!(s, " | {} {} [{}]", p.name, tag, p.detail);
        }
        s
    }
}
