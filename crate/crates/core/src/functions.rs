//! Radial test functions with closed-form Fourier transforms.
//!
//! Fourier convention: `f̂(ξ) = ∫ f(x) e^{-i(ξ,x)} dx`. Every quantity the crate
//! derives from `f̂` depends only on `|f̂|`, so the sign convention does not
//! change any reported number.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::domain;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionKind {
    /// `e^{-|x|²/2} - σ^{-d} e^{-|x|²/(2σ²)}`, mean zero.
    GaussianDifference { sigma: f64 },
    /// `e^{-|x|²/2}`, positive mass `(2π)^{d/2}`.
    PlainGaussian,
    /// The constant 1. Only meaningful for sanity checks of the occupation
    /// integral; it is neither integrable nor mean-zero.
    Constant,
}

/// `amplitude * kind(x)` on `R^dim`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub dim: usize,
    pub kind: FunctionKind,
    pub amplitude: f64,
    /// Exponent with `∫ |f(x)| |x|^β dx < ∞`.
    pub beta: f64,
}

impl TestFunction {
    pub fn gaussian_difference(dim: usize, sigma: f64) -> Result<Self> {
        check_dim(dim)?;
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(domain(format!("sigma must be positive and finite, got {sigma}")));
        }
        if sigma == 1.0 {
            return Err(domain("sigma = 1 makes the Gaussian difference vanish identically; use TestFunction::zero"));
        }
        Ok(Self { dim, kind: FunctionKind::GaussianDifference { sigma }, amplitude: 1.0, beta: 1.0 })
    }

    pub fn plain_gaussian(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self { dim, kind: FunctionKind::PlainGaussian, amplitude: 1.0, beta: 1.0 })
    }

    pub fn constant(dim: usize, value: f64) -> Result<Self> {
        check_dim(dim)?;
        if !value.is_finite() {
            return Err(domain("constant must be finite"));
        }
        Ok(Self { dim, kind: FunctionKind::Constant, amplitude: value, beta: 1.0 })
    }

    /// The zero function.
    pub fn zero(dim: usize) -> Result<Self> {
        Self::constant(dim, 0.0)
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        self.amplitude *= factor;
        self
    }

    pub fn is_zero(&self) -> bool {
        self.amplitude == 0.0
    }

    /// Parse `gaussdiff:sigma=2`, `gauss`, `zero` or `const:value=1.5`, each
    /// optionally followed by `,scale=<factor>`.
    pub fn parse(text: &str, dim: usize) -> Result<Self> {
        let (name, params) = match text.split_once(':') {
            Some((n, p)) => (n.trim(), p),
            None => (text.trim(), ""),
        };
        let mut sigma = None;
        let mut value = None;
        let mut scale = 1.0;
        for pair in params.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, raw) = pair
                .split_once('=')
                .ok_or_else(|| domain(format!("expected key=value in function spec, got `{pair}`")))?;
            let v: f64 = raw
                .trim()
                .parse()
                .map_err(|_| domain(format!("`{raw}` is not a number in function spec")))?;
            match key.trim() {
                "sigma" => sigma = Some(v),
                "value" | "c" => value = Some(v),
                "scale" => scale = v,
                other => return Err(domain(format!("unknown function parameter `{other}`"))),
            }
        }
        let f = match name {
            "gaussdiff" | "gaussian_difference" => {
                Self::gaussian_difference(dim, sigma.ok_or_else(|| domain("gaussdiff needs sigma=<value>"))?)?
            }
            "gauss" | "plain_gaussian" => Self::plain_gaussian(dim)?,
            "zero" => Self::zero(dim)?,
            "const" | "constant" => {
                Self::constant(dim, value.ok_or_else(|| domain("const needs value=<number>"))?)?
            }
            other => return Err(domain(format!("unknown function family `{other}`"))),
        };
        Ok(f.scaled(scale))
    }

    /// Value as a function of `|x|²`.
    #[inline]
    pub fn eval_radius_sq(&self, r2: f64) -> f64 {
        let profile = match self.kind {
            FunctionKind::GaussianDifference { sigma } => {
                (-0.5 * r2).exp() - sigma.powi(-(self.dim as i32)) * (-0.5 * r2 / (sigma * sigma)).exp()
            }
            FunctionKind::PlainGaussian => (-0.5 * r2).exp(),
            FunctionKind::Constant => 1.0,
        };
        self.amplitude * profile
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        self.eval_radius_sq(x.iter().map(|v| v * v).sum())
    }

    /// Fourier transform as a function of `|ξ|`.
    ///
    /// The constant function has a Dirac transform; it is reported as `+∞`
    /// at the origin (for a nonzero constant) and 0 elsewhere.
    pub fn fourier_radial(&self, r: f64) -> f64 {
        let norm = (2.0 * PI).powf(self.dim as f64 / 2.0);
        let r2 = r * r;
        let profile = match self.kind {
            FunctionKind::GaussianDifference { sigma } => {
                norm * ((-0.5 * r2).exp() - (-0.5 * sigma * sigma * r2).exp())
            }
            FunctionKind::PlainGaussian => norm * (-0.5 * r2).exp(),
            FunctionKind::Constant => {
                return if r == 0.0 && self.amplitude != 0.0 { f64::INFINITY } else { 0.0 };
            }
        };
        self.amplitude * profile
    }

    pub fn fourier(&self, xi: &[f64]) -> f64 {
        debug_assert_eq!(xi.len(), self.dim);
        self.fourier_radial(xi.iter().map(|v| v * v).sum::<f64>().sqrt())
    }

    /// `∫ f`, infinite for a nonzero constant.
    pub fn mass(&self) -> f64 {
        match self.kind {
            FunctionKind::GaussianDifference { .. } => 0.0,
            FunctionKind::PlainGaussian => self.amplitude * (2.0 * PI).powf(self.dim as f64 / 2.0),
            FunctionKind::Constant if self.amplitude == 0.0 => 0.0,
            FunctionKind::Constant => f64::INFINITY.copysign(self.amplitude),
        }
    }

    /// An upper bound on `sup |f|`.
    pub fn sup_bound(&self) -> f64 {
        let profile = match self.kind {
            FunctionKind::GaussianDifference { sigma } => 1.0 + sigma.powi(-(self.dim as i32)),
            FunctionKind::PlainGaussian | FunctionKind::Constant => 1.0,
        };
        self.amplitude.abs() * profile
    }

    /// Radius beyond which `|f(x)| <= eps`. Infinite for a nonzero constant.
    pub fn effective_radius(&self, eps: f64) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let amp = self.amplitude.abs();
        match self.kind {
            FunctionKind::GaussianDifference { sigma } => {
                let peak = amp * (1.0 + sigma.powi(-(self.dim as i32)));
                let width = sigma.max(1.0);
                width * (2.0 * (peak / eps).ln().max(0.0)).sqrt()
            }
            FunctionKind::PlainGaussian => (2.0 * (amp / eps).ln().max(0.0)).sqrt(),
            FunctionKind::Constant => f64::INFINITY,
        }
    }

    /// `(c, p)` with `|f̂(r)| <= c r^p` for every `r`, when such a power bound
    /// exists with `p > 0` (i.e. `f̂(0) = 0`).
    pub fn fourier_origin_bound(&self) -> Option<(f64, f64)> {
        let norm = (2.0 * PI).powf(self.dim as f64 / 2.0);
        match self.kind {
            _ if self.is_zero() => Some((0.0, 2.0)),
            // |e^{-a} - e^{-b}| <= |a - b|
            FunctionKind::GaussianDifference { sigma } => {
                Some((self.amplitude.abs() * norm * (sigma * sigma - 1.0).abs() / 2.0, 2.0))
            }
            FunctionKind::PlainGaussian | FunctionKind::Constant => None,
        }
    }

    /// `(A, κ)` with `|f̂(r)| <= A e^{-κ r²}` for every `r`.
    pub fn fourier_tail_envelope(&self) -> Option<(f64, f64)> {
        let norm = (2.0 * PI).powf(self.dim as f64 / 2.0);
        let amp = self.amplitude.abs() * norm;
        match self.kind {
            _ if self.is_zero() => Some((0.0, 1.0)),
            FunctionKind::GaussianDifference { sigma } => Some((amp, 0.5 * sigma.min(1.0).powi(2))),
            FunctionKind::PlainGaussian => Some((amp, 0.5)),
            FunctionKind::Constant => None,
        }
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            FunctionKind::GaussianDifference { sigma } => write!(f, "gaussdiff:sigma={sigma}")?,
            FunctionKind::PlainGaussian => write!(f, "gauss")?,
            FunctionKind::Constant if self.amplitude == 0.0 => return write!(f, "zero"),
            FunctionKind::Constant => return write!(f, "const:value={}", self.amplitude),
        }
        if self.amplitude != 1.0 {
            write!(f, ",scale={}", self.amplitude)?;
        }
        Ok(())
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(domain("dimension must be positive"));
    }
    Ok(())
}
