//! Result tables, the JSON summary and the run manifest.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::CliError;

pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CSV_HEADER: &str = "experiment,d,H,n,t,order,estimate,se,target,ratio";

/// One row of `results.csv`. Missing values are written as empty fields.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub experiment: String,
    pub d: usize,
    #[serde(rename = "H")]
    pub hurst: f64,
    pub n: Option<f64>,
    pub t: Option<f64>,
    pub order: String,
    pub estimate: f64,
    pub se: Option<f64>,
    pub target: Option<f64>,
    pub ratio: Option<f64>,
}

impl ResultRow {
    pub fn new(experiment: &str, d: usize, hurst: f64, order: impl Into<String>, estimate: f64) -> Self {
        Self {
            experiment: experiment.to_string(),
            d,
            hurst,
            n: None,
            t: None,
            order: order.into(),
            estimate,
            se: None,
            target: None,
            ratio: None,
        }
    }

    pub fn at(mut self, n: Option<f64>, t: Option<f64>) -> Self {
        self.n = n;
        self.t = t;
        self
    }

    pub fn se(mut self, se: f64) -> Self {
        self.se = Some(se);
        self
    }

    /// Sets the target and, when it is nonzero, `estimate / target`.
    pub fn target(mut self, target: f64) -> Self {
        self.target = Some(target);
        self.ratio = (target != 0.0).then(|| self.estimate / target);
        self
    }
}

/// Shortest round-trip representation, in scientific notation outside
/// `[1e-4, 1e15)`.
pub fn format_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-4..1e15).contains(&a) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

fn field(v: Option<f64>) -> String {
    v.map(format_f64).unwrap_or_default()
}

pub fn render_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.experiment,
            r.d,
            format_f64(r.hurst),
            field(r.n),
            field(r.t),
            r.order,
            format_f64(r.estimate),
            field(r.se),
            field(r.target),
            field(r.ratio)
        );
    }
    out
}

/// One acceptance band: a named check with the observed value and verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Band {
    pub name: String,
    pub value: f64,
    pub requirement: String,
    pub pass: bool,
}

impl Band {
    pub fn new(name: impl Into<String>, value: f64, requirement: impl Into<String>, pass: bool) -> Self {
        Self { name: name.into(), value, requirement: requirement.into(), pass }
    }

    /// `lo <= value <= hi`
    pub fn range(name: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        Self::new(name, value, format!("in [{lo}, {hi}]"), (lo..=hi).contains(&value))
    }

    /// `|estimate - target| <= k se`, reported as the z-score.
    pub fn within_se(name: impl Into<String>, estimate: f64, se: f64, target: f64, k: f64) -> Self {
        let z = (estimate - target) / se;
        Self::new(name, z, format!("|z| <= {k}"), z.abs() <= k)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub experiment: String,
    pub passed: bool,
    pub bands: Vec<Band>,
    pub details: Value,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    artifact: &'static str,
    version: &'static str,
    started_at: String,
    finished_at: String,
    config: &'a ExperimentConfig,
    outputs: Vec<OutputDigest>,
}

#[derive(Debug, Serialize)]
struct OutputDigest {
    file: String,
    sha256: String,
    bytes: usize,
}

/// Writes `bytes` to `dir/name` through a temporary file and a rename.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), CliError> {
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(dir.join(name)).map_err(|e| CliError::Io(e.error))?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Writes every output file, then the manifest with their digests.
pub fn persist(
    config: &ExperimentConfig,
    files: &[(String, Vec<u8>)],
    started_at: chrono::DateTime<chrono::Utc>,
) -> Result<(), CliError> {
    let dir = &config.output_dir;
    std::fs::create_dir_all(dir)?;
    for (name, bytes) in files {
        write_atomic(dir, name, bytes)?;
    }
    let manifest = Manifest {
        artifact: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        started_at: started_at.to_rfc3339(),
        finished_at: chrono::Utc::now().to_rfc3339(),
        config,
        outputs: files
            .iter()
            .map(|(name, bytes)| OutputDigest { file: name.clone(), sha256: sha256_hex(bytes), bytes: bytes.len() })
            .collect(),
    };
    let mut json = serde_json::to_vec_pretty(&manifest)?;
    json.push(b'\n');
    write_atomic(dir, MANIFEST_FILE, &json)
}
