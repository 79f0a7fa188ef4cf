//! Deterministic sweeps over the covariance inequalities behind the limit
//! theorems.
//!
//! Margins are relative slack `(bound - lhs) / bound` unless stated otherwise;
//! a negative margin is a violation.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::domain;
use crate::rng;
use crate::Result;

/// Trials per independent random stream in the random sweeps.
const CHUNK: u64 = 10_000;
const LOG_SPACING: (f64, f64) = (1e-3, 1e3);
const HURST_RANGE: (f64, f64) = (0.01, 0.49);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check_name: String,
    pub trials: u64,
    pub violations: u64,
    pub worst_margin: f64,
    pub parameters: Value,
    /// Extra statistics, e.g. extreme ratios.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, f64>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

#[derive(Debug, Clone, Copy)]
struct Tally {
    trials: u64,
    violations: u64,
    worst: f64,
    min_ratio: f64,
    max_ratio: f64,
}

impl Tally {
    fn new() -> Self {
        Self { trials: 0, violations: 0, worst: f64::INFINITY, min_ratio: f64::INFINITY, max_ratio: f64::NEG_INFINITY }
    }

    fn record(&mut self, margin: f64) {
        self.trials += 1;
        if margin.is_nan() || margin < 0.0 {
            self.violations += 1;
        }
        self.worst = self.worst.min(margin);
    }

    fn merge(mut self, other: Self) -> Self {
        self.trials += other.trials;
        self.violations += other.violations;
        self.worst = self.worst.min(other.worst);
        self.min_ratio = self.min_ratio.min(other.min_ratio);
        self.max_ratio = self.max_ratio.max(other.max_ratio);
        self
    }
}

fn report(name: &str, tally: Tally, parameters: Value) -> CheckReport {
    CheckReport {
        check_name: name.to_string(),
        trials: tally.trials,
        violations: tally.violations,
        worst_margin: tally.worst,
        parameters,
        extra: BTreeMap::new(),
    }
}

/// Runs `trials` random trials in fixed-size chunks, one stream per chunk,
/// and merges the chunk tallies in chunk order.
fn sweep<F>(trials: u64, seed: u64, trial: F) -> Tally
where
    F: Fn(&mut ChaCha8Rng, &mut Tally) + Sync,
{
    let chunks = trials.div_ceil(CHUNK);
    let tallies: Vec<Tally> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng::stream(seed, c, 0);
            let mut tally = Tally::new();
            for _ in 0..CHUNK.min(trials - c * CHUNK) {
                trial(&mut rng, &mut tally);
            }
            tally
        })
        .collect();
    tallies.into_iter().fold(Tally::new(), Tally::merge)
}

fn log_uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

fn relative_margin(bound: f64, lhs: f64) -> f64 {
    if bound == 0.0 {
        if lhs <= 0.0 { 0.0 } else { f64::NEG_INFINITY }
    } else {
        (bound - lhs) / bound
    }
}

/// `(1+u)^{2H} + (1+v)^{2H} - (1+u+v)^{2H} - 1`, evaluated without
/// cancellation against the larger argument.
pub fn taylor_bracket(u: f64, v: f64, hurst: f64) -> f64 {
    let two_h = 2.0 * hurst;
    let (small, large) = if u <= v { (u, v) } else { (v, u) };
    let grow = |x: f64| (two_h * x.ln_1p()).exp_m1();
    // (1+l+s)^{2H} - (1+l)^{2H} = (1+l)^{2H} [(1 + s/(1+l))^{2H} - 1]
    let shifted = (two_h * large.ln_1p()).exp() * grow(small / (1.0 + large));
    grow(small) - shifted
}

/// `(Δ4+Δ3)^{2H} + (Δ3+Δ2)^{2H} - (Δ4+Δ3+Δ2)^{2H} - Δ3^{2H}` for
/// `t1 < t2 < t3 < t4`, with `Δk = t_k - t_{k-1}`.
///
/// The increment covariance `E[(B(t4)-B(t3))(B(t2)-B(t1))]` is minus one
/// half of this quantity.
pub fn cov_expansion(t: [f64; 4], hurst: f64) -> f64 {
    let (d2, d3, d4) = (t[1] - t[0], t[2] - t[1], t[3] - t[2]);
    cov_expansion_spacings(d2, d3, d4, hurst)
}

fn cov_expansion_spacings(d2: f64, d3: f64, d4: f64, hurst: f64) -> f64 {
    d3.powf(2.0 * hurst) * taylor_bracket(d4 / d3, d2 / d3, hurst)
}

/// `2H (Δ2/Δ3)^{½-H} (Δ4/Δ3)^{½-H} Δ2^H Δ4^H`
pub fn cov_bound_i(d2: f64, d3: f64, d4: f64, hurst: f64) -> f64 {
    let e = 0.5 - hurst;
    2.0 * hurst * (d2 / d3).powf(e) * (d4 / d3).powf(e) * d2.powf(hurst) * d4.powf(hurst)
}

/// `2 ((Δ2 ∧ Δ4)/(Δ2 ∨ Δ4))^H Δ2^H Δ4^H`
pub fn cov_bound_ii(d2: f64, d4: f64, hurst: f64) -> f64 {
    2.0 * (d2.min(d4) / d2.max(d4)).powf(hurst) * d2.powf(hurst) * d4.powf(hurst)
}

/// Random sweep of both increment-covariance bounds for `H < ½`.
pub fn check_cov_bounds(trials: u64, seed: u64) -> Result<CheckReport> {
    if trials == 0 {
        return Err(domain("trials must be positive"));
    }
    let tally = sweep(trials, seed, |rng, tally| {
        let d2 = log_uniform(rng, LOG_SPACING);
        let d3 = log_uniform(rng, LOG_SPACING);
        let d4 = log_uniform(rng, LOG_SPACING);
        let h = HURST_RANGE.0 + rng.random::<f64>() * (HURST_RANGE.1 - HURST_RANGE.0);
        let lhs = cov_expansion_spacings(d2, d3, d4, h).abs();
        let margin_i = relative_margin(cov_bound_i(d2, d3, d4, h), lhs);
        let margin_ii = relative_margin(cov_bound_ii(d2, d4, h), lhs);
        tally.record(margin_i.min(margin_ii));
    });
    Ok(report(
        "cov",
        tally,
        json!({ "trials": trials, "seed": seed, "spacing_range": LOG_SPACING, "hurst_range": HURST_RANGE }),
    ))
}

/// Grid sweep of `0 <= bracket <= 2H min(u, v)` over `u, v ∈ (0, 10]` and
/// `H ∈ (0.01, 0.49)`.
pub fn check_taylor_bound(grid_size: usize, hurst_points: usize) -> Result<CheckReport> {
    if grid_size == 0 || hurst_points == 0 {
        return Err(domain("grid sizes must be positive"));
    }
    let grid: Vec<f64> = (1..=grid_size).map(|i| 10.0 * i as f64 / grid_size as f64).collect();
    let hursts: Vec<f64> = (1..=hurst_points)
        .map(|k| HURST_RANGE.0 + (HURST_RANGE.1 - HURST_RANGE.0) * k as f64 / (hurst_points + 1) as f64)
        .collect();
    let tallies: Vec<Tally> = hursts
        .par_iter()
        .map(|&h| {
            let mut tally = Tally::new();
            for &u in &grid {
                for &v in &grid {
                    let b = taylor_bracket(u, v, h);
                    let nonneg = if b >= 0.0 { 0.0 } else { f64::NEG_INFINITY };
                    let upper = relative_margin(2.0 * h * u, b).min(relative_margin(2.0 * h * v, b));
                    tally.record(upper.min(nonneg));
                }
            }
            tally
        })
        .collect();
    let tally = tallies.into_iter().fold(Tally::new(), Tally::merge);
    Ok(report("taylor", tally, json!({ "grid_size": grid_size, "hurst_points": hurst_points, "range": [0.0, 10.0] })))
}

/// `Cov(B(b1) - B(a1), B(b2) - B(a2))` for one coordinate.
pub fn increment_covariance(a1: f64, b1: f64, a2: f64, b2: f64, hurst: f64) -> f64 {
    let p = |x: f64| x.abs().powf(2.0 * hurst);
    0.5 * (p(b1 - a2) + p(a1 - b2) - p(b1 - b2) - p(a1 - a2))
}

/// `Var(Σ x_i · (B(s_i) - B(s_{i-1}))) / Σ |x_i|² (s_i - s_{i-1})^{2H}` with
/// `s` the partial sums of `spacings` from 0.
pub fn lnd_ratio(spacings: &[f64], vectors: &[Vec<f64>], hurst: f64) -> f64 {
    let mut s = vec![0.0];
    for d in spacings {
        s.push(s.last().unwrap() + d);
    }
    let n = spacings.len();
    let dot = |i: usize, j: usize| -> f64 { vectors[i].iter().zip(&vectors[j]).map(|(a, b)| a * b).sum() };
    let mut var = 0.0;
    for i in 0..n {
        for j in 0..n {
            var += dot(i, j) * increment_covariance(s[i], s[i + 1], s[j], s[j + 1], hurst);
        }
    }
    let norm: f64 = (0..n).map(|i| dot(i, i) * spacings[i].powf(2.0 * hurst)).sum();
    var / norm
}

/// Two-sided local nondeterminism sweep. The upper constant is `n_points`
/// (Cauchy–Schwarz); the lower constant has no closed form, so the minimum
/// ratio is reported and only its positivity is checked.
pub fn check_lnd(n_points: usize, hurst: f64, dim: usize, trials: u64, seed: u64) -> Result<CheckReport> {
    if !(1..=4).contains(&n_points) {
        return Err(domain(format!("n_points must be in 1..=4, got {n_points}")));
    }
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(domain(format!("hurst must lie in (0, 1), got {hurst}")));
    }
    if dim == 0 || trials == 0 {
        return Err(domain("dim and trials must be positive"));
    }
    let kappa2 = n_points as f64;
    let tally = sweep(trials, seed, |rng, tally| {
        let spacings: Vec<f64> = (0..n_points).map(|_| log_uniform(rng, LOG_SPACING)).collect();
        let vectors: Vec<Vec<f64>> =
            (0..n_points).map(|_| (0..dim).map(|_| rng.sample(StandardNormal)).collect()).collect();
        let ratio = lnd_ratio(&spacings, &vectors, hurst);
        tally.min_ratio = tally.min_ratio.min(ratio);
        tally.max_ratio = tally.max_ratio.max(ratio);
        let lower = if ratio > 0.0 { 0.0 } else { f64::NEG_INFINITY };
        tally.record(relative_margin(kappa2, ratio).min(lower));
    });
    let mut rep = report(
        "lnd",
        tally,
        json!({ "n_points": n_points, "hurst": hurst, "dim": dim, "trials": trials, "seed": seed, "kappa2": kappa2 }),
    );
    rep.extra.insert("min_ratio".into(), tally.min_ratio);
    rep.extra.insert("max_ratio".into(), tally.max_ratio);
    Ok(rep)
}

/// Log of `LHS / RHS` for
/// `∫ e^{-½|x1|² u^{2H} - v x1·x2} dx1 >= (2π)^{d/2} u^{-1}` with `H = 1/d`:
/// `v² |x2|² / (2 u^{2H}) + (1 - Hd) ln u`.
pub fn lower_log_margin(u: f64, v: f64, x2_norm: f64, dim: usize) -> f64 {
    let h = 1.0 / dim as f64;
    let hd = h * dim as f64;
    v * v * x2_norm * x2_norm / (2.0 * u.powf(2.0 * h)) + (1.0 - hd) * u.ln()
}

/// Grid sweep of the Gaussian lower inequality. Margins are absolute log
/// margins.
pub fn check_lower_inequality(grid_size: usize, dims: &[usize]) -> Result<CheckReport> {
    if grid_size < 2 {
        return Err(domain("grid_size must be at least 2"));
    }
    if dims.is_empty() || dims.contains(&0) {
        return Err(domain("dims must be a nonempty list of positive dimensions"));
    }
    let lin = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * i as f64 / (grid_size - 1) as f64;
    let mut tally = Tally::new();
    for &d in dims {
        for i in 0..grid_size {
            let u = (lin(0.1f64.ln(), 100f64.ln(), i)).exp();
            for j in 0..grid_size {
                let v = lin(-10.0, 10.0, j);
                for k in 0..grid_size {
                    tally.record(lower_log_margin(u, v, lin(0.0, 10.0, k), d));
                }
            }
        }
    }
    Ok(report(
        "lower",
        tally,
        json!({ "grid_size": grid_size, "dims": dims, "u_range": [0.1, 100.0], "v_range": [-10.0, 10.0], "x2_range": [0.0, 10.0] }),
    ))
}
