//! Monte Carlo experiments for the second-order law, the first-order law,
//! finite-dimensional increment structure and the mixing time change `Z`.
//!
//! Replicas are independent streams of one seed and are always reduced in
//! replica order, so every summary is a function of `(seed, replicas)` only.

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::c_fd;
use crate::error::domain;
use crate::functions::{FunctionKind, TestFunction};
use crate::occupation::{Normalization, OccupationConfig, OccupationSimulator};
use crate::rng;
use crate::stats::{self, jackknife, Estimate, PowerSums};
use crate::{Error, Result};

/// Highest moment order reported.
pub const MAX_ORDER: usize = 6;
pub const MIN_REPLICAS: usize = 100;
pub const MIN_WALK_STEPS: u64 = 10_000;
/// The walk gives up after this many multiples of `walk_steps`.
pub const WALK_BUDGET_FACTOR: u64 = 100;

/// `c^{2m} (2m)! t^m / 2^m` for `order = 2m`, and 0 for odd orders.
pub fn target_moment(order: u32, t: f64, c: f64) -> f64 {
    if order % 2 == 1 {
        return 0.0;
    }
    let m = order / 2;
    let factorial: f64 = (1..=order).map(f64::from).product();
    c.powi(order as i32) * factorial * t.powi(m as i32) / 2f64.powi(m as i32)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitTarget {
    pub c_fd: f64,
    pub t: f64,
    /// `c_fd √(t/2)`
    pub laplace_scale: f64,
}

impl LimitTarget {
    pub fn new(c_fd: f64, t: f64) -> Self {
        Self { c_fd, t, laplace_scale: c_fd * (t / 2.0).sqrt() }
    }

    pub fn variance(&self) -> f64 {
        self.c_fd * self.c_fd * self.t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub order: u32,
    pub estimate: f64,
    pub se: f64,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub replicas: usize,
    /// Raw moments of orders `1..=6`.
    pub moments: Vec<MomentRow>,
    pub variance: Estimate,
    pub excess_kurtosis: Estimate,
    pub ks_distance: Estimate,
}

impl MomentSummary {
    pub fn from_values<T, C>(values: &[f64], target: T, cdf: C) -> Self
    where
        T: Fn(u32) -> f64,
        C: Fn(f64) -> f64,
    {
        let moments = (1..=MAX_ORDER as u32)
            .map(|k| {
                let e = jackknife(values, |s| s.raw(k as usize));
                MomentRow { order: k, estimate: e.estimate, se: e.se, target: target(k) }
            })
            .collect();
        let variance = jackknife(values, |s| s.central(2));
        let excess_kurtosis = if PowerSums::from_values(values).central(2) > 0.0 {
            jackknife(values, PowerSums::excess_kurtosis)
        } else {
            Estimate { estimate: f64::NAN, se: f64::NAN }
        };
        Self {
            replicas: values.len(),
            moments,
            variance,
            excess_kurtosis,
            ks_distance: stats::ks_distance(values, cdf),
        }
    }

    pub fn moment(&self, order: u32) -> &MomentRow {
        &self.moments[order as usize - 1]
    }
}

/// `true` when each distance exceeds its predecessor by at most `k` combined
/// standard errors.
pub fn non_increasing_within(distances: &[Estimate], k: f64) -> bool {
    distances
        .windows(2)
        .all(|w| w[1].estimate <= w[0].estimate + k * (w[0].se.powi(2) + w[1].se.powi(2)).sqrt())
}

/// KS distance to the point mass at 0: the fraction of nonzero values.
fn point_mass_ks(values: &[f64]) -> Estimate {
    let n = values.len() as f64;
    let p = values.iter().filter(|&&v| v != 0.0).count() as f64 / n;
    Estimate { estimate: p, se: (p * (1.0 - p) / n).sqrt().max(0.2603 / n.sqrt()) }
}

fn check_replicas(replicas: usize) -> Result<()> {
    if replicas < MIN_REPLICAS {
        return Err(domain(format!("at least {MIN_REPLICAS} replicas are required, got {replicas}")));
    }
    Ok(())
}

/// Joint samples at `times`, one row per replica, in replica order.
pub fn sample_paths(config: &OccupationConfig, times: &[f64], replicas: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let sim = OccupationSimulator::with_times(*config, times)?;
    (0..replicas as u64)
        .into_par_iter()
        .map(|r| Ok(sim.realize_multi(seed, r)?.iter().map(|s| s.value).collect()))
        .collect()
}

fn sample_values(config: &OccupationConfig, replicas: usize, seed: u64) -> Result<Vec<f64>> {
    Ok(sample_paths(config, &[config.t], replicas, seed)?.into_iter().map(|row| row[0]).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderReport {
    pub n: f64,
    pub target: LimitTarget,
    /// Moments of `F_n / C_{f,d}` (of `F_n` itself when `C = 0`).
    pub summary: MomentSummary,
}

impl SecondOrderReport {
    /// Estimated `Var / (C² t)` on the standardized scale.
    pub fn variance_ratio(&self) -> f64 {
        self.summary.variance.estimate / self.target.t
    }
}

/// Second-order law: standardizes by `C_{f,d}` and compares with the Laplace
/// law of scale `√(t/2)`, whose raw moments are `target_moment(k, t, 1)`.
pub fn run_second_order(config: &OccupationConfig, replicas: usize, seed: u64) -> Result<SecondOrderReport> {
    check_replicas(replicas)?;
    let config = config.with_normalization(Normalization::SecondOrder);
    let c = c_fd(&config.function)?.c_fd;
    let t = config.t;
    let mut values = sample_values(&config, replicas, seed)?;
    let (scale, target_c) = if c > 0.0 { (c, 1.0) } else { (1.0, 0.0) };
    for v in &mut values {
        *v /= scale;
    }
    let b = (t / 2.0).sqrt();
    let summary = MomentSummary::from_values(&values, |k| target_moment(k, t, target_c), |x| stats::laplace_cdf(x, b));
    Ok(SecondOrderReport { n: config.n, target: LimitTarget::new(c, t), summary })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstOrderReport {
    pub n: f64,
    pub t: f64,
    /// `t (2π)^{-d/2} ∫ f`
    pub target_mean: f64,
    pub mean: Estimate,
    pub summary: MomentSummary,
}

/// First-order law of `n^{-1} ∫_0^{e^{nt}} f(B^H(s)) ds` against the
/// exponential law with mean `t (2π)^{-d/2} ∫ f`.
pub fn run_first_order(config: &OccupationConfig, replicas: usize, seed: u64) -> Result<FirstOrderReport> {
    check_replicas(replicas)?;
    let f = &config.function;
    let admissible = f.is_zero() || (matches!(f.kind, FunctionKind::PlainGaussian) && f.amplitude > 0.0);
    if !admissible {
        return Err(domain("the first-order law needs a nonnegative integrable f with positive mass"));
    }
    let config = config.with_normalization(Normalization::FirstOrder);
    let t = config.t;
    let target_mean = t * f.mass() / (2.0 * std::f64::consts::PI).powf(f.dim as f64 / 2.0);
    let values = sample_values(&config, replicas, seed)?;
    // exponential raw moments k! μ^k
    let target = |k: u32| (1..=k).map(f64::from).product::<f64>() * target_mean.powi(k as i32);
    let mut summary = MomentSummary::from_values(&values, target, |x| stats::exponential_cdf(x, target_mean));
    if target_mean == 0.0 {
        summary.ks_distance = point_mass_ks(&values);
    }
    Ok(FirstOrderReport { n: config.n, t, target_mean, mean: Estimate::of_mean(&values), summary })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZProcessSample {
    pub t: f64,
    pub value: f64,
    /// Steps actually simulated (the excursions below 0 are not walked).
    pub walk_steps: u64,
}

/// `Z(t) = ℓ(M^{-1}(t))` from a simple random walk with `walk_steps` steps per
/// unit time.
///
/// The walk runs until its maximum first reaches `a = ceil(t √N)`; the value is
/// the number of times it sits at 0 divided by `2√N`, which makes
/// `E Z(t) = t` (the visit count before the maximum reaches `a` is geometric
/// with mean `2a`). Excursions below 0 return to 0 without touching the
/// maximum, so they are counted but not walked. Excursions above 0 are walked
/// until they hit 0 or `a`; only those steps count toward the budget
/// `100 N`.
pub fn simulate_z(t: f64, walk_steps: u64, seed: u64) -> Result<ZProcessSample> {
    simulate_z_replica(t, walk_steps, seed, 0)
}

pub fn simulate_z_replica(t: f64, walk_steps: u64, seed: u64, replica: u64) -> Result<ZProcessSample> {
    if !(t.is_finite() && t > 0.0) {
        return Err(domain(format!("t must be positive, got {t}")));
    }
    if walk_steps < MIN_WALK_STEPS {
        return Err(domain(format!("walk_steps must be at least {MIN_WALK_STEPS}, got {walk_steps}")));
    }
    let scale = (walk_steps as f64).sqrt();
    let level = (t * scale).ceil() as u64;
    let budget = WALK_BUDGET_FACTOR.saturating_mul(walk_steps);
    let mut rng = rng::stream(seed, replica, 0);
    let mut bits = Bits::default();
    let mut visits: u64 = 0;
    let mut steps: u64 = 0;
    loop {
        visits += 1;
        if !bits.next(&mut rng) {
            continue;
        }
        // positive excursion from 1
        let mut x: u64 = 1;
        steps += 1;
        while x != 0 && x != level {
            let room = x.min(level - x);
            if room > 64 {
                let ups = u64::from(rng.next_u64().count_ones());
                x = x + 2 * ups - 64;
                steps += 64;
            } else if bits.next(&mut rng) {
                x += 1;
                steps += 1;
            } else {
                x -= 1;
                steps += 1;
            }
            if steps > budget {
                return Err(Error::HorizonExhausted { budget, level });
            }
        }
        if x == level {
            break;
        }
    }
    Ok(ZProcessSample { t, value: visits as f64 / (2.0 * scale), walk_steps: steps })
}

/// Buffered fair coin flips.
#[derive(Default)]
struct Bits {
    word: u64,
    left: u32,
}

impl Bits {
    #[inline]
    fn next<R: RngCore>(&mut self, rng: &mut R) -> bool {
        if self.left == 0 {
            self.word = rng.next_u64();
            self.left = 64;
        }
        let bit = self.word & 1 == 1;
        self.word >>= 1;
        self.left -= 1;
        bit
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZSummary {
    pub t: f64,
    pub replicas: usize,
    pub mean: Estimate,
    pub ks_distance: Estimate,
    pub mean_walk_steps: f64,
}

/// Replicated [`simulate_z`] with the mean and the KS distance to the
/// exponential law with mean `t`.
pub fn run_zprocess(t: f64, walk_steps: u64, replicas: usize, seed: u64) -> Result<ZSummary> {
    if replicas < 2 {
        return Err(domain("at least two replicas are required"));
    }
    let samples: Vec<ZProcessSample> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| simulate_z_replica(t, walk_steps, seed, r))
        .collect::<Result<_>>()?;
    let values: Vec<f64> = samples.iter().map(|s| s.value).collect();
    let steps: Vec<f64> = samples.iter().map(|s| s.walk_steps as f64).collect();
    Ok(ZSummary {
        t,
        replicas,
        mean: Estimate::of_mean(&values),
        ks_distance: stats::ks_distance(&values, |x| stats::exponential_cdf(x, t)),
        mean_walk_steps: stats::mean(&steps),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalSummary {
    pub a: f64,
    pub b: f64,
    /// `C² (b - a)`
    pub target_variance: f64,
    pub summary: MomentSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FddReport {
    pub n: f64,
    pub c_fd: f64,
    pub intervals: Vec<IntervalSummary>,
    /// `Cov(Δ_i, Δ_j)`
    pub cross_covariance: Vec<Vec<Estimate>>,
    /// `E[Δ_i Δ_j²]` for `i ≠ j`; zero in the limit by symmetry of `η`.
    pub odd_cross_moments: Vec<Vec<Estimate>>,
}

impl FddReport {
    /// `Var(Δ_j) / Var(Δ_i)`
    pub fn variance_ratio(&self, i: usize, j: usize) -> f64 {
        self.intervals[j].summary.variance.estimate / self.intervals[i].summary.variance.estimate
    }
}

/// Joint increments `F_n(b_i) - F_n(a_i)` over disjoint ascending intervals.
pub fn run_fdd(config: &OccupationConfig, intervals: &[(f64, f64)], replicas: usize, seed: u64) -> Result<FddReport> {
    check_replicas(replicas)?;
    if intervals.is_empty() {
        return Err(domain("at least one interval is required"));
    }
    for (i, &(a, b)) in intervals.iter().enumerate() {
        if !(a >= 0.0 && b > a && b.is_finite()) {
            return Err(domain(format!("interval ({a}, {b}] is not a valid interval in [0, ∞)")));
        }
        if i > 0 && intervals[i - 1].1 > a {
            return Err(domain("intervals must be disjoint and ascending"));
        }
    }
    let mut times: Vec<f64> = intervals.iter().flat_map(|&(a, b)| [a, b]).filter(|&x| x > 0.0).collect();
    times.dedup();
    let config = config.with_normalization(Normalization::SecondOrder);
    let c = c_fd(&config.function)?.c_fd;
    let paths = sample_paths(&config, &times, replicas, seed)?;
    let at = |row: &[f64], s: f64| -> f64 {
        if s == 0.0 {
            0.0
        } else {
            row[times.iter().position(|&x| x == s).expect("endpoint is sampled")]
        }
    };
    let increments: Vec<Vec<f64>> = intervals
        .iter()
        .map(|&(a, b)| paths.iter().map(|row| at(row, b) - at(row, a)).collect())
        .collect();
    let interval_summaries: Vec<IntervalSummary> = intervals
        .iter()
        .zip(&increments)
        .map(|(&(a, b), values)| {
            let var = c * c * (b - a);
            let scale = (var / 2.0).sqrt();
            let mut summary = MomentSummary::from_values(
                values,
                |k| target_moment(k, b - a, c),
                |x| stats::laplace_cdf(x, scale),
            );
            if scale == 0.0 {
                summary.ks_distance = point_mass_ks(values);
            }
            IntervalSummary { a, b, target_variance: var, summary }
        })
        .collect();
    let k = intervals.len();
    let cross_covariance = (0..k)
        .map(|i| (0..k).map(|j| stats::covariance(&increments[i], &increments[j])).collect())
        .collect();
    let odd_cross_moments = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    let prod: Vec<f64> =
                        increments[i].iter().zip(&increments[j]).map(|(x, y)| x * y * y).collect();
                    Estimate::of_mean(&prod)
                })
                .collect()
        })
        .collect();
    Ok(FddReport { n: config.n, c_fd: c, intervals: interval_summaries, cross_covariance, odd_cross_moments })
}

/// Convenience constructor for the standard experiment function.
pub fn default_function(dim: usize) -> Result<TestFunction> {
    TestFunction::gaussian_difference(dim, 2.0)
}
