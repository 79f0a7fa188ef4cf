//! Realizations of the normalized occupation functional
//! `F_n(t) = n^{-1/2} ∫_0^{e^{nt}} f(B^H(s)) ds` at the critical index
//! `H = 1/d`.
//!
//! The integral is a left-endpoint Riemann sum on the grid `{0, h, 2h, ...}`
//! with `N = ceil(e^{nt} / h)` points, accumulated with compensated summation.
//! Two path engines produce the grid values:
//!
//! * [`PathEngine::Circulant`] samples the whole grid by circulant embedding.
//! * [`PathEngine::Bridge`] (Markov case `H = ½` only) samples the endpoint of
//!   the horizon and refines by Brownian-bridge bisection, descending only
//!   into intervals whose path can come within reach of the support of `f`.
//!   An interval is discarded when its chord stays further than
//!   `R_f + a` from the origin, where `|f| <= 1e-20` beyond `R_f` and the
//!   bridge deviates by more than `a` with probability below `2d e^{-50}`.
//!   Grid values it does visit have the exact joint law of the uniform grid.

use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::domain;
use crate::fbm::{CirculantSampler, FbmSpec};
use crate::functions::TestFunction;
use crate::rng::{self, MAX_LANES};
use crate::stats::CompensatedSum;
use crate::{Error, Result};

pub const DEFAULT_SPACING: f64 = 0.5;
/// Largest grid the circulant engine will allocate.
pub const DEFAULT_GRID_CAP: u64 = 1 << 26;
/// Largest grid index the bridge engine addresses.
pub const BRIDGE_GRID_CAP: u64 = 1 << 52;

/// `|f| <= SUPPORT_EPS` outside the radius the bridge engine refines.
const SUPPORT_EPS: f64 = 1e-20;
/// Exponent of the bridge-deviation tail bound used to discard intervals.
const SKIP_EXPONENT: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathEngine {
    /// Bridge for `H = ½`, circulant otherwise.
    Auto,
    Circulant,
    Bridge,
}

impl std::str::FromStr for PathEngine {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Self::Auto),
            "circulant" => Ok(Self::Circulant),
            "bridge" => Ok(Self::Bridge),
            other => Err(domain(format!("unknown path engine `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `n^{-1/2}`, the fluctuation scale for mean-zero `f`.
    SecondOrder,
    /// `n^{-1}`, the scale of the first-order law.
    FirstOrder,
}

impl Normalization {
    pub fn factor(self, n: f64) -> f64 {
        match self {
            Self::SecondOrder => n.sqrt().recip(),
            Self::FirstOrder => n.recip(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OccupationConfig {
    pub n: f64,
    pub t: f64,
    pub spacing: f64,
    pub function: TestFunction,
    pub engine: PathEngine,
    pub normalization: Normalization,
    pub grid_cap: u64,
}

impl OccupationConfig {
    pub fn new(function: TestFunction, n: f64, t: f64) -> Result<Self> {
        let cfg = Self {
            n,
            t,
            spacing: DEFAULT_SPACING,
            function,
            engine: PathEngine::Auto,
            normalization: Normalization::SecondOrder,
            grid_cap: DEFAULT_GRID_CAP,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_spacing(mut self, spacing: f64) -> Result<Self> {
        self.spacing = spacing;
        self.validate()?;
        Ok(self)
    }

    pub fn with_engine(mut self, engine: PathEngine) -> Result<Self> {
        self.engine = engine;
        self.validate()?;
        Ok(self)
    }

    pub fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }

    pub fn with_grid_cap(mut self, cap: u64) -> Self {
        self.grid_cap = cap;
        self
    }

    pub fn with_t(mut self, t: f64) -> Result<Self> {
        self.t = t;
        self.validate()?;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.function.dim
    }

    /// The critical Hurst index `1/d`.
    pub fn hurst(&self) -> f64 {
        1.0 / self.dim() as f64
    }

    /// `e^{n t}`
    pub fn horizon(&self, t: f64) -> f64 {
        (self.n * t).exp()
    }

    /// `ceil(e^{nt} / h)`, saturating at `u64::MAX`.
    pub fn grid_points(&self, t: f64) -> u64 {
        let points = (self.horizon(t) / self.spacing).ceil();
        if points >= u64::MAX as f64 {
            u64::MAX
        } else {
            (points as u64).max(1)
        }
    }

    pub fn resolved_engine(&self) -> PathEngine {
        match self.engine {
            PathEngine::Auto if self.hurst() == 0.5 => PathEngine::Bridge,
            PathEngine::Auto => PathEngine::Circulant,
            e => e,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n.is_finite() && self.n > 0.0) {
            return Err(domain(format!("n must be positive, got {}", self.n)));
        }
        if !(self.t.is_finite() && self.t > 0.0) {
            return Err(domain(format!("t must be positive, got {}", self.t)));
        }
        if !(self.spacing.is_finite() && self.spacing > 0.0) {
            return Err(domain(format!("spacing must be positive, got {}", self.spacing)));
        }
        if self.dim() as u64 > MAX_LANES {
            return Err(domain(format!("dimension above {MAX_LANES} is not supported")));
        }
        if self.engine == PathEngine::Bridge && self.hurst() != 0.5 {
            return Err(domain("the bridge engine needs the Markov case H = 1/2 (d = 2)"));
        }
        Ok(())
    }
}

/// One realization of the normalized functional at one horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OccupationSample {
    pub value: f64,
    pub seed: u64,
    pub replica: u64,
    pub n: f64,
    pub t: f64,
}

/// Reusable simulator for a fixed configuration and list of horizons.
#[derive(Debug, Clone)]
pub struct OccupationSimulator {
    config: OccupationConfig,
    times: Vec<f64>,
    /// Grid points `N_i` per horizon, ascending.
    boundaries: Vec<u64>,
    engine: PathEngine,
    sampler: Option<CirculantSampler>,
}

impl OccupationSimulator {
    pub fn new(config: OccupationConfig) -> Result<Self> {
        Self::with_times(config, &[config.t])
    }

    pub fn with_times(config: OccupationConfig, times: &[f64]) -> Result<Self> {
        config.validate()?;
        if times.is_empty() {
            return Err(domain("at least one horizon is required"));
        }
        if times.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(domain("horizons must be positive"));
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(domain("horizons must be strictly ascending"));
        }
        let boundaries: Vec<u64> = times.iter().map(|&t| config.grid_points(t)).collect();
        let n_max = *boundaries.last().expect("nonempty");
        let engine = config.resolved_engine();
        let sampler = match engine {
            PathEngine::Circulant => {
                if n_max > config.grid_cap {
                    return Err(Error::GridTooLarge { points: n_max, cap: config.grid_cap });
                }
                let spec = FbmSpec::critical(config.dim(), config.spacing, n_max as usize)?;
                Some(CirculantSampler::new(spec)?)
            }
            PathEngine::Bridge => {
                if n_max > BRIDGE_GRID_CAP {
                    return Err(Error::GridTooLarge { points: n_max, cap: BRIDGE_GRID_CAP });
                }
                None
            }
            PathEngine::Auto => unreachable!("engine is resolved"),
        };
        Ok(Self { config, times: times.to_vec(), boundaries, engine, sampler })
    }

    pub fn config(&self) -> &OccupationConfig {
        &self.config
    }

    pub fn engine(&self) -> PathEngine {
        self.engine
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Unnormalized Riemann sums `h Σ_{k < N_i} f(B(kh))` for every horizon.
    pub fn raw_integrals(&self, seed: u64, replica: u64) -> Vec<f64> {
        let f = &self.config.function;
        if f.is_zero() {
            return vec![0.0; self.times.len()];
        }
        let buckets = match &self.sampler {
            Some(sampler) => self.circulant_buckets(sampler, seed, replica),
            None => self.bridge_buckets(seed, replica),
        };
        let h = self.config.spacing;
        let mut running = CompensatedSum::new();
        buckets
            .iter()
            .map(|b| {
                running.add(b.value());
                h * running.value()
            })
            .collect()
    }

    fn circulant_buckets(&self, sampler: &CirculantSampler, seed: u64, replica: u64) -> Vec<CompensatedSum> {
        let n_max = *self.boundaries.last().expect("nonempty") as usize;
        let mut r2 = vec![0.0; n_max];
        sampler.for_each_coordinate(seed, replica, |_, incr| {
            let mut level = 0.0;
            // r2[0] stays 0: B(0) = 0
            for (slot, dx) in r2[1..].iter_mut().zip(incr) {
                level += dx;
                *slot += level * level;
            }
        });
        let f = &self.config.function;
        let mut buckets = vec![CompensatedSum::new(); self.boundaries.len()];
        let mut start = 0usize;
        for (bucket, &end) in buckets.iter_mut().zip(&self.boundaries) {
            for &x in &r2[start..end as usize] {
                bucket.add(f.eval_radius_sq(x));
            }
            start = end as usize;
        }
        buckets
    }

    fn bridge_buckets(&self, seed: u64, replica: u64) -> Vec<CompensatedSum> {
        let d = self.config.dim();
        let h = self.config.spacing;
        let n_max = *self.boundaries.last().expect("nonempty");
        let mut walker = BridgeWalker {
            function: &self.config.function,
            spacing: h,
            skip_radius: self.config.function.effective_radius(SUPPORT_EPS),
            dim: d,
            rngs: (0..d).map(|c| rng::stream(seed, replica, c as u64)).collect(),
            boundaries: &self.boundaries,
            buckets: vec![CompensatedSum::new(); self.boundaries.len()],
        };
        let origin = [0.0; MAX_LANES as usize];
        let mut end = [0.0; MAX_LANES as usize];
        let sd = (n_max as f64 * h).sqrt();
        for (c, slot) in end.iter_mut().take(d).enumerate() {
            *slot = sd * walker.rngs[c].sample::<f64, _>(StandardNormal);
        }
        walker.refine(0, &origin, n_max, &end);
        walker.buckets
    }

    /// Normalized samples at every horizon, all from one path.
    pub fn realize_multi(&self, seed: u64, replica: u64) -> Result<Vec<OccupationSample>> {
        let cfg = &self.config;
        let scale = cfg.normalization.factor(cfg.n);
        let raw = self.raw_integrals(seed, replica);
        raw.iter()
            .zip(&self.times)
            .zip(&self.boundaries)
            .map(|((&integral, &t), &points)| {
                let value = scale * integral;
                if !value.is_finite() {
                    return Err(Error::NonFinite(format!("occupation functional at t = {t}")));
                }
                debug_assert!(
                    value.abs() <= scale * cfg.function.sup_bound() * points as f64 * cfg.spacing * (1.0 + 1e-9),
                    "occupation value {value} exceeds the sup-norm bound"
                );
                Ok(OccupationSample { value, seed, replica, n: cfg.n, t })
            })
            .collect()
    }

    pub fn realize(&self, seed: u64, replica: u64) -> Result<OccupationSample> {
        Ok(*self.realize_multi(seed, replica)?.last().expect("nonempty"))
    }
}

struct BridgeWalker<'a> {
    function: &'a TestFunction,
    spacing: f64,
    skip_radius: f64,
    dim: usize,
    rngs: Vec<ChaCha8Rng>,
    boundaries: &'a [u64],
    buckets: Vec<CompensatedSum>,
}

type Point = [f64; MAX_LANES as usize];

impl BridgeWalker<'_> {
    fn refine(&mut self, i: u64, left: &Point, j: u64, right: &Point) {
        let d = self.dim;
        if j - i == 1 {
            let r2: f64 = left[..d].iter().map(|x| x * x).sum();
            let bucket = self.boundaries.partition_point(|&b| b <= i);
            self.buckets[bucket].add(self.function.eval_radius_sq(r2));
            return;
        }
        let span = (j - i) as f64;
        let reach = (SKIP_EXPONENT * d as f64 * span * self.spacing / 2.0).sqrt();
        if chord_distance(&left[..d], &right[..d]) > self.skip_radius + reach {
            return;
        }
        let mid = i + (j - i) / 2;
        let w = (mid - i) as f64 / span;
        let sd = ((mid - i) as f64 * (j - mid) as f64 / span * self.spacing).sqrt();
        let mut point = [0.0; MAX_LANES as usize];
        for c in 0..d {
            let z: f64 = self.rngs[c].sample(StandardNormal);
            point[c] = left[c] + w * (right[c] - left[c]) + sd * z;
        }
        self.refine(i, left, mid, &point);
        self.refine(mid, &point, j, right);
    }
}

/// Distance from the origin to the segment `[p, q]`.
fn chord_distance(p: &[f64], q: &[f64]) -> f64 {
    let dir: f64 = p.iter().zip(q).map(|(a, b)| (b - a) * (b - a)).sum();
    let along = if dir > 0.0 {
        (-p.iter().zip(q).map(|(a, b)| a * (b - a)).sum::<f64>() / dir).clamp(0.0, 1.0)
    } else {
        0.0
    };
    p.iter().zip(q).map(|(a, b)| (a + along * (b - a)).powi(2)).sum::<f64>().sqrt()
}

/// One realization at `config.t` (replica 0 of `seed`).
pub fn realize(config: &OccupationConfig, seed: u64) -> Result<OccupationSample> {
    OccupationSimulator::new(*config)?.realize(seed, 0)
}

/// Joint realization at ascending horizons from one path (replica 0 of `seed`).
pub fn realize_multi(config: &OccupationConfig, times: &[f64], seed: u64) -> Result<Vec<OccupationSample>> {
    OccupationSimulator::with_times(*config, times)?.realize_multi(seed, 0)
}

/// Debug dump: `t,value` rows.
pub fn write_samples_csv<W: Write>(samples: &[OccupationSample], mut out: W) -> std::io::Result<()> {
    writeln!(out, "t,value")?;
    for s in samples {
        writeln!(out, "{},{}", s.t, s.value)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussdiff() -> TestFunction {
        TestFunction::gaussian_difference(2, 2.0).unwrap()
    }

    #[test]
    fn zero_function_gives_exact_zero() {
        for engine in [PathEngine::Circulant, PathEngine::Bridge] {
            let cfg = OccupationConfig::new(TestFunction::zero(2).unwrap(), 4.0, 1.0)
                .unwrap()
                .with_engine(engine)
                .unwrap();
            assert_eq!(realize(&cfg, 3).unwrap().value, 0.0);
            let multi = realize_multi(&cfg, &[0.5, 1.0], 3).unwrap();
            assert!(multi.iter().all(|s| s.value == 0.0));
        }
    }

    #[test]
    fn constant_function_integrates_the_grid() {
        // h Σ_{k<N} c = c N h with N = ceil(e^{nt}/h); differs from c e^{nt} by < c h
        let c = 1.5;
        for (dim, engine) in [(2, PathEngine::Circulant), (2, PathEngine::Bridge), (3, PathEngine::Circulant)] {
            let cfg = OccupationConfig::new(TestFunction::constant(dim, c).unwrap(), 3.0, 1.0)
                .unwrap()
                .with_engine(engine)
                .unwrap();
            let value = realize(&cfg, 9).unwrap().value;
            let points = cfg.grid_points(1.0) as f64;
            assert!((value - c * points * 0.5 / 3f64.sqrt()).abs() < 1e-12);
            assert!((value - c * 3f64.exp() / 3f64.sqrt()).abs() <= c * 0.5 / 3f64.sqrt());
        }
    }

    #[test]
    fn single_horizon_multi_equals_realize() {
        let cfg = OccupationConfig::new(gaussdiff(), 3.0, 1.0).unwrap();
        let single = realize(&cfg, 5).unwrap();
        let multi = realize_multi(&cfg, &[1.0], 5).unwrap();
        assert_eq!(multi, vec![single]);
    }

    #[test]
    fn realizations_are_deterministic() {
        for engine in [PathEngine::Circulant, PathEngine::Bridge] {
            let cfg = OccupationConfig::new(gaussdiff(), 4.0, 1.0).unwrap().with_engine(engine).unwrap();
            let sim = OccupationSimulator::with_times(cfg, &[0.5, 1.0]).unwrap();
            assert_eq!(sim.realize_multi(1, 7).unwrap(), sim.realize_multi(1, 7).unwrap());
            assert_ne!(sim.realize_multi(1, 7).unwrap(), sim.realize_multi(1, 8).unwrap());
        }
    }

    #[test]
    fn bridge_engine_rejects_non_markov_dimension() {
        let f = TestFunction::gaussian_difference(3, 2.0).unwrap();
        let cfg = OccupationConfig::new(f, 4.0, 1.0).unwrap();
        assert!(cfg.with_engine(PathEngine::Bridge).is_err());
        assert_eq!(cfg.resolved_engine(), PathEngine::Circulant);
    }

    #[test]
    fn grid_cap_is_enforced() {
        let f = TestFunction::gaussian_difference(3, 2.0).unwrap();
        let cfg = OccupationConfig::new(f, 20.0, 1.0).unwrap();
        assert!(matches!(OccupationSimulator::new(cfg), Err(Error::GridTooLarge { .. })));
        let cfg = OccupationConfig::new(gaussdiff(), 40.0, 1.0).unwrap();
        assert!(matches!(OccupationSimulator::new(cfg), Err(Error::GridTooLarge { .. })));
    }

    #[test]
    fn horizons_must_ascend() {
        let cfg = OccupationConfig::new(gaussdiff(), 3.0, 1.0).unwrap();
        assert!(OccupationSimulator::with_times(cfg, &[1.0, 0.5]).is_err());
        assert!(OccupationSimulator::with_times(cfg, &[]).is_err());
        assert!(OccupationSimulator::with_times(cfg, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn zero_increment_between_equal_grids() {
        // two horizons mapping to the same grid size give identical values
        let cfg = OccupationConfig::new(gaussdiff(), 1.0, 1.0).unwrap().with_spacing(10.0).unwrap();
        let s = realize_multi(&cfg, &[1.0, 1.0001], 2).unwrap();
        assert_eq!(s[0].value, s[1].value);
    }

    #[test]
    fn chord_distance_cases() {
        assert!((chord_distance(&[1.0, -1.0], &[1.0, 1.0]) - 1.0).abs() < 1e-15);
        assert!((chord_distance(&[3.0, 4.0], &[6.0, 8.0]) - 5.0).abs() < 1e-15);
        assert!((chord_distance(&[2.0, 0.0], &[2.0, 0.0]) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn bridge_matches_full_grid_on_small_horizon() {
        // With skipping disabled by a huge support radius, the bridge engine
        // visits every grid point; with the default radius it must agree in
        // mean square with the circulant engine (checked statistically in
        // the integration tests). Here: crude bound holds per sample.
        let cfg = OccupationConfig::new(gaussdiff(), 6.0, 1.0).unwrap();
        let sim = OccupationSimulator::new(cfg).unwrap();
        assert_eq!(sim.engine(), PathEngine::Bridge);
        for r in 0..20 {
            let v = sim.realize(4, r).unwrap().value;
            assert!(v.abs() <= 1.25 * 6f64.exp() / 6f64.sqrt());
        }
    }
}
