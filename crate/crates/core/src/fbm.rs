//! Exact sampling of d-dimensional fractional Brownian motion on a uniform
//! grid.
//!
//! Both samplers generate increments (fractional Gaussian noise) and build
//! levels by cumulative summation, so `B^H(0) = 0` holds exactly. Coordinate
//! `c` of replica `r` draws its normals from the stream `(seed, r, c)`.
//!
//! * [`CirculantSampler`]: Davies–Harte circulant embedding, `O(N log N)`.
//!   One complex FFT produces two independent coordinates (real and imaginary
//!   parts).
//! * [`CholeskySampler`]: dense lower-triangular factor of the Toeplitz
//!   increment covariance; an exact oracle for small grids.

use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::domain;
use crate::rng::{self, MAX_LANES};
use crate::{Error, Result};

/// Relative tolerance below which negative circulant eigenvalues are treated
/// as rounding noise and clamped to zero.
pub const EMBEDDING_TOL_REL: f64 = 1e-8;
/// Smallest admissible pivot of the Cholesky oracle.
pub const MIN_PIVOT: f64 = 1e-12;
pub const DEFAULT_CHOLESKY_CAP: usize = 2048;

/// The Gaussian model being sampled: `n_steps` increments of length `step`
/// of a `dim`-dimensional fBm with Hurst index `hurst`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FbmSpec {
    pub hurst: f64,
    pub dim: usize,
    pub step: f64,
    pub n_steps: usize,
    /// When set, `hurst * dim == 1` is enforced.
    pub critical: bool,
}

impl FbmSpec {
    pub fn new(hurst: f64, dim: usize, step: f64, n_steps: usize) -> Result<Self> {
        let spec = Self { hurst, dim, step, n_steps, critical: false };
        spec.validate()?;
        Ok(spec)
    }

    /// Spec at the critical index `H = 1/dim`.
    pub fn critical(dim: usize, step: f64, n_steps: usize) -> Result<Self> {
        if dim == 0 {
            return Err(domain("dimension must be positive"));
        }
        let spec = Self { hurst: 1.0 / dim as f64, dim, step, n_steps, critical: true };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        check_hurst(self.hurst)?;
        if self.dim == 0 || self.dim as u64 > MAX_LANES {
            return Err(domain(format!("dimension must be in 1..={MAX_LANES}, got {}", self.dim)));
        }
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(domain(format!("step must be positive, got {}", self.step)));
        }
        if self.n_steps == 0 {
            return Err(domain("n_steps must be at least 1"));
        }
        if self.critical && (self.hurst * self.dim as f64 - 1.0).abs() > 1e-12 {
            return Err(domain(format!(
                "critical spec requires hurst * dim = 1, got {} * {}",
                self.hurst, self.dim
            )));
        }
        Ok(())
    }

    /// Covariance of increments `i` and `j`: `step^{2H} γ(|i - j|)`.
    pub fn increment_covariance(&self, i: usize, j: usize) -> f64 {
        self.step.powf(2.0 * self.hurst) * fgn_acov(i.abs_diff(j) as u64, self.hurst)
    }
}

/// A sampled path on the grid `0, step, ..., n_steps * step`.
#[derive(Debug, Clone, PartialEq)]
pub struct FbmPath {
    pub spec: FbmSpec,
    pub times: Vec<f64>,
    /// Row-major `(n_steps + 1) x dim`.
    pub values: Vec<f64>,
}

impl FbmPath {
    fn from_increments(spec: FbmSpec, columns: &[Vec<f64>]) -> Self {
        let n = spec.n_steps;
        let d = spec.dim;
        let mut values = vec![0.0; (n + 1) * d];
        for (c, incr) in columns.iter().enumerate() {
            let mut level = 0.0;
            for (k, dx) in incr.iter().enumerate() {
                level += dx;
                values[(k + 1) * d + c] = level;
            }
        }
        let times = (0..=n).map(|k| k as f64 * spec.step).collect();
        Self { spec, times, values }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn point(&self, k: usize) -> &[f64] {
        let d = self.spec.dim;
        &self.values[k * d..(k + 1) * d]
    }

    pub fn coordinate(&self, c: usize) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().skip(c).step_by(self.spec.dim).copied()
    }

    /// CSV with header `t,x_1,...,x_d`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let header: Vec<String> = (1..=self.spec.dim).map(|c| format!("x_{c}")).collect();
        writeln!(out, "t,{}", header.join(","))?;
        for k in 0..self.len() {
            write!(out, "{}", self.times[k])?;
            for v in self.point(k) {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

fn check_hurst(hurst: f64) -> Result<()> {
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(domain(format!("hurst must lie in (0, 1), got {hurst}")));
    }
    Ok(())
}

/// `E[B^H(s) B^H(t)] = ½(t^{2H} + s^{2H} - |t - s|^{2H})`.
pub fn covariance(s: f64, t: f64, hurst: f64) -> Result<f64> {
    check_hurst(hurst)?;
    if !(s >= 0.0 && t >= 0.0) {
        return Err(domain(format!("times must be nonnegative, got ({s}, {t})")));
    }
    let h2 = 2.0 * hurst;
    Ok(0.5 * (t.powf(h2) + s.powf(h2) - (t - s).abs().powf(h2)))
}

/// Autocovariance of unit-spacing fractional Gaussian noise,
/// `γ(k) = ½(|k+1|^{2H} + |k-1|^{2H} - 2|k|^{2H})`.
pub fn fgn_autocovariance(lag: u64, hurst: f64) -> Result<f64> {
    check_hurst(hurst)?;
    Ok(fgn_acov(lag, hurst))
}

pub(crate) fn fgn_acov(lag: u64, hurst: f64) -> f64 {
    if lag == 0 {
        return 1.0;
    }
    let k = lag as f64;
    let h2 = 2.0 * hurst;
    0.5 * ((k + 1.0).powf(h2) + (k - 1.0).powf(h2) - 2.0 * k.powf(h2))
}

/// Davies–Harte sampler with precomputed embedding spectrum.
#[derive(Clone)]
pub struct CirculantSampler {
    spec: FbmSpec,
    /// `sqrt(λ_k / m) * step^H`
    amplitudes: Vec<f64>,
    /// Clamped eigenvalues `λ_k` of the unit-step embedding.
    eigenvalues: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for CirculantSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CirculantSampler")
            .field("spec", &self.spec)
            .field("embedding_size", &self.embedding_size())
            .finish()
    }
}

/// First power of two `>= 2(N - 1)`, and at least 2.
pub fn embedding_size(n_steps: usize) -> usize {
    (2 * n_steps.saturating_sub(1)).next_power_of_two().max(2)
}

impl CirculantSampler {
    pub fn new(spec: FbmSpec) -> Result<Self> {
        spec.validate()?;
        let m = embedding_size(spec.n_steps);
        let half = m / 2;
        let mut row = vec![Complex::new(0.0, 0.0); m];
        for k in 0..=half {
            row[k].re = fgn_acov(k as u64, spec.hurst);
        }
        for k in 1..half {
            row[m - k].re = row[k].re;
        }
        let fft = FftPlanner::new().plan_fft_forward(m);
        fft.process(&mut row);
        let max = row.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        let min = row.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
        if min < -EMBEDDING_TOL_REL * max {
            return Err(Error::EmbeddingNotPsd { min, max });
        }
        let eigenvalues: Vec<f64> = row.iter().map(|z| z.re.max(0.0)).collect();
        let scale = spec.step.powf(spec.hurst) / (m as f64).sqrt();
        let amplitudes = eigenvalues.iter().map(|l| l.sqrt() * scale).collect();
        Ok(Self { spec, amplitudes, eigenvalues, fft })
    }

    pub fn spec(&self) -> &FbmSpec {
        &self.spec
    }

    pub fn embedding_size(&self) -> usize {
        self.amplitudes.len()
    }

    /// Covariance between increments `lag` apart implied by the (clamped)
    /// embedding spectrum, recovered by an inverse transform.
    pub fn embedded_covariances(&self) -> Vec<f64> {
        let m = self.embedding_size();
        let mut buf: Vec<Complex<f64>> = self.eigenvalues.iter().map(|&l| Complex::new(l, 0.0)).collect();
        FftPlanner::new().plan_fft_inverse(m).process(&mut buf);
        let scale = self.spec.step.powf(2.0 * self.spec.hurst) / m as f64;
        buf.iter().take(self.spec.n_steps).map(|z| z.re * scale).collect()
    }

    /// Increments of every coordinate of replica `replica`, one column each.
    pub fn increments(&self, seed: u64, replica: u64) -> Vec<Vec<f64>> {
        let mut cols = Vec::with_capacity(self.spec.dim);
        self.for_each_coordinate(seed, replica, |_, incr| cols.push(incr.to_vec()));
        cols
    }

    /// Calls `visit(c, increments_c)` for each coordinate in order, reusing
    /// one FFT buffer per coordinate pair.
    pub fn for_each_coordinate<F>(&self, seed: u64, replica: u64, mut visit: F)
    where
        F: FnMut(usize, &[f64]),
    {
        let m = self.embedding_size();
        let n = self.spec.n_steps;
        let mut buf = vec![Complex::new(0.0, 0.0); m];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        let mut column = vec![0.0; n];
        let d = self.spec.dim;
        for pair in 0..d.div_ceil(2) {
            let (re_lane, im_lane) = (2 * pair, 2 * pair + 1);
            let mut re_rng = rng::stream(seed, replica, re_lane as u64);
            let mut im_rng = rng::stream(seed, replica, im_lane as u64);
            let need_im = im_lane < d;
            for (z, &a) in buf.iter_mut().zip(&self.amplitudes) {
                let re: f64 = re_rng.sample(StandardNormal);
                let im: f64 = im_rng.sample(StandardNormal);
                *z = Complex::new(a * re, a * im);
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for (dst, z) in column.iter_mut().zip(&buf) {
                *dst = z.re;
            }
            visit(re_lane, &column);
            if need_im {
                for (dst, z) in column.iter_mut().zip(&buf) {
                    *dst = z.im;
                }
                visit(im_lane, &column);
            }
        }
    }

    pub fn sample(&self, seed: u64, replica: u64) -> FbmPath {
        FbmPath::from_increments(self.spec, &self.increments(seed, replica))
    }
}

/// One circulant-embedding path (replica 0 of `seed`).
pub fn sample_circulant(spec: FbmSpec, seed: u64) -> Result<FbmPath> {
    Ok(CirculantSampler::new(spec)?.sample(seed, 0))
}

/// Dense Cholesky factor of the increment covariance.
#[derive(Debug, Clone)]
pub struct CholeskySampler {
    spec: FbmSpec,
    lower: DMatrix<f64>,
}

impl CholeskySampler {
    pub fn new(spec: FbmSpec) -> Result<Self> {
        Self::with_cap(spec, DEFAULT_CHOLESKY_CAP)
    }

    pub fn with_cap(spec: FbmSpec, cap: usize) -> Result<Self> {
        spec.validate()?;
        let n = spec.n_steps;
        if n > cap {
            return Err(Error::GridTooLarge { points: n as u64, cap: cap as u64 });
        }
        let cov = increment_covariance_matrix(&spec);
        let chol = cov.cholesky().ok_or(Error::NotPositiveDefinite { row: 0, pivot: f64::NAN })?;
        let lower = chol.unpack();
        for i in 0..n {
            let pivot = lower[(i, i)] * lower[(i, i)];
            if pivot < MIN_PIVOT {
                return Err(Error::NotPositiveDefinite { row: i, pivot });
            }
        }
        Ok(Self { spec, lower })
    }

    pub fn spec(&self) -> &FbmSpec {
        &self.spec
    }

    pub fn increments(&self, seed: u64, replica: u64) -> Vec<Vec<f64>> {
        let n = self.spec.n_steps;
        (0..self.spec.dim)
            .map(|c| {
                let mut rng = rng::stream(seed, replica, c as u64);
                let z = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
                (&self.lower * z).iter().copied().collect()
            })
            .collect()
    }

    pub fn sample(&self, seed: u64, replica: u64) -> FbmPath {
        FbmPath::from_increments(self.spec, &self.increments(seed, replica))
    }
}

/// The `N x N` Toeplitz covariance of the increments.
pub fn increment_covariance_matrix(spec: &FbmSpec) -> DMatrix<f64> {
    let n = spec.n_steps;
    DMatrix::from_fn(n, n, |i, j| spec.increment_covariance(i, j))
}

/// One Cholesky path (replica 0 of `seed`), capped at [`DEFAULT_CHOLESKY_CAP`]
/// increments.
pub fn sample_cholesky(spec: FbmSpec, seed: u64) -> Result<FbmPath> {
    Ok(CholeskySampler::new(spec)?.sample(seed, 0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covariance_examples() {
        let t: f64 = 2.7;
        assert!((covariance(t, t, 0.3).unwrap() - t.powf(0.6)).abs() < 1e-15);
        assert!((covariance(1.0, 2.0, 0.5).unwrap() - 1.0).abs() < 1e-15);
        // ½(3^{0.5} + 1 - 2^{0.5}), evaluated independently
        let expected = 0.5 * (3f64.sqrt() + 1.0 - 2f64.sqrt());
        assert!((covariance(1.0, 3.0, 0.25).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.658_918_6).abs() < 1e-7);
    }

    #[test]
    fn covariance_domain_errors() {
        assert!(covariance(-1.0, 1.0, 0.3).is_err());
        assert!(covariance(1.0, 1.0, 0.0).is_err());
        assert!(covariance(1.0, 1.0, 1.0).is_err());
        assert!(fgn_autocovariance(1, 1.5).is_err());
    }

    #[test]
    fn fgn_autocovariance_examples() {
        assert_eq!(fgn_autocovariance(0, 0.37).unwrap(), 1.0);
        for k in 1..50 {
            assert!(fgn_autocovariance(k, 0.5).unwrap().abs() < 1e-15);
        }
        let g1 = fgn_autocovariance(1, 0.25).unwrap();
        assert!((g1 - 0.5 * (2f64.sqrt() - 2.0)).abs() < 1e-15);
        assert!((g1 + 0.292_893).abs() < 1e-6);
    }

    #[test]
    fn spec_validation() {
        assert!(FbmSpec::new(0.5, 2, 0.5, 10).is_ok());
        assert!(FbmSpec::new(0.5, 2, 0.0, 10).is_err());
        assert!(FbmSpec::new(0.5, 2, 0.5, 0).is_err());
        assert!(FbmSpec::new(1.2, 2, 0.5, 10).is_err());
        let mut s = FbmSpec::critical(3, 1.0, 8).unwrap();
        assert!((s.hurst - 1.0 / 3.0).abs() < 1e-15);
        s.hurst = 0.5;
        assert!(s.validate().is_err());
    }

    #[test]
    fn embedding_sizes() {
        assert_eq!(embedding_size(1), 2);
        assert_eq!(embedding_size(2), 2);
        assert_eq!(embedding_size(3), 4);
        assert_eq!(embedding_size(1024), 2048);
        assert_eq!(embedding_size(1025), 2048);
        assert_eq!(embedding_size(1026), 4096);
    }

    #[test]
    fn model_covariance_matches_closed_form() {
        for &(h, n, step) in &[(0.25, 100, 0.5), (1.0 / 3.0, 257, 2.0), (0.5, 64, 1.0), (0.7, 33, 0.1)] {
            let spec = FbmSpec::new(h, 1, step, n).unwrap();
            let sampler = CirculantSampler::new(spec).unwrap();
            let embedded = sampler.embedded_covariances();
            let dense = increment_covariance_matrix(&spec);
            for lag in 0..n {
                let exact = step.powf(2.0 * h) * fgn_acov(lag as u64, h);
                assert!((embedded[lag] - exact).abs() < 1e-12, "H={h} lag={lag}");
                assert!((dense[(lag, 0)] - exact).abs() < 1e-12);
                assert!((dense[(0, lag)] - exact).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn paths_start_at_zero_on_uniform_grid() {
        let spec = FbmSpec::new(0.3, 3, 0.25, 17).unwrap();
        for path in [sample_circulant(spec, 4).unwrap(), sample_cholesky(spec, 4).unwrap()] {
            assert_eq!(path.len(), 18);
            assert_eq!(path.point(0), &[0.0, 0.0, 0.0]);
            for (k, t) in path.times.iter().enumerate() {
                assert!((t - k as f64 * 0.25).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn samplers_are_deterministic() {
        let spec = FbmSpec::new(1.0 / 3.0, 2, 0.5, 300).unwrap();
        assert_eq!(sample_circulant(spec, 11).unwrap(), sample_circulant(spec, 11).unwrap());
        assert_eq!(sample_cholesky(spec, 11).unwrap(), sample_cholesky(spec, 11).unwrap());
        assert_ne!(sample_circulant(spec, 11).unwrap(), sample_circulant(spec, 12).unwrap());
    }

    #[test]
    fn single_step_cholesky_is_one_gaussian() {
        let spec = FbmSpec::new(0.3, 1, 2.0, 1).unwrap();
        let s = CholeskySampler::new(spec).unwrap();
        assert!((s.lower[(0, 0)] - 2f64.powf(0.3)).abs() < 1e-15);
    }

    #[test]
    fn cholesky_cap_is_enforced() {
        let spec = FbmSpec::new(0.3, 1, 1.0, 100).unwrap();
        assert!(matches!(CholeskySampler::with_cap(spec, 50), Err(Error::GridTooLarge { .. })));
    }

    #[test]
    fn csv_dump_has_header_and_rows() {
        let spec = FbmSpec::new(0.5, 2, 1.0, 3).unwrap();
        let path = sample_circulant(spec, 1).unwrap();
        let mut out = Vec::new();
        path.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,x_1,x_2");
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[1], "0,0,0");
    }
}
