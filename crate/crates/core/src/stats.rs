//! Summation, moment estimation and goodness-of-fit helpers.

use serde::{Deserialize, Serialize};

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    values.into_iter().collect::<CompensatedSum>().value()
}

pub fn mean(values: &[f64]) -> f64 {
    compensated_sum(values.iter().copied()) / values.len() as f64
}

/// Unbiased sample variance.
pub fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    compensated_sum(values.iter().map(|x| (x - m) * (x - m))) / (values.len() as f64 - 1.0)
}

/// Standard error of the sample mean.
pub fn standard_error(values: &[f64]) -> f64 {
    (variance(values) / values.len() as f64).sqrt()
}

/// An estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub estimate: f64,
    pub se: f64,
}

impl Estimate {
    pub fn of_mean(values: &[f64]) -> Self {
        Self { estimate: mean(values), se: standard_error(values) }
    }

    /// `|estimate - target| <= k * se`
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.estimate - target).abs() <= k * self.se
    }
}

/// Number of power sums kept by [`PowerSums`].
pub const MAX_POWER: usize = 8;

/// Power sums `S_k = Σ x^k`, `k = 0..=8`, the sufficient statistic for every
/// moment functional the harness reports.
#[derive(Debug, Clone, Copy)]
pub struct PowerSums {
    sums: [f64; MAX_POWER + 1],
}

impl PowerSums {
    pub fn from_values(values: &[f64]) -> Self {
        let mut acc = [CompensatedSum::new(); MAX_POWER + 1];
        for &x in values {
            let mut p = 1.0;
            for slot in acc.iter_mut() {
                slot.add(p);
                p *= x;
            }
        }
        let mut sums = [0.0; MAX_POWER + 1];
        for (s, a) in sums.iter_mut().zip(acc.iter()) {
            *s = a.value();
        }
        Self { sums }
    }

    fn without(&self, x: f64) -> Self {
        let mut sums = self.sums;
        let mut p = 1.0;
        for s in sums.iter_mut() {
            *s -= p;
            p *= x;
        }
        Self { sums }
    }

    pub fn count(&self) -> f64 {
        self.sums[0]
    }

    /// Raw moment `E x^k`.
    pub fn raw(&self, k: usize) -> f64 {
        self.sums[k] / self.sums[0]
    }

    /// Central moment `E (x - mean)^k` for `k <= 4`.
    pub fn central(&self, k: usize) -> f64 {
        let m1 = self.raw(1);
        match k {
            0 => 1.0,
            1 => 0.0,
            2 => self.raw(2) - m1 * m1,
            3 => self.raw(3) - 3.0 * m1 * self.raw(2) + 2.0 * m1.powi(3),
            4 => {
                self.raw(4) - 4.0 * m1 * self.raw(3) + 6.0 * m1 * m1 * self.raw(2)
                    - 3.0 * m1.powi(4)
            }
            _ => panic!("central moment of order {k} not supported"),
        }
    }

    pub fn excess_kurtosis(&self) -> f64 {
        let m2 = self.central(2);
        self.central(4) / (m2 * m2) - 3.0
    }
}

/// Delete-one jackknife estimate and standard error of a statistic that is a
/// function of the power sums.
pub fn jackknife<F>(values: &[f64], stat: F) -> Estimate
where
    F: Fn(&PowerSums) -> f64,
{
    let full = PowerSums::from_values(values);
    let estimate = stat(&full);
    let n = values.len() as f64;
    if values.len() < 2 {
        return Estimate { estimate, se: f64::NAN };
    }
    let leave_one_out: Vec<f64> = values.iter().map(|&x| stat(&full.without(x))).collect();
    let center = mean(&leave_one_out);
    let ss = compensated_sum(leave_one_out.iter().map(|t| (t - center) * (t - center)));
    Estimate { estimate, se: ((n - 1.0) / n * ss).sqrt() }
}

/// Kolmogorov–Smirnov distance between the empirical distribution of
/// `values` and the continuous CDF `cdf`, with an approximate standard error.
///
/// The standard error is the larger of the binomial error of the empirical
/// CDF at the maximizing point and the null standard deviation of the
/// Kolmogorov distribution scaled by `1/sqrt(n)`.
pub fn ks_distance<F>(values: &[f64], cdf: F) -> Estimate
where
    F: Fn(f64) -> f64,
{
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut best = 0.0_f64;
    let mut at = 0.5;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        let above = (i + 1) as f64 / n - f;
        let below = f - i as f64 / n;
        let d = above.max(below);
        if d > best {
            best = d;
            at = f;
        }
    }
    // sd of the limiting Kolmogorov distribution
    const KOLMOGOROV_SD: f64 = 0.2603;
    let binomial = (at * (1.0 - at) / n).sqrt();
    Estimate { estimate: best.min(1.0), se: binomial.max(KOLMOGOROV_SD / n.sqrt()) }
}

/// CDF of the centered Laplace law with scale `b`.
pub fn laplace_cdf(x: f64, b: f64) -> f64 {
    if x < 0.0 {
        0.5 * (x / b).exp()
    } else {
        1.0 - 0.5 * (-x / b).exp()
    }
}

/// CDF of the exponential law with the given mean; a point mass at 0 when the
/// mean is 0.
pub fn exponential_cdf(x: f64, mean: f64) -> f64 {
    if x < 0.0 {
        0.0
    } else if mean == 0.0 {
        1.0
    } else {
        -(-x / mean).exp_m1()
    }
}

/// Sample covariance of paired observations with the delta-method standard
/// error `sd((x - x̄)(y - ȳ)) / sqrt(n)`.
pub fn covariance(x: &[f64], y: &[f64]) -> Estimate {
    assert_eq!(x.len(), y.len());
    let (mx, my) = (mean(x), mean(y));
    let products: Vec<f64> = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).collect();
    let n = x.len() as f64;
    let estimate = compensated_sum(products.iter().copied()) / (n - 1.0);
    Estimate { estimate, se: standard_error(&products) }
}
