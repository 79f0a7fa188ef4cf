//! Limit constants and the analytic identities around them.
//!
//! `C_{f,d}² = dΓ(d/2) / (π^{d/2} (2π)^d) ∫ |f̂(x)|² |x|^{-d} dx`. For radial `f`
//! the angular integral contributes `2π^{d/2}/Γ(d/2)`, leaving
//! `2d/(2π)^d ∫_0^∞ |f̂(r)|² dr/r`, which is integrated in `s = ln r`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::functions::{FunctionKind, TestFunction};
use crate::quad::{integrate, QuadOptions};
use crate::{Error, Result};

/// Bound on each truncated tail of the radial integral.
const TAIL_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitConstant {
    pub c_fd: f64,
    pub c_fd_squared: f64,
    pub quadrature_error_estimate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub value: f64,
    pub quadrature_error_estimate: f64,
}

/// `2d / (2π)^d`, the radial prefactor of `C_{f,d}²`.
fn radial_prefactor(d: usize) -> f64 {
    let d = d as f64;
    let surface = 2.0 * PI.powf(d / 2.0) / libm::tgamma(d / 2.0);
    d * libm::tgamma(d / 2.0) / (PI.powf(d / 2.0) * (2.0 * PI).powf(d)) * surface
}

/// `∫_0^∞ |f̂(r)|² dr/r` with an error estimate including the truncated tails.
fn radial_fourier_integral(f: &TestFunction, opts: QuadOptions) -> Result<(f64, f64)> {
    let at_origin = f.fourier_radial(0.0);
    if at_origin != 0.0 {
        return Err(Error::DivergentIntegral { value: at_origin });
    }
    if f.is_zero() {
        return Ok((0.0, 0.0));
    }
    let (c, p) = f.fourier_origin_bound().ok_or(Error::DivergentIntegral { value: f.mass() })?;
    let (a, kappa) = f.fourier_tail_envelope().ok_or(Error::DivergentIntegral { value: f.mass() })?;
    // ∫_0^{r0} c² r^{2p-1} dr = c² r0^{2p} / (2p)
    let r_lo = (2.0 * p * TAIL_TOL / (c * c)).powf(0.5 / p);
    // ∫_R^∞ A² e^{-2κr²} dr/r <= A² e^{-2κR²} / (4κR²)
    let upper_tail = |r: f64| a * a * (-2.0 * kappa * r * r).exp() / (4.0 * kappa * r * r);
    let mut r_hi = 1.0_f64.max(r_lo * 2.0);
    while upper_tail(r_hi) > TAIL_TOL {
        r_hi *= 1.25;
    }
    let integrand = |s: f64| {
        let v = f.fourier_radial(s.exp());
        v * v
    };
    let q = integrate(integrand, r_lo.ln(), r_hi.ln(), opts)?;
    let lower_tail = c * c * r_lo.powf(2.0 * p) / (2.0 * p);
    Ok((q.value, q.error + lower_tail + upper_tail(r_hi)))
}

pub fn c_fd(f: &TestFunction) -> Result<LimitConstant> {
    c_fd_with(f, QuadOptions::default())
}

/// [`c_fd`] with explicit quadrature tolerances.
///
/// The integral is evaluated for the unit-amplitude profile and rescaled, so
/// `C_{λf,d} = |λ| C_{f,d}` holds in floating point.
pub fn c_fd_with(f: &TestFunction, opts: QuadOptions) -> Result<LimitConstant> {
    if f.is_zero() {
        return Ok(LimitConstant { c_fd: 0.0, c_fd_squared: 0.0, quadrature_error_estimate: 0.0 });
    }
    let unit = TestFunction { amplitude: 1.0, ..*f };
    let (integral, error) = radial_fourier_integral(&unit, opts)?;
    let pre = radial_prefactor(f.dim);
    let unit_sq = (pre * integral).max(0.0);
    let amp = f.amplitude.abs();
    Ok(LimitConstant {
        c_fd: amp * unit_sq.sqrt(),
        c_fd_squared: amp * amp * unit_sq,
        quadrature_error_estimate: amp * amp * pre * error,
    })
}

/// `⟨f⟩ = -(4/π) ∫∫ f(x) f(y) log|x - y| dx dy` on `R²`.
///
/// For radial `f` the mean of `log|x - y|` over both angles is
/// `log max(|x|, |y|)`, so with `g` the radial profile and
/// `G(r) = ∫_0^r g(u) u du`,
/// `⟨f⟩ = -(4/π)(2π)² · 2 ∫_0^∞ g(r) r log(r) G(r) dr`.
/// Both integrals are done by adaptive quadrature in `x`-space, independently
/// of the Fourier route used by [`c_fd`].
pub fn bracket(f: &TestFunction) -> Result<Bracket> {
    if f.dim != 2 {
        return Err(Error::UnsupportedDimension(f.dim));
    }
    if f.is_zero() {
        return Ok(Bracket { value: 0.0, quadrature_error_estimate: 0.0 });
    }
    if !matches!(f.kind, FunctionKind::GaussianDifference { .. }) {
        return Err(Error::DivergentIntegral { value: f.mass() });
    }
    let g = |r: f64| f.eval_radius_sq(r * r);
    let r_max = f.effective_radius(1e-17 * f.sup_bound());
    let inner_opts = QuadOptions::with_tolerance(1e-12 * f.sup_bound(), 1e-12);
    let inner_err = std::cell::Cell::new(0.0_f64);
    let inner_fail = std::cell::Cell::new(None);
    let cumulative = |r: f64| match integrate(|u| g(u) * u, 0.0, r, inner_opts) {
        Ok(q) => {
            inner_err.set(inner_err.get().max(q.error));
            q.value
        }
        Err(e) => {
            inner_fail.set(Some(e));
            0.0
        }
    };
    let outer = |r: f64| if r == 0.0 { 0.0 } else { g(r) * r * r.ln() * cumulative(r) };
    let opts = QuadOptions::with_tolerance(1e-12 * f.sup_bound().powi(2), 1e-10);
    // split at r = 1 where the log changes sign
    let mut total = 0.0;
    let mut error = 0.0;
    for (lo, hi) in [(0.0, 1.0_f64.min(r_max)), (1.0_f64.min(r_max), r_max)] {
        let q = integrate(outer, lo, hi, opts)?;
        total += q.value;
        error += q.error;
    }
    if let Some(e) = inner_fail.take() {
        return Err(e);
    }
    let weight = integrate(|r: f64| (g(r) * r * r.ln()).abs(), 0.0, r_max, QuadOptions::with_tolerance(1e-12, 1e-6))?;
    let scale = 4.0 / PI * (2.0 * PI).powi(2) * 2.0;
    Ok(Bracket {
        value: -scale * total,
        quadrature_error_estimate: scale * (error + inner_err.get() * weight.value),
    })
}

/// `|LHS - RHS| / max(LHS, ε)` for the identity
/// `(2/(π(2π)²)) ∫ |f̂|² |x|^{-2} dx = ⟨f⟩` in `d = 2`.
///
/// The left side equals `C_{f,2}²`.
pub fn norm1_residual(f: &TestFunction) -> Result<f64> {
    if f.dim != 2 {
        return Err(Error::UnsupportedDimension(f.dim));
    }
    let lhs = c_fd(f)?.c_fd_squared;
    let rhs = bracket(f)?.value;
    Ok((lhs - rhs).abs() / lhs.max(f64::MIN_POSITIVE))
}

/// `|LHS - RHS|` for `(2/(2π)^{d/2}) ∫_0^∞ e^{-u^{2/d}/2} du = dΓ(d/2)/π^{d/2}`.
pub fn gamma_identity_check(d: usize) -> Result<f64> {
    if d == 0 {
        return Err(crate::error::domain("dimension must be positive"));
    }
    let df = d as f64;
    // u = e^s; below s = -40 the integrand contributes at most e^{-40}
    let integrand = |s: f64| (s - 0.5 * (2.0 * s / df).exp()).exp();
    let s_lo = -40.0;
    let mut s_hi = 0.0;
    while 0.5 * (2.0 * s_hi / df).exp() - s_hi < 50.0 {
        s_hi += 1.0;
    }
    let q = integrate(integrand, s_lo, s_hi, QuadOptions::with_tolerance(1e-15, 1e-13))?;
    let lhs = 2.0 / (2.0 * PI).powf(df / 2.0) * q.value;
    let rhs = df * libm::tgamma(df / 2.0) / PI.powf(df / 2.0);
    Ok((lhs - rhs).abs())
}

/// Residuals of [`gamma_identity_check`] for `d = 1..=max_dim`.
pub fn gamma_residuals(max_dim: usize) -> Result<Vec<f64>> {
    (1..=max_dim).map(gamma_identity_check).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `∫_0^∞ (e^{-a r²} - e^{-b r²})² dr/r = ½ ln((a+b)²/(4ab))`
    fn gauss_pair_integral(a: f64, b: f64) -> f64 {
        0.5 * ((a + b) * (a + b) / (4.0 * a * b)).ln()
    }

    /// C² for the Gaussian difference from the closed form above:
    /// f̂ = (2π)^{d/2}(e^{-r²/2} - e^{-σ²r²/2}), prefactor 2d/(2π)^d.
    fn closed_form(d: usize, sigma: f64) -> f64 {
        2.0 * d as f64 * gauss_pair_integral(0.5, 0.5 * sigma * sigma)
    }

    #[test]
    fn prefactor_reduces_to_two_d_over_two_pi_to_the_d() {
        for d in 1..=6 {
            let expected = 2.0 * d as f64 / (2.0 * PI).powi(d as i32);
            assert!((radial_prefactor(d) - expected).abs() < 1e-14 * expected);
        }
    }

    #[test]
    fn gaussian_difference_matches_closed_form() {
        for d in 1..=6 {
            for sigma in [1.5, 2.0, 4.0, 0.5] {
                let f = TestFunction::gaussian_difference(d, sigma).unwrap();
                let c = c_fd(&f).unwrap();
                let exact = closed_form(d, sigma);
                assert!((c.c_fd_squared - exact).abs() < 1e-10, "d={d} σ={sigma}: {c:?} vs {exact}");
                assert!((c.c_fd - c.c_fd_squared.sqrt()).abs() < 1e-15);
                assert!(c.quadrature_error_estimate >= 0.0);
            }
        }
        let f = TestFunction::gaussian_difference(2, 2.0).unwrap();
        assert!((c_fd(&f).unwrap().c_fd_squared - 0.892_574).abs() < 1e-6);
    }

    #[test]
    fn closed_form_oracle_matches_logarithm() {
        for sigma in [1.5f64, 2.0, 4.0] {
            let direct = 4.0 * ((1.0 + sigma * sigma) / (2.0 * sigma)).ln();
            assert!((closed_form(2, sigma) - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_function_has_zero_constant() {
        let c = c_fd(&TestFunction::zero(2).unwrap()).unwrap();
        assert_eq!(c.c_fd, 0.0);
        assert_eq!(bracket(&TestFunction::zero(2).unwrap()).unwrap().value, 0.0);
        assert_eq!(norm1_residual(&TestFunction::zero(2).unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn constant_shrinks_as_sigma_approaches_one() {
        let mut prev = f64::INFINITY;
        for sigma in [2.0, 1.5, 1.1, 1.01, 1.001] {
            let c = c_fd(&TestFunction::gaussian_difference(2, sigma).unwrap()).unwrap().c_fd_squared;
            assert!(c < prev);
            prev = c;
        }
        assert!(prev < 1e-5);
    }

    #[test]
    fn non_mean_zero_diverges() {
        for f in [TestFunction::plain_gaussian(2).unwrap(), TestFunction::constant(2, 1.0).unwrap()] {
            assert!(matches!(c_fd(&f), Err(Error::DivergentIntegral { .. })));
        }
    }

    #[test]
    fn scaling_is_exact() {
        let f = TestFunction::gaussian_difference(3, 2.0).unwrap();
        let base = c_fd(&f).unwrap();
        for lambda in [-2.0, 0.5] {
            let scaled = c_fd(&f.scaled(lambda)).unwrap();
            assert_eq!(scaled.c_fd, lambda.abs() * base.c_fd);
            assert_eq!(scaled.c_fd_squared, lambda * lambda * base.c_fd_squared);
        }
    }

    #[test]
    fn refinement_stays_within_error_estimate() {
        for d in [1, 2, 3, 5] {
            let f = TestFunction::gaussian_difference(d, 2.0).unwrap();
            let coarse = c_fd_with(&f, QuadOptions::with_tolerance(1e-10, 1e-8)).unwrap();
            let fine = c_fd_with(&f, QuadOptions::with_tolerance(0.5e-10, 0.5e-8)).unwrap();
            assert!((coarse.c_fd_squared - fine.c_fd_squared).abs() <= coarse.quadrature_error_estimate);
        }
    }

    #[test]
    fn bracket_requires_two_dimensions() {
        let f = TestFunction::gaussian_difference(3, 2.0).unwrap();
        assert!(matches!(bracket(&f), Err(Error::UnsupportedDimension(3))));
        assert!(matches!(norm1_residual(&f), Err(Error::UnsupportedDimension(3))));
    }

    #[test]
    fn bracket_is_quadratic() {
        let f = TestFunction::gaussian_difference(2, 2.0).unwrap();
        let b1 = bracket(&f).unwrap().value;
        let b2 = bracket(&f.scaled(2.0)).unwrap().value;
        assert!((b2 - 4.0 * b1).abs() < 1e-9 * b1.abs());
        assert!(b1 > 0.0);
    }

    #[test]
    fn bracket_matches_closed_form_cumulative_mass() {
        // G(r) = e^{-r²/(2σ²)} - e^{-r²/2} for the Gaussian difference in d = 2
        let sigma: f64 = 2.0;
        let f = TestFunction::gaussian_difference(2, sigma).unwrap();
        let outer = |r: f64| {
            if r == 0.0 {
                return 0.0;
            }
            let g = f.eval_radius_sq(r * r);
            let big_g = (-r * r / (2.0 * sigma * sigma)).exp() - (-r * r / 2.0).exp();
            g * r * r.ln() * big_g
        };
        let opts = QuadOptions::with_tolerance(1e-15, 1e-12);
        let q = integrate(outer, 0.0, 1.0, opts).unwrap().value + integrate(outer, 1.0, 40.0, opts).unwrap().value;
        let oracle = -(4.0 / PI) * (2.0 * PI).powi(2) * 2.0 * q;
        let b = bracket(&f).unwrap();
        assert!((b.value - oracle).abs() < 1e-8, "{b:?} vs {oracle}");
    }

    #[test]
    fn bracket_is_four_pi_times_c_squared() {
        // Plancherel with the 2-D kernel: -∫∫ f f log|x-y| = (2π)^{-1} ∫ |f̂|² |ξ|^{-2} dξ
        for sigma in [1.5, 2.0, 4.0] {
            let f = TestFunction::gaussian_difference(2, sigma).unwrap();
            let ratio = bracket(&f).unwrap().value / c_fd(&f).unwrap().c_fd_squared;
            assert!((ratio - 4.0 * PI).abs() < 1e-8, "σ={sigma}: {ratio}");
        }
    }

    #[test]
    fn gamma_identity_holds() {
        assert!(gamma_identity_check(2).unwrap() <= 1e-12);
        for d in 1..=6 {
            let r = gamma_identity_check(d).unwrap();
            assert!(r <= 1e-10, "d={d}: {r}");
        }
        assert_eq!(gamma_residuals(6).unwrap().len(), 6);
        assert!(gamma_identity_check(0).is_err());
    }
}
