//! Numerical laboratory for occupation times of fractional Brownian motion at
//! the critical Hurst index `H = 1/d`.
//!
//! The crate is organised bottom-up:
//!
//! * [`fbm`] samples d-dimensional fBm exactly, by circulant embedding and by a
//!   Cholesky oracle.
//! * [`functions`] holds the mean-zero test functions with closed-form Fourier
//!   transforms.
//! * [`constants`] evaluates the limit constant `C_{f,d}`, the logarithmic
//!   energy bracket and the Gamma identity by quadrature.
//! * [`occupation`] realizes the normalized occupation functional
//!   `n^{-1/2} ∫_0^{e^{nt}} f(B^H(s)) ds`.
//! * [`limitlab`] runs Monte Carlo batches against the Laplace-mixture and
//!   exponential limit laws, and simulates `ℓ(M^{-1}(t))`.
//! * [`checks`] sweeps the covariance inequalities deterministically.

pub mod checks;
pub mod constants;
pub mod error;
pub mod fbm;
pub mod functions;
pub mod limitlab;
pub mod occupation;
pub mod quad;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
