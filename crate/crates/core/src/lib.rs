//! Transition densities of additive jump diffusions.
//!
//! The crate simulates `X_t = x + int sigma(X) dB + int b(X) ds + sum Y_i`
//! with compound Poisson jumps, evaluates the transition density through its
//! Poisson-weighted convolution series in the linear case, computes
//! Chernoff-type tail bounds from the cumulant exponent `Psi`, and calibrates
//! and checks two-sided density envelopes for Gaussian and Laplace jumps.

// `!(x > 0.0)` rejects NaN along with the values it names.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod curve;
pub mod envelope;
pub mod error;
pub mod estimate;
pub mod fft;
pub mod grid;
pub mod io;
pub mod laws;
pub mod model;
pub mod quadrature;
pub mod series;
pub mod simulate;
pub mod tail;

pub use error::{Error, Result};
pub use grid::{SampledDensity, UniformGrid};
pub use laws::{CustomLaw, JumpLaw, MvGaussian};
pub use model::{
    validate_model, validate_model_with_margin, Diffusion, Drift, GaussianHeatKernelParams, ModelSpec, ProbeMargin,
    ScalarProfile, ValidationReport,
};
pub use simulate::{empirical_tail, simulate_terminal, PathEnsemble, SimConfig, TailEstimate};
pub use curve::{Abscissa, DensityCurve, Method, SeriesTruncation};
pub use series::{linear_density, linear_density_multid, linear_density_on_grid, poisson_truncation, q_density, HeatKernel};
pub use tail::{density_upper_envelope, tail_bound, PsiFunction, ThetaSolver, UpperConstants};
pub use config::Config;
pub use envelope::{
    calibrate, check_containment, gaussian_envelope, gaussian_lower_series, gaussian_lower_series_multid, laplace_envelope,
    laplace_lower_bound, CalibrationRequest, ContainmentReport, EnvelopeConstants, EnvelopeKind, EnvelopeSet, Side,
};
pub use estimate::{histogram, kde, radial_histogram, Bandwidth, KdeConfig};
