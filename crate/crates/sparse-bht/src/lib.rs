//! Sparse recovery for underdetermined noisy linear systems by iterative
//! Bayesian hypothesis testing.
//!
//! # Overview
//! The observation model is `x = phi * y + e`: an `n x m` dictionary `phi`
//! with unit-norm columns (`n <= m`), a sparse coefficient vector `y` whose
//! entries are independently inactive with probability `p` and Gaussian
//! with deviation `sigma_r` otherwise, and white Gaussian noise `e`. The
//! solvers in [`bhta`] recover `y` by alternating a per-atom activity test
//! on corrected correlations with a regularized amplitude re-fit, while
//! re-estimating the model parameters from the running iterate.
//!
//! Module map:
//! - [`model`]: priors, dictionaries, instance synthesis, serialization.
//! - [`operators`]: correlations, minimum-norm solutions, the regularized
//!   amplitude estimator.
//! - [`bhta`]: the Hard and Soft solvers, threshold laws, stability
//!   analysis.
//! - [`baselines`]: matching pursuit, orthogonal matching pursuit, and an
//!   exhaustive support oracle for verification.
//! - [`metrics`]: SNR metrics, support scoring, Monte Carlo model
//!   diagnostics.
//! - [`codec`]: a real-field block code whose decoder is sparse recovery
//!   through the parity-check matrix.
//! - [`linalg`], [`seeding`]: supporting numerics and deterministic seed
//!   derivation.
//!
//! Everything is generic over the scalar type through [`Scalar`]
//! (implemented for `f32` and `f64`); the `*64` aliases at the crate root
//! fix the common concrete choice.
//!
//! # Example
//! ```
//! use sparse_bht::bhta::{hard_bhta, SolverConfig};
//! use sparse_bht::metrics::output_snr;
//! use sparse_bht::model::{sample_dictionary, sample_spiky, synthesize, SpikyPrior};
//!
//! let dict = sample_dictionary::<f64>(64, 128, 11).unwrap();
//! let prior = SpikyPrior::new(0.9, 1.0).unwrap();
//! let (y, _, _) = sample_spiky(&prior, 128, 12).unwrap();
//! let inst = synthesize(dict, &y, 1e-2, 13).unwrap();
//!
//! let result = hard_bhta(&inst, &SolverConfig::default()).unwrap();
//! let snr = output_snr(&y, &result.y_hat).unwrap();
//! assert!(snr > 5.0);
//! ```

pub mod baselines;
pub mod bhta;
pub mod codec;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod operators;
pub mod scalar;
pub mod seeding;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double-precision aliases for the common concrete instantiation.
pub type Dictionary64 = model::Dictionary<f64>;
pub type SpikyPrior64 = model::SpikyPrior<f64>;
pub type ProblemInstance64 = model::ProblemInstance<f64>;
pub type GroundTruth64 = model::GroundTruth<f64>;
pub type SolverConfig64 = bhta::SolverConfig<f64>;
pub type SolverResult64 = bhta::SolverResult<f64>;
pub type ParameterEstimates64 = bhta::ParameterEstimates<f64>;
pub type StabilityReport64 = bhta::StabilityReport<f64>;
pub type GreedyConfig64 = baselines::GreedyConfig<f64>;
pub type DiagnosticTrace64 = metrics::DiagnosticTrace<f64>;
pub type CodeSpec64 = codec::CodeSpec<f64>;
