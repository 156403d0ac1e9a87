//! Solver registry: stable names, configuration mapping, uniform dispatch.
//!
//! # Overview
//! Experiments refer to solvers by the labels below; the registry turns a
//! label plus the shared [`SolverSettings`] into a concrete call against
//! the core library and normalizes every outcome into a [`SolveOutput`]
//! (coefficients, binary support, iteration count, optional stability
//! verdict). Greedy and minimum-norm baselines report their support as the
//! nonzero indicator of the returned coefficients and have no stability
//! notion, which downstream rows render as `na`.
//!
//! Labels: `hard-optimal`, `hard-simple`, `soft`, `mp`, `omp`, `min-l2`.

use std::fmt;
use std::str::FromStr;

use ndarray::Array1;
use sparse_bht::baselines::{matching_pursuit, orthogonal_matching_pursuit, GreedyConfig};
use sparse_bht::bhta::{hard_bhta, soft_bhta, SolverConfig, SolverVariant, ThresholdStrategy};
use sparse_bht::linalg::norm2;
use sparse_bht::model::ProblemInstance;
use sparse_bht::operators::min_l2_solution;
use sparse_bht::Result;

/// A registered solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SolverName {
    HardOptimal,
    HardSimple,
    Soft,
    Mp,
    Omp,
    MinL2,
}

impl SolverName {
    pub const ALL: [SolverName; 6] = [
        SolverName::HardOptimal,
        SolverName::HardSimple,
        SolverName::Soft,
        SolverName::Mp,
        SolverName::Omp,
        SolverName::MinL2,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SolverName::HardOptimal => "hard-optimal",
            SolverName::HardSimple => "hard-simple",
            SolverName::Soft => "soft",
            SolverName::Mp => "mp",
            SolverName::Omp => "omp",
            SolverName::MinL2 => "min-l2",
        }
    }

    /// Whether this is one of the iterative hypothesis-test solvers (the
    /// family the alpha sweep varies).
    pub fn is_iterative(self) -> bool {
        matches!(
            self,
            SolverName::HardOptimal | SolverName::HardSimple | SolverName::Soft
        )
    }
}

impl fmt::Display for SolverName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SolverName {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        SolverName::ALL
            .into_iter()
            .find(|name| name.label() == s)
            .ok_or_else(|| {
                let known: Vec<&str> = SolverName::ALL.iter().map(|n| n.label()).collect();
                format!("unknown solver `{s}`; expected one of {}", known.join(", "))
            })
    }
}

/// Shared solver parameters, resolved from config/CLI once per run.
///
/// `assumed_snr_db` is the input SNR (in dB, amplitude convention) assumed
/// by the simple threshold schedule; `None` substitutes the live estimate.
/// `greedy_residual_rel` scales the observation norm into the greedy
/// solvers' absolute residual stopping tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    pub alpha: f64,
    pub max_iters: usize,
    pub assumed_snr_db: Option<f64>,
    pub per_coefficient: bool,
    pub th_stop_tol_factor: f64,
    pub soft_stop_tol: f64,
    pub p0: f64,
    pub sigma_e0_divisor: f64,
    pub greedy_max_atoms: usize,
    pub greedy_residual_rel: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let core = SolverConfig::<f64>::default();
        SolverSettings {
            alpha: core.alpha,
            max_iters: core.max_iters,
            assumed_snr_db: core.assumed_snr_ratio.map(|r| 20.0 * r.log10()),
            per_coefficient: core.per_coefficient,
            th_stop_tol_factor: core.th_stop_tol_factor,
            soft_stop_tol: core.soft_stop_tol,
            p0: core.p0,
            sigma_e0_divisor: core.sigma_e0_divisor,
            greedy_max_atoms: GreedyConfig::<f64>::default().max_atoms,
            greedy_residual_rel: 1e-6,
        }
    }
}

impl SolverSettings {
    /// The core solver configuration for one of the iterative variants.
    pub fn core_config(&self, name: SolverName) -> SolverConfig<f64> {
        let (strategy, variant) = match name {
            SolverName::HardOptimal => (ThresholdStrategy::OptimalThreshold, SolverVariant::Hard),
            SolverName::HardSimple => (ThresholdStrategy::SimpleThreshold, SolverVariant::Hard),
            SolverName::Soft => (ThresholdStrategy::OptimalThreshold, SolverVariant::Soft),
            other => panic!("{other} has no iterative solver configuration"),
        };
        SolverConfig {
            alpha: self.alpha,
            strategy,
            variant,
            per_coefficient: self.per_coefficient,
            assumed_snr_ratio: self.assumed_snr_db.map(|db| 10f64.powf(db / 20.0)),
            max_iters: self.max_iters,
            th_stop_tol_factor: self.th_stop_tol_factor,
            soft_stop_tol: self.soft_stop_tol,
            p0: self.p0,
            sigma_e0_divisor: self.sigma_e0_divisor,
            capture_coefficient_trace: false,
        }
    }

    /// The greedy baseline configuration for a given instance size.
    pub fn greedy_config(&self, instance: &ProblemInstance<f64>) -> GreedyConfig<f64> {
        GreedyConfig {
            max_atoms: self.greedy_max_atoms.min(instance.dictionary.m()),
            residual_tol: self.greedy_residual_rel * norm2(&instance.x),
        }
    }
}

/// Normalized outcome of any registered solver.
#[derive(Debug, Clone)]
pub struct SolveOutput {
    pub y_hat: Array1<f64>,
    /// Binary support decision (entries exactly 0 or 1).
    pub q_hat: Array1<f64>,
    pub iterations: usize,
    /// Stability verdict for solvers that evaluate the per-atom bound.
    pub stability: Option<bool>,
}

fn indicator(y: &Array1<f64>) -> Array1<f64> {
    y.mapv(|v| if v != 0.0 { 1.0 } else { 0.0 })
}

/// Runs one registered solver on one instance.
pub fn run_solver(
    name: SolverName,
    instance: &ProblemInstance<f64>,
    settings: &SolverSettings,
) -> Result<SolveOutput> {
    match name {
        SolverName::HardOptimal | SolverName::HardSimple => {
            let result = hard_bhta(instance, &settings.core_config(name))?;
            Ok(SolveOutput {
                q_hat: result.q_hat.clone(),
                iterations: result.iterations,
                stability: Some(result.stability_flag),
                y_hat: result.y_hat,
            })
        }
        SolverName::Soft => {
            let result = soft_bhta(instance, &settings.core_config(name))?;
            Ok(SolveOutput {
                q_hat: result.q_hat.clone(),
                iterations: result.iterations,
                stability: Some(result.stability_flag),
                y_hat: result.y_hat,
            })
        }
        SolverName::Mp => {
            let y_hat = matching_pursuit(instance, &settings.greedy_config(instance))?;
            Ok(SolveOutput {
                q_hat: indicator(&y_hat),
                iterations: 1,
                stability: None,
                y_hat,
            })
        }
        SolverName::Omp => {
            let y_hat =
                orthogonal_matching_pursuit(instance, &settings.greedy_config(instance))?;
            Ok(SolveOutput {
                q_hat: indicator(&y_hat),
                iterations: 1,
                stability: None,
                y_hat,
            })
        }
        SolverName::MinL2 => {
            let y_hat = min_l2_solution(&instance.dictionary, &instance.x)?;
            Ok(SolveOutput {
                q_hat: indicator(&y_hat),
                iterations: 1,
                stability: None,
                y_hat,
            })
        }
    }
}
