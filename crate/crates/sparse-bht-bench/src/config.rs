//! Layered run configuration: defaults, optional TOML file, CLI overrides.
//!
//! # Overview
//! A run resolves its [`Settings`] in three layers with later layers
//! winning: built-in defaults, then an optional TOML config file (flat
//! sections, see below), then command-line flags. The fully resolved
//! settings are written back as `config.resolved` into the output
//! directory of every run, so any artifact can be traced to the exact
//! configuration that produced it.
//!
//! Config file layout (all keys optional):
//!
//! ```toml
//! [run]       # seed, trials, threads, out
//! [problem]   # n, m, p, sigma_r, sigma_e, amplitude
//! [grids]     # snr_db, sparsity, alpha, timing_m
//! [solvers]   # list, alpha, max_iters, assumed_snr_db, per_coefficient,
//!             # th_stop_tol_factor, soft_stop_tol, p0, sigma_e0_divisor,
//!             # greedy_max_atoms, greedy_residual_rel
//! [diagnose]  # runs
//! [stability] # seeds, ensemble ("dct" | "uniform")
//! [codec]     # msg_len, codeword_len, blocks, snr_db, source
//! ```

use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::registry::{SolverName, SolverSettings};

/// Dictionary ensemble used by the stability subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ensemble {
    /// Random rows of a DCT basis under random column sign flips (the
    /// compressed-sensing style ensemble).
    Dct,
    /// Dense uniform entries, columns normalized.
    Uniform,
}

impl Ensemble {
    pub fn label(self) -> &'static str {
        match self {
            Ensemble::Dct => "dct",
            Ensemble::Uniform => "uniform",
        }
    }
}

impl FromStr for Ensemble {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dct" => Ok(Ensemble::Dct),
            "uniform" => Ok(Ensemble::Uniform),
            other => Err(format!("unknown ensemble `{other}`; expected dct or uniform")),
        }
    }
}

/// Settings specific to the codec experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct CodecSettings {
    pub msg_len: usize,
    pub codeword_len: usize,
    pub blocks: usize,
    /// Impulse-to-background input SNR in dB (amplitude convention).
    pub snr_db: f64,
    /// Optional raw little-endian `f64` sample file; its values are chunked
    /// into message blocks. Absent, messages are sampled uniformly.
    pub source: Option<PathBuf>,
}

impl Default for CodecSettings {
    fn default() -> Self {
        CodecSettings {
            msg_len: 128,
            codeword_len: 256,
            blocks: 100,
            snr_db: 60.0,
            source: None,
        }
    }
}

/// Fully resolved run settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub master_seed: u64,
    pub trials: usize,
    /// Worker threads for the sweep pool; `None` keeps the library default.
    pub threads: Option<usize>,
    pub out_dir: PathBuf,
    pub n: usize,
    pub m: usize,
    /// Prior inactivity probability for spiky-prior experiments.
    pub p: f64,
    pub sigma_r: f64,
    pub sigma_e: f64,
    /// Spike amplitude for fixed-support experiments.
    pub amplitude: f64,
    pub snr_grid_db: Vec<f64>,
    pub sparsity_grid: Vec<usize>,
    pub alpha_grid: Vec<f64>,
    pub timing_m_grid: Vec<usize>,
    pub solvers: Vec<SolverName>,
    pub solver: SolverSettings,
    pub diagnose_runs: usize,
    pub stability_seeds: u64,
    pub stability_ensemble: Ensemble,
    pub codec: CodecSettings,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            master_seed: 1,
            trials: 20,
            threads: None,
            out_dir: PathBuf::from("sbht-out"),
            n: 256,
            m: 512,
            p: 0.9,
            sigma_r: 1.0,
            sigma_e: 0.01,
            amplitude: 1.0,
            snr_grid_db: vec![10.0, 20.0, 30.0, 40.0, 50.0, 60.0],
            sparsity_grid: vec![26, 51, 77, 102, 128],
            alpha_grid: (80..=99).map(|i| i as f64 / 100.0).collect(),
            timing_m_grid: vec![64, 128, 256, 512],
            solvers: SolverName::ALL.to_vec(),
            solver: SolverSettings::default(),
            diagnose_runs: 100,
            stability_seeds: 5,
            stability_ensemble: Ensemble::Dct,
            codec: CodecSettings::default(),
        }
    }
}

impl Settings {
    /// The nominal input SNR implied by `sigma_r` and `sigma_e`, in dB
    /// (amplitude convention, `20 log10(sigma_r / sigma_e)`).
    pub fn input_snr_db(&self) -> f64 {
        20.0 * (self.sigma_r / self.sigma_e).log10()
    }

    /// Overlays values from a parsed config file.
    pub fn apply_file(&mut self, file: &FileConfig) -> anyhow::Result<()> {
        let run = &file.run;
        set(&mut self.master_seed, &run.seed);
        set(&mut self.trials, &run.trials);
        if run.threads.is_some() {
            self.threads = run.threads;
        }
        if let Some(out) = &run.out {
            self.out_dir = PathBuf::from(out);
        }

        let problem = &file.problem;
        set(&mut self.n, &problem.n);
        set(&mut self.m, &problem.m);
        set(&mut self.p, &problem.p);
        set(&mut self.sigma_r, &problem.sigma_r);
        set(&mut self.sigma_e, &problem.sigma_e);
        set(&mut self.amplitude, &problem.amplitude);

        let grids = &file.grids;
        set_vec(&mut self.snr_grid_db, &grids.snr_db);
        set_vec(&mut self.sparsity_grid, &grids.sparsity);
        set_vec(&mut self.alpha_grid, &grids.alpha);
        set_vec(&mut self.timing_m_grid, &grids.timing_m);

        let solvers = &file.solvers;
        if let Some(list) = &solvers.list {
            let mut parsed = Vec::with_capacity(list.len());
            for label in list {
                parsed.push(SolverName::from_str(label).map_err(anyhow::Error::msg)?);
            }
            self.solvers = parsed;
        }
        set(&mut self.solver.alpha, &solvers.alpha);
        set(&mut self.solver.max_iters, &solvers.max_iters);
        if solvers.assumed_snr_db.is_some() {
            self.solver.assumed_snr_db = solvers.assumed_snr_db;
        }
        set(&mut self.solver.per_coefficient, &solvers.per_coefficient);
        set(&mut self.solver.th_stop_tol_factor, &solvers.th_stop_tol_factor);
        set(&mut self.solver.soft_stop_tol, &solvers.soft_stop_tol);
        set(&mut self.solver.p0, &solvers.p0);
        set(&mut self.solver.sigma_e0_divisor, &solvers.sigma_e0_divisor);
        set(&mut self.solver.greedy_max_atoms, &solvers.greedy_max_atoms);
        set(&mut self.solver.greedy_residual_rel, &solvers.greedy_residual_rel);

        set(&mut self.diagnose_runs, &file.diagnose.runs);
        set(&mut self.stability_seeds, &file.stability.seeds);
        set(&mut self.stability_ensemble, &file.stability.ensemble);

        let codec = &file.codec;
        set(&mut self.codec.msg_len, &codec.msg_len);
        set(&mut self.codec.codeword_len, &codec.codeword_len);
        set(&mut self.codec.blocks, &codec.blocks);
        set(&mut self.codec.snr_db, &codec.snr_db);
        if let Some(source) = &codec.source {
            self.codec.source = Some(PathBuf::from(source));
        }
        Ok(())
    }

    /// Cheap structural checks before dispatching an experiment.
    pub fn validate(&self) -> anyhow::Result<()> {
        anyhow::ensure!(self.trials >= 1, "trials must be at least 1");
        anyhow::ensure!(!self.solvers.is_empty(), "solver list must not be empty");
        anyhow::ensure!(self.n >= 1 && self.m >= self.n, "need 1 <= n <= m");
        anyhow::ensure!(self.p > 0.0 && self.p < 1.0, "p must lie in (0, 1)");
        anyhow::ensure!(self.sigma_r > 0.0, "sigma_r must be positive");
        anyhow::ensure!(self.sigma_e >= 0.0, "sigma_e must be nonnegative");
        anyhow::ensure!(self.amplitude != 0.0, "amplitude must be nonzero");
        anyhow::ensure!(
            self.codec.msg_len < self.codec.codeword_len,
            "codec msg_len must be smaller than codeword_len"
        );
        Ok(())
    }

    /// The settings as a fully populated config-file structure.
    pub fn resolved_file_config(&self) -> FileConfig {
        FileConfig {
            run: RunSection {
                seed: Some(self.master_seed),
                trials: Some(self.trials),
                threads: self.threads,
                out: Some(self.out_dir.to_string_lossy().into_owned()),
            },
            problem: ProblemSection {
                n: Some(self.n),
                m: Some(self.m),
                p: Some(self.p),
                sigma_r: Some(self.sigma_r),
                sigma_e: Some(self.sigma_e),
                amplitude: Some(self.amplitude),
            },
            grids: GridsSection {
                snr_db: Some(self.snr_grid_db.clone()),
                sparsity: Some(self.sparsity_grid.clone()),
                alpha: Some(self.alpha_grid.clone()),
                timing_m: Some(self.timing_m_grid.clone()),
            },
            solvers: SolversSection {
                list: Some(self.solvers.iter().map(|s| s.label().to_string()).collect()),
                alpha: Some(self.solver.alpha),
                max_iters: Some(self.solver.max_iters),
                assumed_snr_db: self.solver.assumed_snr_db,
                per_coefficient: Some(self.solver.per_coefficient),
                th_stop_tol_factor: Some(self.solver.th_stop_tol_factor),
                soft_stop_tol: Some(self.solver.soft_stop_tol),
                p0: Some(self.solver.p0),
                sigma_e0_divisor: Some(self.solver.sigma_e0_divisor),
                greedy_max_atoms: Some(self.solver.greedy_max_atoms),
                greedy_residual_rel: Some(self.solver.greedy_residual_rel),
            },
            diagnose: DiagnoseSection {
                runs: Some(self.diagnose_runs),
            },
            stability: StabilitySection {
                seeds: Some(self.stability_seeds),
                ensemble: Some(self.stability_ensemble),
            },
            codec: CodecSection {
                msg_len: Some(self.codec.msg_len),
                codeword_len: Some(self.codec.codeword_len),
                blocks: Some(self.codec.blocks),
                snr_db: Some(self.codec.snr_db),
                source: self
                    .codec
                    .source
                    .as_ref()
                    .map(|p| p.to_string_lossy().into_owned()),
            },
        }
    }

    /// TOML rendering of the resolved settings (`config.resolved`).
    pub fn resolved_toml(&self) -> String {
        toml::to_string_pretty(&self.resolved_file_config())
            .expect("resolved settings always serialize")
    }
}

fn set<T: Clone>(target: &mut T, source: &Option<T>) {
    if let Some(value) = source {
        *target = value.clone();
    }
}

fn set_vec<T: Clone>(target: &mut Vec<T>, source: &Option<Vec<T>>) {
    if let Some(values) = source {
        *target = values.clone();
    }
}

/// The on-disk config file: every key optional, unknown keys rejected.
#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub run: RunSection,
    pub problem: ProblemSection,
    pub grids: GridsSection,
    pub solvers: SolversSection,
    pub diagnose: DiagnoseSection,
    pub stability: StabilitySection,
    pub codec: CodecSection,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_e: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridsSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sparsity: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing_m: Option<Vec<usize>>,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolversSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub list: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub assumed_snr_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_coefficient: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub th_stop_tol_factor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub soft_stop_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_e0_divisor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub greedy_max_atoms: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub greedy_residual_rel: Option<f64>,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnoseSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runs: Option<usize>,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilitySection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<Ensemble>,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodecSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub msg_len: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub codeword_len: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blocks: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}
