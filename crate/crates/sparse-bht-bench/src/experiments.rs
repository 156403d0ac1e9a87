//! Experiment drivers behind the `sbht` subcommands.
//!
//! # Overview
//! Each driver turns resolved [`Settings`] into an [`ExperimentOutput`]:
//! result rows, aggregated summaries, plot-data stems, and any extra
//! artifact files. Writing to disk happens in one place (the binary), so
//! the drivers stay directly callable from tests.
//!
//! Sweeps follow the paired design: per (grid point, trial) one instance is
//! sampled through the seed chain in [`crate::seed`] and every configured
//! solver runs on that same instance; rows record the instance hash so the
//! pairing is auditable. Trials and grid points execute on a work pool;
//! solvers within a trial run sequentially on the shared instance. Rows are
//! sorted before writing and summaries are reduced from the sorted rows,
//! which makes every artifact except the `wall_ms` column independent of
//! scheduling.
//!
//! Grid conventions:
//! - input-SNR sweep: grid in dB, `sigma_e = sigma_r * 10^(-snr/20)`,
//!   spiky prior, `p_or_k` holds `p`.
//! - sparsity sweep: grid in support size `k`, fixed-amplitude spikes,
//!   `p_or_k` holds `k`; the iterative solvers start from
//!   `p0 = 1 - k/m` and the greedy budget is `min(2k, n)`.
//! - alpha sweep: grid in the decay factor, iterative solvers only,
//!   instances paired by trial across the whole grid, `p_or_k` holds
//!   `alpha`; out-of-domain grid values (for example 1.0) surface as
//!   `invalid: alpha` rows.
//! - timing sweep: grid in `m` with `n = m/2`; wall-clock aggregates land
//!   in `plotdata/timing_wall_*.csv`.

use std::cell::RefCell;
use std::fmt::Write as _;
use std::fs::File;
use std::path::Path;
use std::time::Instant;

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use sparse_bht::bhta::stability_check;
use sparse_bht::codec::{corrupt, decode_with_dictionary, decoder_dictionary, encode, make_code};
use sparse_bht::error::Error;
use sparse_bht::metrics::{assumption_diagnostics, output_snr, support_report};
use sparse_bht::model::{
    instance_bytes, read_instance, sample_dct_cs_dictionary, sample_dictionary,
    sample_fixed_support, sample_spiky, synthesize, write_instance, ProblemInstance, SpikyPrior,
};

use crate::config::{Ensemble, Settings};
use crate::registry::{run_solver, SolveOutput, SolverName, SolverSettings};
use crate::rows::{
    fmt_f64, plotdata_files, sanitize_status, summarize, ResultRow, SummaryRow,
};
use crate::seed::{fnv1a64, instance_seed, stream_seeds, ExperimentId};

/// Everything a subcommand produces; the binary decides where it lands.
#[derive(Debug, Default)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub summaries: Vec<SummaryRow>,
    /// Stem for `plotdata/<stem>_<solver>.csv` files derived from the
    /// summaries; `None` suppresses plot data.
    pub plot_stem: Option<&'static str>,
    /// Additional artifacts as (relative path, contents).
    pub extra_files: Vec<(String, Vec<u8>)>,
    /// Human-readable text printed to stdout.
    pub report: Option<String>,
}

/// Identifying columns shared by every row of one solved instance.
struct RowMeta {
    experiment: ExperimentId,
    n: usize,
    m: usize,
    p_or_k: f64,
    sigma_e: f64,
    snr_in_db: f64,
    seed: u64,
    hash: u64,
}

/// Samples a spiky-prior instance from the three derived streams and
/// fingerprints its bytes.
fn spiky_instance(
    n: usize,
    m: usize,
    p: f64,
    sigma_r: f64,
    sigma_e: f64,
    s3: u64,
) -> sparse_bht::Result<(ProblemInstance<f64>, u64)> {
    let streams = stream_seeds(s3);
    let dict = sample_dictionary(n, m, streams.dictionary)?;
    let prior = SpikyPrior::new(p, sigma_r)?;
    let (y, _, _) = sample_spiky(&prior, m, streams.coefficients)?;
    let inst = synthesize(dict, &y, sigma_e, streams.noise)?;
    let hash = fnv1a64(&instance_bytes(&inst));
    Ok((inst, hash))
}

/// Samples a fixed-amplitude instance with exactly `k` active entries.
fn fixed_support_instance(
    n: usize,
    m: usize,
    k: usize,
    amplitude: f64,
    sigma_e: f64,
    s3: u64,
) -> sparse_bht::Result<(ProblemInstance<f64>, u64)> {
    let streams = stream_seeds(s3);
    let dict = sample_dictionary(n, m, streams.dictionary)?;
    let (y, _) = sample_fixed_support(m, k, amplitude, streams.coefficients)?;
    let inst = synthesize(dict, &y, sigma_e, streams.noise)?;
    let hash = fnv1a64(&instance_bytes(&inst));
    Ok((inst, hash))
}

/// Turns one solver outcome into a row; errors are recorded in-row and
/// never abort a sweep.
fn row_from_outcome(
    meta: &RowMeta,
    solver: SolverName,
    inst: &ProblemInstance<f64>,
    outcome: sparse_bht::Result<SolveOutput>,
    wall_ms: f64,
) -> ResultRow {
    let mut row = ResultRow {
        experiment: meta.experiment,
        solver: solver.label().to_string(),
        n: meta.n,
        m: meta.m,
        p_or_k: meta.p_or_k,
        sigma_e: meta.sigma_e,
        snr_in_db: meta.snr_in_db,
        seed: meta.seed,
        instance_hash: meta.hash,
        status: "ok".to_string(),
        snr_out_db: f64::NAN,
        iterations: 0,
        wall_ms,
        tp: 0,
        fp: 0,
        fn_: 0,
        exact_support: false,
        stability_pass: None,
    };
    match outcome {
        Ok(output) => {
            row.iterations = output.iterations;
            row.stability_pass = output.stability;
            if let Some(truth) = &inst.truth {
                row.snr_out_db = output_snr(&truth.y, &output.y_hat).unwrap_or(f64::NAN);
                if let Ok(report) = support_report(&truth.q, &output.q_hat) {
                    row.tp = report.true_positives;
                    row.fp = report.false_positives;
                    row.fn_ = report.false_negatives;
                    row.exact_support = report.exact_recovery;
                }
            }
        }
        Err(Error::InvalidParameter { name, .. }) => {
            row.status = format!("invalid: {name}");
        }
        Err(e) => {
            row.status = format!("error: {}", sanitize_status(&e.to_string()));
        }
    }
    row
}

/// Times and runs one solver on one instance.
fn run_one(
    meta: &RowMeta,
    solver: SolverName,
    inst: &ProblemInstance<f64>,
    settings: &SolverSettings,
) -> ResultRow {
    let started = Instant::now();
    let outcome = run_solver(solver, inst, settings);
    let wall_ms = started.elapsed().as_secs_f64() * 1e3;
    row_from_outcome(meta, solver, inst, outcome, wall_ms)
}

/// Runs `per_job` over the (grid point, trial) product on the work pool and
/// flattens the produced rows. Instance-construction failures abort; solver
/// failures are expected to be recorded in-row by the closure.
fn pooled_rows<G, F>(
    settings: &Settings,
    experiment: ExperimentId,
    grid: &[G],
    per_job: F,
) -> anyhow::Result<Vec<ResultRow>>
where
    G: Sync,
    F: Fn(usize, &G, u64) -> anyhow::Result<Vec<ResultRow>> + Sync,
{
    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|g| (0..settings.trials).map(move |t| (g, t)))
        .collect();
    let nested: Vec<anyhow::Result<Vec<ResultRow>>> = jobs
        .par_iter()
        .map(|&(g, t)| {
            let s3 = instance_seed(settings.master_seed, experiment, g as u64, t as u64);
            per_job(g, &grid[g], s3)
        })
        .collect();
    let mut rows = Vec::new();
    for result in nested {
        rows.extend(result?);
    }
    Ok(rows)
}

/// Output SNR versus input SNR under the spiky prior.
pub fn sweep_snr(settings: &Settings) -> anyhow::Result<ExperimentOutput> {
    let grid = settings.snr_grid_db.clone();
    let rows = pooled_rows(settings, ExperimentId::SweepInputSnr, &grid, |_, &snr, s3| {
        let sigma_e = settings.sigma_r * 10f64.powf(-snr / 20.0);
        let (inst, hash) =
            spiky_instance(settings.n, settings.m, settings.p, settings.sigma_r, sigma_e, s3)?;
        let meta = RowMeta {
            experiment: ExperimentId::SweepInputSnr,
            n: settings.n,
            m: settings.m,
            p_or_k: settings.p,
            sigma_e,
            snr_in_db: snr,
            seed: s3,
            hash,
        };
        Ok(settings
            .solvers
            .iter()
            .map(|&solver| run_one(&meta, solver, &inst, &settings.solver))
            .collect())
    })?;
    let summaries = summarize(&rows, "snr_in_db", |r| r.snr_in_db);
    Ok(ExperimentOutput {
        rows,
        summaries,
        plot_stem: Some("sweep_snr"),
        ..Default::default()
    })
}

/// Output SNR versus support size with fixed-amplitude spikes.
pub fn sweep_sparsity(settings: &Settings) -> anyhow::Result<ExperimentOutput> {
    let grid = settings.sparsity_grid.clone();
    let snr_in_db = if settings.sigma_e > 0.0 {
        20.0 * (settings.amplitude.abs() / settings.sigma_e).log10()
    } else {
        f64::INFINITY
    };
    let rows = pooled_rows(settings, ExperimentId::SweepSparsity, &grid, |_, &k, s3| {
        let (inst, hash) = fixed_support_instance(
            settings.n,
            settings.m,
            k,
            settings.amplitude,
            settings.sigma_e,
            s3,
        )?;
        let meta = RowMeta {
            experiment: ExperimentId::SweepSparsity,
            n: settings.n,
            m: settings.m,
            p_or_k: k as f64,
            sigma_e: settings.sigma_e,
            snr_in_db,
            seed: s3,
            hash,
        };
        // The protocol knows k: iterative solvers start at the matching
        // inactivity probability and the greedy budget tracks 2k.
        let mut solver_settings = settings.solver.clone();
        let m = settings.m as f64;
        solver_settings.p0 = (1.0 - k as f64 / m).clamp(1.0 / m, 1.0 - 1.0 / m);
        solver_settings.greedy_max_atoms = (2 * k).clamp(1, settings.n);
        Ok(settings
            .solvers
            .iter()
            .map(|&solver| run_one(&meta, solver, &inst, &solver_settings))
            .collect())
    })?;
    let summaries = summarize(&rows, "k", |r| r.p_or_k);
    // Both normalized sparsity axes alongside the raw plot-data abscissa.
    let mut axis = String::from("k,k_over_n,k_over_m\n");
    for &k in &grid {
        let _ = writeln!(
            axis,
            "{k},{},{}",
            fmt_f64(k as f64 / settings.n as f64),
            fmt_f64(k as f64 / settings.m as f64)
        );
    }
    Ok(ExperimentOutput {
        rows,
        summaries,
        plot_stem: Some("sweep_sparsity"),
        extra_files: vec![("plotdata/sweep_sparsity_axis.csv".to_string(), axis.into_bytes())],
        ..Default::default()
    })
}

/// Output SNR versus the decay factor for the iterative solvers; instances
/// are paired by trial across the entire grid.
pub fn sweep_alpha(settings: &Settings) -> anyhow::Result<ExperimentOutput> {
    let solvers: Vec<SolverName> = settings
        .solvers
        .iter()
        .copied()
        .filter(|s| s.is_iterative())
        .collect();
    anyhow::ensure!(
        !solvers.is_empty(),
        "alpha sweep needs at least one iterative solver in the list"
    );
    let snr_in_db = settings.input_snr_db();

    // One instance per trial, shared across the whole alpha grid (grid
    // index 0 in the seed chain) so the sweep isolates the alpha effect.
    let built: Vec<sparse_bht::Result<(ProblemInstance<f64>, u64, u64)>> = (0..settings.trials)
        .into_par_iter()
        .map(|t| {
            let s3 = instance_seed(settings.master_seed, ExperimentId::SweepAlpha, 0, t as u64);
            let (inst, hash) = spiky_instance(
                settings.n,
                settings.m,
                settings.p,
                settings.sigma_r,
                settings.sigma_e,
                s3,
            )?;
            inst.dictionary.derived();
            Ok((inst, hash, s3))
        })
        .collect();
    let mut instances = Vec::with_capacity(settings.trials);
    for b in built {
        instances.push(b?);
    }

    let jobs: Vec<(usize, usize)> = (0..settings.alpha_grid.len())
        .flat_map(|g| (0..settings.trials).map(move |t| (g, t)))
        .collect();
    let rows: Vec<ResultRow> = jobs
        .par_iter()
        .flat_map_iter(|&(g, t)| {
            let alpha = settings.alpha_grid[g];
            let (inst, hash, s3) = &instances[t];
            let meta = RowMeta {
                experiment: ExperimentId::SweepAlpha,
                n: settings.n,
                m: settings.m,
                p_or_k: alpha,
                sigma_e: settings.sigma_e,
                snr_in_db,
                seed: *s3,
                hash: *hash,
            };
            let mut solver_settings = settings.solver.clone();
            solver_settings.alpha = alpha;
            solvers
                .iter()
                .map(move |&solver| run_one(&meta, solver, inst, &solver_settings))
                .collect::<Vec<ResultRow>>()
        })
        .collect();
    let summaries = summarize(&rows, "alpha", |r| r.p_or_k);
    Ok(ExperimentOutput {
        rows,
        summaries,
        plot_stem: Some("sweep_alpha"),
        ..Default::default()
    })
}

/// Monte Carlo check of the solver's per-iteration noise model; emits
/// `diagnose.csv` with one row per iteration.
pub fn diagnose(settings: &Settings) -> anyhow::Result<ExperimentOutput> {
    let s3 = instance_seed(settings.master_seed, ExperimentId::Diagnose, 0, 0);
    let streams = stream_seeds(s3);
    let dict = sample_dictionary(settings.n, settings.m, streams.dictionary)?;
    let prior = SpikyPrior::new(settings.p, settings.sigma_r)?;
    let config = settings.solver.core_config(SolverName::HardOptimal);
    let trace = assumption_diagnostics(
        &dict,
        &prior,
        settings.sigma_e,
        &config,
        settings.diagnose_runs,
        streams.noise,
    )?;
    let mut csv = String::from("iter,mean_error_term,mean_sigma_gamma_sq,kurtosis\n");
    for i in 0..trace.error_term.len() {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            i + 1,
            fmt_f64(trace.error_term[i]),
            fmt_f64(trace.mean_gamma_sq[i]),
            fmt_f64(trace.kurtosis[i])
        );
    }
    let report = format!(
        "diagnose: {} runs, {} iterations traced",
        settings.diagnose_runs,
        trace.error_term.len()
    );
    Ok(ExperimentOutput {
        extra_files: vec![("diagnose.csv".to_string(), csv.into_bytes())],
        report: Some(report),
        ..Default::default()
    })
}

/// Per-atom stability floors over freshly sampled dictionaries; emits
/// `stability.csv` with one row per dictionary seed.
pub fn stability(settings: &Settings) -> anyhow::Result<ExperimentOutput> {
    let snr_in_db = settings.input_snr_db();
    let mut csv = String::from(
        "seed_index,dict_seed,ensemble,n,m,p,snr_in_db,min_snr_min_db,max_snr_min_db,vacuous_atoms,all_pass,all_pass_strict\n",
    );
    let mut lines = Vec::new();
    for idx in 0..settings.stability_seeds {
        let s3 = instance_seed(settings.master_seed, ExperimentId::Stability, 0, idx);
        let dict_seed = stream_seeds(s3).dictionary;
        let dict = match settings.stability_ensemble {
            Ensemble::Dct => sample_dct_cs_dictionary(settings.n, settings.m, dict_seed)?,
            Ensemble::Uniform => sample_dictionary(settings.n, settings.m, dict_seed)?,
        };
        let report = stability_check(&dict, settings.p, snr_in_db)?;
        let min = report
            .atoms
            .iter()
            .filter_map(|a| a.snr_min_db)
            .fold(f64::INFINITY, f64::min);
        let min = if min.is_finite() { min } else { f64::NAN };
        let max = report.max_snr_min_db.unwrap_or(f64::NAN);
        let vacuous = report.atoms.iter().filter(|a| a.vacuous).count();
        let _ = writeln!(
            csv,
            "{idx},{dict_seed},{},{},{},{},{},{},{},{vacuous},{},{}",
            settings.stability_ensemble.label(),
            settings.n,
            settings.m,
            fmt_f64(settings.p),
            fmt_f64(snr_in_db),
            fmt_f64(min),
            fmt_f64(max),
            u8::from(report.all_pass),
            u8::from(report.all_pass_strict),
        );
        lines.push(format!(
            "seed {idx}: floors [{}, {}] dB, pass={}",
            fmt_f64(min),
            fmt_f64(max),
            u8::from(report.all_pass)
        ));
    }
    Ok(ExperimentOutput {
        extra_files: vec![("stability.csv".to_string(), csv.into_bytes())],
        report: Some(lines.join("\n")),
        ..Default::default()
    })
}

fn read_f64_le(path: &Path) -> anyhow::Result<Vec<f64>> {
    let bytes = std::fs::read(path)
        .map_err(|e| anyhow::anyhow!("reading sample source {}: {e}", path.display()))?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

/// Encode/corrupt/decode over a stream of message blocks; output SNR is
/// measured on the recovered messages.
pub fn codec_run(settings: &Settings) -> anyhow::Result<ExperimentOutput> {
    let c = &settings.codec;
    // Grid index 1 reserves a seed lane for the code itself; blocks use
    // grid index 0.
    let code_seed =
        stream_seeds(instance_seed(settings.master_seed, ExperimentId::Codec, 1, 0)).dictionary;
    let code = make_code::<f64>(c.msg_len, c.codeword_len, code_seed)?;
    let (dict, col_norms) = decoder_dictionary(&code)?;
    dict.derived();
    let prior = SpikyPrior::new(settings.p, settings.sigma_r)?;
    let sigma_v = settings.sigma_r * 10f64.powf(-c.snr_db / 20.0);

    let source: Option<Vec<f64>> = match &c.source {
        Some(path) => Some(read_f64_le(path)?),
        None => None,
    };
    let blocks = match &source {
        Some(samples) => {
            anyhow::ensure!(!samples.is_empty(), "sample source holds no f64 values");
            c.blocks.min(samples.len().div_ceil(c.msg_len))
        }
        None => c.blocks,
    };
    anyhow::ensure!(blocks >= 1, "codec needs at least one block");

    let nested: Vec<anyhow::Result<Vec<ResultRow>>> = (0..blocks)
        .into_par_iter()
        .map(|block| {
            let s3 = instance_seed(settings.master_seed, ExperimentId::Codec, 0, block as u64);
            let streams = stream_seeds(s3);
            let mut message = Array1::zeros(c.msg_len);
            match &source {
                Some(samples) => {
                    let start = block * c.msg_len;
                    for i in 0..c.msg_len {
                        message[i] = samples.get(start + i).copied().unwrap_or(0.0);
                    }
                }
                None => {
                    let mut rng = ChaCha8Rng::seed_from_u64(streams.coefficients);
                    for v in message.iter_mut() {
                        *v = rng.random::<f64>() * 2.0 - 1.0;
                    }
                }
            }
            let codeword = encode(&code, &message)?;
            let (received, channel) = corrupt(&codeword, &prior, sigma_v, streams.noise)?;
            let impulse_support =
                channel.impulse_errors.mapv(|v| if v != 0.0 { 1.0 } else { 0.0 });
            let mut received_bytes = Vec::with_capacity(received.len() * 8);
            for &v in received.iter() {
                received_bytes.extend_from_slice(&v.to_le_bytes());
            }
            let meta = RowMeta {
                experiment: ExperimentId::Codec,
                n: c.codeword_len - c.msg_len,
                m: c.codeword_len,
                p_or_k: settings.p,
                sigma_e: sigma_v,
                snr_in_db: c.snr_db,
                seed: s3,
                hash: fnv1a64(&received_bytes),
            };
            let mut rows = Vec::with_capacity(settings.solvers.len());
            for &solver in &settings.solvers {
                let captured: RefCell<Option<SolveOutput>> = RefCell::new(None);
                let started = Instant::now();
                let decoded = decode_with_dictionary(&received, &code, &dict, &col_norms, |inst| {
                    let output = run_solver(solver, inst, &settings.solver)?;
                    let y_hat = output.y_hat.clone();
                    *captured.borrow_mut() = Some(output);
                    Ok(y_hat)
                });
                let wall_ms = started.elapsed().as_secs_f64() * 1e3;
                let mut row = ResultRow {
                    experiment: meta.experiment,
                    solver: solver.label().to_string(),
                    n: meta.n,
                    m: meta.m,
                    p_or_k: meta.p_or_k,
                    sigma_e: meta.sigma_e,
                    snr_in_db: meta.snr_in_db,
                    seed: meta.seed,
                    instance_hash: meta.hash,
                    status: "ok".to_string(),
                    snr_out_db: f64::NAN,
                    iterations: 0,
                    wall_ms,
                    tp: 0,
                    fp: 0,
                    fn_: 0,
                    exact_support: false,
                    stability_pass: None,
                };
                match decoded {
                    Ok(decoded_message) => {
                        row.snr_out_db =
                            output_snr(&message, &decoded_message).unwrap_or(f64::NAN);
                        if let Some(output) = captured.borrow().as_ref() {
                            row.iterations = output.iterations;
                            row.stability_pass = output.stability;
                            if let Ok(rep) = support_report(&impulse_support, &output.q_hat) {
                                row.tp = rep.true_positives;
                                row.fp = rep.false_positives;
                                row.fn_ = rep.false_negatives;
                                row.exact_support = rep.exact_recovery;
                            }
                        }
                    }
                    Err(Error::InvalidParameter { name, .. }) => {
                        row.status = format!("invalid: {name}");
                    }
                    Err(e) => {
                        row.status = format!("error: {}", sanitize_status(&e.to_string()));
                    }
                }
                rows.push(row);
            }
            Ok(rows)
        })
        .collect();
    let mut rows = Vec::new();
    for result in nested {
        rows.extend(result?);
    }
    let summaries = summarize(&rows, "snr_in_db", |r| r.snr_in_db);
    Ok(ExperimentOutput {
        rows,
        summaries,
        plot_stem: Some("codec"),
        ..Default::default()
    })
}

/// Wall-clock scaling over problem size (`n = m/2`).
pub fn timing(settings: &Settings) -> anyhow::Result<ExperimentOutput> {
    let grid = settings.timing_m_grid.clone();
    let snr_in_db = settings.input_snr_db();
    let rows = pooled_rows(settings, ExperimentId::Timing, &grid, |_, &m, s3| {
        let n = (m / 2).max(1);
        let (inst, hash) =
            spiky_instance(n, m, settings.p, settings.sigma_r, settings.sigma_e, s3)?;
        let meta = RowMeta {
            experiment: ExperimentId::Timing,
            n,
            m,
            p_or_k: settings.p,
            sigma_e: settings.sigma_e,
            snr_in_db,
            seed: s3,
            hash,
        };
        Ok(settings
            .solvers
            .iter()
            .map(|&solver| run_one(&meta, solver, &inst, &settings.solver))
            .collect())
    })?;
    let summaries = summarize(&rows, "m", |r| r.m as f64);
    // Re-run the same reduction with wall_ms in the value slot to get the
    // runtime figure's plot data.
    let mut wall_rows = rows.clone();
    for row in &mut wall_rows {
        row.snr_out_db = row.wall_ms;
    }
    let wall_summaries = summarize(&wall_rows, "m", |r| r.m as f64);
    let extra_files = plotdata_files("timing_wall", &wall_summaries)
        .into_iter()
        .map(|(name, body)| (format!("plotdata/{name}"), body.into_bytes()))
        .collect();
    Ok(ExperimentOutput {
        rows,
        summaries,
        plot_stem: Some("timing"),
        extra_files,
        ..Default::default()
    })
}

/// Emits serialized instance files plus a manifest for later `solve` runs.
pub fn gen(settings: &Settings) -> anyhow::Result<ExperimentOutput> {
    let mut extra_files = Vec::with_capacity(settings.trials + 1);
    let mut manifest = String::from("index,file,seed,instance_hash,n,m,p,sigma_r,sigma_e\n");
    for t in 0..settings.trials {
        let s3 = instance_seed(settings.master_seed, ExperimentId::Gen, 0, t as u64);
        let (inst, hash) = spiky_instance(
            settings.n,
            settings.m,
            settings.p,
            settings.sigma_r,
            settings.sigma_e,
            s3,
        )?;
        let mut buf = Vec::new();
        write_instance(&mut buf, &inst)?;
        let file = format!("instances/instance_{t:04}.sbht");
        let _ = writeln!(
            manifest,
            "{t},{file},{s3},{hash:016x},{},{},{},{},{}",
            settings.n,
            settings.m,
            fmt_f64(settings.p),
            fmt_f64(settings.sigma_r),
            fmt_f64(settings.sigma_e)
        );
        extra_files.push((file, buf));
    }
    extra_files.push(("gen_manifest.csv".to_string(), manifest.into_bytes()));
    Ok(ExperimentOutput {
        extra_files,
        report: Some(format!("wrote {} instance files", settings.trials)),
        ..Default::default()
    })
}

/// Solves one instance (loaded from a file or freshly synthesized) with one
/// solver and reports SNR/support to stdout.
pub fn solve_one(
    settings: &Settings,
    input: Option<&Path>,
    solver: SolverName,
) -> anyhow::Result<ExperimentOutput> {
    let s3 = instance_seed(settings.master_seed, ExperimentId::SolveOne, 0, 0);
    let (inst, hash, seed, p_or_k, sigma_e, snr_in_db) = match input {
        Some(path) => {
            let mut file = File::open(path)
                .map_err(|e| anyhow::anyhow!("opening instance {}: {e}", path.display()))?;
            let inst = read_instance::<f64, _>(&mut file)?;
            let hash = fnv1a64(&instance_bytes(&inst));
            let sigma_e = inst.truth.as_ref().map_or(f64::NAN, |t| t.sigma_e);
            let seed = inst.seed;
            (inst, hash, seed, f64::NAN, sigma_e, f64::NAN)
        }
        None => {
            let (inst, hash) = spiky_instance(
                settings.n,
                settings.m,
                settings.p,
                settings.sigma_r,
                settings.sigma_e,
                s3,
            )?;
            (
                inst,
                hash,
                s3,
                settings.p,
                settings.sigma_e,
                settings.input_snr_db(),
            )
        }
    };
    let meta = RowMeta {
        experiment: ExperimentId::SolveOne,
        n: inst.dictionary.n(),
        m: inst.dictionary.m(),
        p_or_k,
        sigma_e,
        snr_in_db,
        seed,
        hash,
    };
    let row = run_one(&meta, solver, &inst, &settings.solver);
    let stability = match row.stability_pass {
        Some(true) => "pass",
        Some(false) => "fail",
        None => "na",
    };
    let report = format!(
        "solver: {}\nstatus: {}\nn: {}  m: {}\niterations: {}\nwall_ms: {:.3}\nsnr_out_db: {}\nsupport: tp={} fp={} fn={} exact={}\nstability: {}",
        row.solver,
        row.status,
        row.n,
        row.m,
        row.iterations,
        row.wall_ms,
        fmt_f64(row.snr_out_db),
        row.tp,
        row.fp,
        row.fn_,
        u8::from(row.exact_support),
        stability,
    );
    Ok(ExperimentOutput {
        rows: vec![row],
        report: Some(report),
        ..Default::default()
    })
}
