//! Fixed result-row schema, deterministic CSV emission, and aggregation.
//!
//! # Overview
//! Every experiment reports through one row schema, [`ROWS_HEADER`]
//! (schema version 1; changing it is a breaking change guarded by a
//! golden-file test). One row is emitted per (solver, grid point, trial).
//! Rows are sorted on a total order over their identifying columns before
//! writing, so the emitted CSV is independent of execution order; the only
//! column allowed to differ between two runs of the same configuration is
//! `wall_ms`.
//!
//! Column notes:
//! - `p_or_k` carries the prior inactivity probability for spiky-prior
//!   experiments, the support size `k` for fixed-support sweeps, and the
//!   decay factor `alpha` for the alpha sweep (the one grid whose axis has
//!   no dedicated column).
//! - `seed` is the per-instance seed `s3` from the derivation chain in
//!   [`crate::seed`]; `instance_hash` fingerprints the instance bytes.
//! - `status` is `ok`, `invalid: <field>` for configurations rejected by
//!   solver validation, or `error: <reason>` for runtime failures; non-`ok`
//!   rows keep zero counts and an `nan` output SNR.
//! - `stability_pass` is `1`/`0` for solvers that evaluate the per-atom
//!   stability bound and `na` for those that do not.
//!
//! Aggregation reduces `snr_out_db` per (solver, grid value) to
//! mean/stddev over the `ok` rows with finite SNR; summaries and plot data
//! are derived from the sorted rows, making them order-independent too.

use std::cmp::Ordering;
use std::fmt::Write as _;

use crate::seed::ExperimentId;

/// Golden header for `rows.csv` (schema version 1).
pub const ROWS_HEADER: &str = "experiment,solver,n,m,p_or_k,sigma_e,snr_in_db,seed,instance_hash,status,snr_out_db,iterations,wall_ms,tp,fp,fn,exact_support,stability_pass";

/// Golden header for `summary.csv`.
pub const SUMMARY_HEADER: &str =
    "experiment,solver,grid_axis,grid_value,mean_snr_out_db,stddev_snr_out_db,n_trials";

/// Golden header for every `plotdata/*.csv` file.
pub const PLOTDATA_HEADER: &str = "x,mean,stddev,n";

/// One solver run on one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: ExperimentId,
    pub solver: String,
    pub n: usize,
    pub m: usize,
    pub p_or_k: f64,
    pub sigma_e: f64,
    pub snr_in_db: f64,
    pub seed: u64,
    pub instance_hash: u64,
    pub status: String,
    pub snr_out_db: f64,
    pub iterations: usize,
    pub wall_ms: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub exact_support: bool,
    pub stability_pass: Option<bool>,
}

/// Lowercase, roundtrip-exact float formatting (`nan`/`inf` spelled out).
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        format!("{v}")
    }
}

impl ResultRow {
    /// The row as one CSV line (no trailing newline).
    pub fn to_csv(&self) -> String {
        let stability = match self.stability_pass {
            Some(true) => "1",
            Some(false) => "0",
            None => "na",
        };
        let mut line = String::new();
        let _ = write!(
            line,
            "{},{},{},{},{},{},{},{},{:016x},{},{},{},{},{},{},{},{},{}",
            self.experiment.code(),
            self.solver,
            self.n,
            self.m,
            fmt_f64(self.p_or_k),
            fmt_f64(self.sigma_e),
            fmt_f64(self.snr_in_db),
            self.seed,
            self.instance_hash,
            self.status,
            fmt_f64(self.snr_out_db),
            self.iterations,
            fmt_f64(self.wall_ms),
            self.tp,
            self.fp,
            self.fn_,
            u8::from(self.exact_support),
            stability,
        );
        line
    }

    /// Total order over the identifying columns (everything except the
    /// measured outputs), used to sort rows before writing.
    fn sort_key_cmp(&self, other: &Self) -> Ordering {
        (self.experiment.code(), &self.solver, self.n, self.m)
            .cmp(&(other.experiment.code(), &other.solver, other.n, other.m))
            .then_with(|| self.p_or_k.total_cmp(&other.p_or_k))
            .then_with(|| self.sigma_e.total_cmp(&other.sigma_e))
            .then_with(|| self.snr_in_db.total_cmp(&other.snr_in_db))
            .then_with(|| self.seed.cmp(&other.seed))
            .then_with(|| self.instance_hash.cmp(&other.instance_hash))
            .then_with(|| self.status.cmp(&other.status))
    }
}

/// Sorts rows into the canonical emission order.
pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| a.sort_key_cmp(b));
}

/// Renders the full `rows.csv` contents (header + sorted rows + trailing
/// newline).
pub fn rows_csv(rows: &mut Vec<ResultRow>) -> String {
    sort_rows(rows);
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(ROWS_HEADER);
    out.push('\n');
    for row in rows.iter() {
        out.push_str(&row.to_csv());
        out.push('\n');
    }
    out
}

/// One aggregated point of a sweep figure.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub experiment: ExperimentId,
    pub solver: String,
    pub grid_axis: String,
    pub grid_value: f64,
    pub mean_snr_out_db: f64,
    pub stddev_snr_out_db: f64,
    pub n_trials: usize,
}

impl SummaryRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.experiment.code(),
            self.solver,
            self.grid_axis,
            fmt_f64(self.grid_value),
            fmt_f64(self.mean_snr_out_db),
            fmt_f64(self.stddev_snr_out_db),
            self.n_trials,
        )
    }
}

/// Reduces rows to per-(solver, grid value) mean/stddev of the output SNR.
///
/// Only `ok` rows with a finite SNR enter the moments; `n_trials` counts
/// exactly those rows, so degenerate instances (for example an all-zero
/// truth, whose SNR is undefined) are visible as a shrunken count rather
/// than a poisoned mean. The sample standard deviation uses the `n - 1`
/// denominator and is 0 for a single sample. Input rows are sorted first,
/// which makes the reduction independent of execution order.
pub fn summarize<F>(rows: &[ResultRow], grid_axis: &str, grid_value: F) -> Vec<SummaryRow>
where
    F: Fn(&ResultRow) -> f64,
{
    let mut sorted: Vec<&ResultRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.sort_key_cmp(b));

    // Group keys in first-appearance order of the sorted rows.
    let mut keys: Vec<(String, f64)> = Vec::new();
    let mut samples: Vec<Vec<f64>> = Vec::new();
    let mut experiments: Vec<ExperimentId> = Vec::new();
    for row in sorted {
        let value = grid_value(row);
        let pos = keys
            .iter()
            .position(|(s, v)| *s == row.solver && v.total_cmp(&value) == Ordering::Equal);
        let idx = match pos {
            Some(i) => i,
            None => {
                keys.push((row.solver.clone(), value));
                samples.push(Vec::new());
                experiments.push(row.experiment);
                keys.len() - 1
            }
        };
        if row.status == "ok" && row.snr_out_db.is_finite() {
            samples[idx].push(row.snr_out_db);
        }
    }

    let mut out: Vec<SummaryRow> = keys
        .into_iter()
        .zip(samples)
        .zip(experiments)
        .map(|(((solver, value), snrs), experiment)| {
            let n = snrs.len();
            let mean = if n == 0 {
                f64::NAN
            } else {
                snrs.iter().sum::<f64>() / n as f64
            };
            let stddev = if n < 2 {
                0.0
            } else {
                let ss: f64 = snrs.iter().map(|s| (s - mean) * (s - mean)).sum();
                (ss / (n - 1) as f64).sqrt()
            };
            SummaryRow {
                experiment,
                solver,
                grid_axis: grid_axis.to_string(),
                grid_value: value,
                mean_snr_out_db: mean,
                stddev_snr_out_db: stddev,
                n_trials: n,
            }
        })
        .collect();
    out.sort_by(|a, b| {
        (a.experiment.code(), &a.solver)
            .cmp(&(b.experiment.code(), &b.solver))
            .then_with(|| a.grid_value.total_cmp(&b.grid_value))
    });
    out
}

/// Renders `summary.csv` contents.
pub fn summary_csv(summaries: &[SummaryRow]) -> String {
    let mut out = String::new();
    out.push_str(SUMMARY_HEADER);
    out.push('\n');
    for s in summaries {
        out.push_str(&s.to_csv());
        out.push('\n');
    }
    out
}

/// Renders one plot-data file per solver from the summaries, keyed by a
/// figure stem: `(file name, contents)` pairs with columns
/// `x,mean,stddev,n` where `x` is the grid value.
pub fn plotdata_files(stem: &str, summaries: &[SummaryRow]) -> Vec<(String, String)> {
    let mut solvers: Vec<&str> = Vec::new();
    for s in summaries {
        if !solvers.contains(&s.solver.as_str()) {
            solvers.push(&s.solver);
        }
    }
    solvers.sort_unstable();
    solvers
        .into_iter()
        .map(|solver| {
            let mut body = String::new();
            body.push_str(PLOTDATA_HEADER);
            body.push('\n');
            for s in summaries.iter().filter(|s| s.solver == solver) {
                let _ = writeln!(
                    body,
                    "{},{},{},{}",
                    fmt_f64(s.grid_value),
                    fmt_f64(s.mean_snr_out_db),
                    fmt_f64(s.stddev_snr_out_db),
                    s.n_trials
                );
            }
            (format!("{stem}_{solver}.csv"), body)
        })
        .collect()
}

/// Strips characters that would break one-line CSV fields out of an error
/// message.
pub fn sanitize_status(msg: &str) -> String {
    msg.replace(['\n', '\r'], " ").replace(',', ";")
}
