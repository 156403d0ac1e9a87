//! End-to-end checks of the `sbht` binary and the frozen output schemas.
//!
//! Binary invocations run at deliberately tiny problem sizes; the golden
//! values (headers, seed-chain constants, hash test vectors) are frozen
//! here so schema or derivation changes are loud.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sparse_bht_bench::rows::{PLOTDATA_HEADER, ROWS_HEADER, SUMMARY_HEADER};
use sparse_bht_bench::seed::{fnv1a64, instance_seed, stream_seeds, ExperimentId};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sbht"))
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("sbht-cli-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.toml");
    fs::write(&path, body).unwrap();
    path
}

fn run_ok(cmd: &mut Command) -> Output {
    let output = cmd.output().expect("binary runs");
    assert!(
        output.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

/// Data rows of a CSV file (header skipped), split into fields.
fn read_csv_rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

const TINY_SWEEP: &str = r#"
[run]
trials = 2

[problem]
n = 16
m = 32

[grids]
snr_db = [20.0, 40.0]

[solvers]
list = ["hard-optimal", "mp", "min-l2"]
"#;

// ------------------------------------------------------------ frozen values

#[test]
fn csv_headers_are_frozen() {
    assert_eq!(
        ROWS_HEADER,
        "experiment,solver,n,m,p_or_k,sigma_e,snr_in_db,seed,instance_hash,status,\
         snr_out_db,iterations,wall_ms,tp,fp,fn,exact_support,stability_pass"
    );
    assert_eq!(
        SUMMARY_HEADER,
        "experiment,solver,grid_axis,grid_value,mean_snr_out_db,stddev_snr_out_db,n_trials"
    );
    assert_eq!(PLOTDATA_HEADER, "x,mean,stddev,n");
}

#[test]
fn experiment_codes_are_frozen() {
    let expected = [
        (ExperimentId::SweepInputSnr, 1),
        (ExperimentId::SweepSparsity, 2),
        (ExperimentId::SweepAlpha, 3),
        (ExperimentId::Diagnose, 4),
        (ExperimentId::Stability, 5),
        (ExperimentId::Codec, 6),
        (ExperimentId::SolveOne, 7),
        (ExperimentId::Timing, 8),
        (ExperimentId::Gen, 9),
    ];
    for (id, code) in expected {
        assert_eq!(id.code(), code, "{id:?}");
    }
}

#[test]
fn seed_chain_matches_cross_language_reference() {
    // Frozen against an independent implementation of the documented chain.
    let s3 = instance_seed(1, ExperimentId::SweepInputSnr, 0, 0);
    assert_eq!(s3, 0x4cd00909ef330845);
    let st = stream_seeds(s3);
    assert_eq!(st.dictionary, 0x847f5cc3552f553b);
    assert_eq!(st.coefficients, 0x3f729282ffa7043c);
    assert_eq!(st.noise, 0x3eba5a59296328a0);

    let s3 = instance_seed(7, ExperimentId::SweepAlpha, 2, 5);
    assert_eq!(s3, 0xbfbc88b1f87624ad);
    let st = stream_seeds(s3);
    assert_eq!(st.dictionary, 0x83428be60bf12852);
    assert_eq!(st.coefficients, 0xecb56239fbef904c);
    assert_eq!(st.noise, 0xae53f6432a99b04f);
}

#[test]
fn fnv1a64_matches_published_test_vectors() {
    assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
    assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
    assert_eq!(fnv1a64(b"hello"), 0xa430d84680aabd0b);
}

// --------------------------------------------------------------- sweeps

#[test]
fn sweep_snr_cli_emits_all_artifacts_with_paired_hashes() {
    let dir = tmp_dir("sweep-artifacts");
    let config = write_config(&dir, TINY_SWEEP);
    let out = dir.join("out");
    run_ok(bin()
        .args(["sweep-snr", "--seed", "7"])
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out));

    let rows_text = fs::read_to_string(out.join("rows.csv")).unwrap();
    assert_eq!(rows_text.lines().next().unwrap(), ROWS_HEADER);
    let rows = read_csv_rows(&out.join("rows.csv"));
    // 2 grid points x 2 trials x 3 solvers.
    assert_eq!(rows.len(), 12);
    for row in &rows {
        assert_eq!(row[0], "1", "experiment code");
        assert_eq!(row[9], "ok", "status");
    }
    // Paired design: every row with the same instance seed carries the
    // same instance hash, across all solvers.
    for row in &rows {
        let twins: Vec<&Vec<String>> = rows.iter().filter(|r| r[7] == row[7]).collect();
        assert_eq!(twins.len(), 3);
        assert!(twins.iter().all(|r| r[8] == row[8]), "hash pairing");
    }

    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().next().unwrap(), SUMMARY_HEADER);

    for solver in ["hard-optimal", "mp", "min-l2"] {
        let plot = out.join("plotdata").join(format!("sweep_snr_{solver}.csv"));
        let text = fs::read_to_string(&plot).unwrap();
        assert_eq!(text.lines().next().unwrap(), PLOTDATA_HEADER);
        assert_eq!(text.lines().count(), 3, "header + 2 grid points");
    }

    let resolved = fs::read_to_string(out.join("config.resolved")).unwrap();
    assert!(resolved.contains("[run]"));
    assert!(resolved.contains("seed = 7"));
    assert!(resolved.contains("n = 16"));
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn sweep_snr_cli_is_deterministic_modulo_wall_time() {
    let dir = tmp_dir("sweep-determinism");
    let config = write_config(&dir, TINY_SWEEP);
    for run in ["a", "b"] {
        run_ok(bin()
            .args(["sweep-snr", "--seed", "11"])
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(dir.join(run)));
    }
    let strip_wall = |name: &str| -> Vec<String> {
        read_csv_rows(&dir.join(name).join("rows.csv"))
            .into_iter()
            .map(|mut fields| {
                fields[12] = "_".to_string();
                fields.join(",")
            })
            .collect()
    };
    assert_eq!(strip_wall("a"), strip_wall("b"));
    let summary_a = fs::read_to_string(dir.join("a").join("summary.csv")).unwrap();
    let summary_b = fs::read_to_string(dir.join("b").join("summary.csv")).unwrap();
    assert_eq!(summary_a, summary_b);
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn alpha_sweep_records_out_of_domain_alpha_in_row() {
    let dir = tmp_dir("alpha-invalid");
    let config = write_config(
        &dir,
        r#"
[run]
trials = 1

[problem]
n = 16
m = 32

[grids]
alpha = [0.9, 1.0]

[solvers]
list = ["hard-optimal"]
"#,
    );
    let out = dir.join("out");
    run_ok(bin()
        .args(["sweep-alpha", "--seed", "3"])
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out));
    let rows = read_csv_rows(&out.join("rows.csv"));
    assert_eq!(rows.len(), 2);
    let ok: Vec<_> = rows.iter().filter(|r| r[9] == "ok").collect();
    let invalid: Vec<_> = rows.iter().filter(|r| r[9] == "invalid: alpha").collect();
    assert_eq!(ok.len(), 1);
    assert_eq!(invalid.len(), 1);
    assert_eq!(ok[0][4], "0.9", "valid grid value in p_or_k");
    assert_eq!(invalid[0][4], "1", "rejected grid value in p_or_k");
    // Paired by trial: both grid points saw the identical instance.
    assert_eq!(ok[0][7], invalid[0][7], "seed");
    assert_eq!(ok[0][8], invalid[0][8], "hash");
    // The rejected configuration never produced an output.
    assert_eq!(invalid[0][10], "nan", "snr_out_db");
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn sparsity_sweep_emits_axis_map() {
    let dir = tmp_dir("sparsity-axis");
    let config = write_config(
        &dir,
        r#"
[run]
trials = 1

[problem]
n = 16
m = 32

[grids]
sparsity = [2, 4]

[solvers]
list = ["omp"]
"#,
    );
    let out = dir.join("out");
    run_ok(bin()
        .args(["sweep-sparsity", "--seed", "9"])
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out));
    let rows = read_csv_rows(&out.join("rows.csv"));
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().any(|r| r[4] == "2"));
    assert!(rows.iter().any(|r| r[4] == "4"));
    let axis = fs::read_to_string(out.join("plotdata").join("sweep_sparsity_axis.csv")).unwrap();
    assert_eq!(axis.lines().next().unwrap(), "k,k_over_n,k_over_m");
    assert!(axis.contains("2,0.125,0.0625"));
    assert!(axis.contains("4,0.25,0.125"));
    let _ = fs::remove_dir_all(&dir);
}

// ------------------------------------------------- instance files and solve

#[test]
fn gen_then_solve_roundtrip() {
    let dir = tmp_dir("gen-solve");
    let config = write_config(&dir, TINY_SWEEP);
    let gen_out = dir.join("gen");
    run_ok(bin()
        .args(["gen", "--seed", "5", "--trials", "2"])
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&gen_out));

    let manifest = fs::read_to_string(gen_out.join("gen_manifest.csv")).unwrap();
    assert_eq!(
        manifest.lines().next().unwrap(),
        "index,file,seed,instance_hash,n,m,p,sigma_r,sigma_e"
    );
    assert_eq!(manifest.lines().count(), 3, "header + 2 instances");
    let instance = gen_out.join("instances").join("instance_0001.sbht");
    assert!(instance.is_file());

    // The emitted file parses with the library reader.
    let mut fh = fs::File::open(&instance).unwrap();
    let inst = sparse_bht::model::read_instance::<f64, _>(&mut fh).unwrap();
    assert_eq!(inst.dictionary.n(), 16);
    assert_eq!(inst.dictionary.m(), 32);
    assert!(inst.truth.is_some());

    let solve_out = dir.join("solve");
    let output = run_ok(bin()
        .args(["solve", "--solver", "omp"])
        .arg("--input")
        .arg(&instance)
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&solve_out));
    let stdout = String::from_utf8_lossy(&output.stdout).to_string();
    assert!(stdout.contains("solver: omp"), "{stdout}");
    assert!(stdout.contains("status: ok"), "{stdout}");
    assert!(stdout.contains("snr_out_db:"), "{stdout}");
    assert!(stdout.contains("support: tp="), "{stdout}");
    let rows = read_csv_rows(&solve_out.join("rows.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], "7", "solve experiment code");
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn solve_synthesizes_when_no_input_given() {
    let dir = tmp_dir("solve-fresh");
    let config = write_config(&dir, TINY_SWEEP);
    let out = dir.join("out");
    let output = run_ok(bin()
        .args(["solve", "--solver", "min-l2", "--seed", "21"])
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out));
    let stdout = String::from_utf8_lossy(&output.stdout).to_string();
    assert!(stdout.contains("solver: min-l2"), "{stdout}");
    assert!(stdout.contains("stability: na"), "{stdout}");
    let _ = fs::remove_dir_all(&dir);
}

// --------------------------------------------------- remaining subcommands

#[test]
fn diagnose_cli_emits_iteration_trace() {
    let dir = tmp_dir("diagnose");
    let config = write_config(
        &dir,
        r#"
[problem]
n = 16
m = 32

[diagnose]
runs = 30
"#,
    );
    let out = dir.join("out");
    run_ok(bin()
        .args(["diagnose", "--seed", "2"])
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out));
    let text = fs::read_to_string(out.join("diagnose.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "iter,mean_error_term,mean_sigma_gamma_sq,kurtosis"
    );
    let mut count = 0;
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 4);
        assert_eq!(fields[0].parse::<usize>().unwrap(), i + 1);
        for field in &fields[1..] {
            assert!(field.parse::<f64>().unwrap().is_finite(), "{line}");
        }
        count += 1;
    }
    assert!(count >= 2, "at least two traced iterations, got {count}");
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn stability_cli_reports_floors_for_both_ensembles() {
    let dir = tmp_dir("stability");
    let config = write_config(
        &dir,
        r#"
[problem]
n = 16
m = 32

[stability]
seeds = 2
"#,
    );
    for ensemble in ["dct", "uniform"] {
        let out = dir.join(ensemble);
        run_ok(bin()
            .args(["stability", "--seed", "2", "--ensemble", ensemble])
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&out));
        let rows = read_csv_rows(&out.join("stability.csv"));
        assert_eq!(rows.len(), 2);
        for row in &rows {
            assert_eq!(row[2], ensemble);
            let min: f64 = row[7].parse().unwrap();
            let max: f64 = row[8].parse().unwrap();
            assert!(min <= max, "floor ordering in {row:?}");
        }
    }
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn codec_cli_decodes_blocks() {
    let dir = tmp_dir("codec");
    let config = write_config(
        &dir,
        r#"
[solvers]
list = ["omp"]

[codec]
msg_len = 8
codeword_len = 16
blocks = 3
snr_db = 40.0
"#,
    );
    let out = dir.join("out");
    run_ok(bin()
        .args(["codec", "--seed", "2"])
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out));
    let rows = read_csv_rows(&out.join("rows.csv"));
    assert_eq!(rows.len(), 3);
    for row in &rows {
        assert_eq!(row[0], "6", "codec experiment code");
        assert_eq!(row[2], "8", "syndrome length");
        assert_eq!(row[3], "16", "codeword length");
        assert_eq!(row[9], "ok");
        assert!(row[10].parse::<f64>().unwrap().is_finite(), "message snr");
    }
    let summary = read_csv_rows(&out.join("summary.csv"));
    assert_eq!(summary.len(), 1);
    assert_eq!(summary[0][6], "3", "all blocks aggregated");
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn codec_cli_reads_sample_source_file() {
    let dir = tmp_dir("codec-source");
    // 20 samples -> 2 full blocks of 8 plus one zero-padded block; the
    // block limit then caps usage at 2.
    let samples: Vec<f64> = (0..20).map(|i| (i as f64) / 10.0 - 1.0).collect();
    let mut bytes = Vec::new();
    for v in &samples {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let source = dir.join("samples.f64");
    fs::write(&source, bytes).unwrap();
    let config = write_config(
        &dir,
        r#"
[solvers]
list = ["omp"]

[codec]
msg_len = 8
codeword_len = 16
blocks = 2
snr_db = 40.0
"#,
    );
    let out = dir.join("out");
    run_ok(bin()
        .args(["codec", "--seed", "4"])
        .arg("--source")
        .arg(&source)
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out));
    let rows = read_csv_rows(&out.join("rows.csv"));
    assert_eq!(rows.len(), 2);
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn timing_cli_emits_wall_clock_plotdata() {
    let dir = tmp_dir("timing");
    let config = write_config(
        &dir,
        r#"
[run]
trials = 2

[grids]
timing_m = [16, 32]

[solvers]
list = ["omp"]
"#,
    );
    let out = dir.join("out");
    run_ok(bin()
        .args(["timing", "--seed", "2"])
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out));
    let rows = read_csv_rows(&out.join("rows.csv"));
    assert_eq!(rows.len(), 4, "2 sizes x 2 trials");
    for row in &rows {
        assert_eq!(row[0], "8", "timing experiment code");
        let n: usize = row[2].parse().unwrap();
        let m: usize = row[3].parse().unwrap();
        assert_eq!(n * 2, m);
    }
    let wall = fs::read_to_string(out.join("plotdata").join("timing_wall_omp.csv")).unwrap();
    let mut lines = wall.lines();
    assert_eq!(lines.next().unwrap(), PLOTDATA_HEADER);
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        assert!(fields[1].parse::<f64>().unwrap() > 0.0, "positive wall mean");
        assert_eq!(fields[3], "2", "both trials aggregated");
    }
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn print_config_echoes_resolved_settings() {
    let dir = tmp_dir("print-config");
    let config = write_config(&dir, TINY_SWEEP);
    let out = dir.join("out");
    let output = run_ok(bin()
        .args(["solve", "--solver", "mp", "--seed", "99", "--print-config"])
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out));
    let stdout = String::from_utf8_lossy(&output.stdout).to_string();
    assert!(stdout.contains("seed = 99"), "{stdout}");
    assert!(stdout.contains("[codec]"), "{stdout}");
    assert!(stdout.contains("list = "), "{stdout}");
    // The resolved config also always lands in the output directory.
    assert!(out.join("config.resolved").is_file());
    let _ = fs::remove_dir_all(&dir);
}

// ------------------------------------------------------------- error paths

#[test]
fn unknown_solver_label_is_rejected() {
    let dir = tmp_dir("bad-solver");
    let out = dir.join("out");
    let output = bin()
        .args(["solve", "--solver", "nope"])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr).to_string();
    assert!(stderr.contains("unknown solver"), "{stderr}");
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tmp_dir("bad-config");
    let config = write_config(&dir, "[problem]\nnn = 16\n");
    let output = bin()
        .arg("sweep-snr")
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr).to_string();
    assert!(stderr.contains("parsing config"), "{stderr}");
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn structurally_invalid_settings_are_rejected() {
    let dir = tmp_dir("bad-settings");
    let config = write_config(&dir, "[run]\ntrials = 0\n");
    let output = bin()
        .arg("sweep-snr")
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr).to_string();
    assert!(stderr.contains("trials"), "{stderr}");
    let _ = fs::remove_dir_all(&dir);
}
