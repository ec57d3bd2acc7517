//! End-to-end checks of the command-line binary: artifact layout, byte
//! reproducibility from a resolved snapshot, exit codes and single-line
//! error reporting.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bridgecast::data::{gen_ar, write_csv, ArSpec};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bridgecast"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary should spawn")
}

fn write_file(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

fn tiny_synth_config(dir: &Path, out: &Path) -> PathBuf {
    let path = dir.join("run.toml");
    write_file(
        &path,
        &format!(
            r#"
experiment = "synth2d"

[model]
head = "fm"
hidden = 8
blocks = 1
time_dim = 4

[train]
iters = 3
batch = 32

[solver]
steps = 6

[data]
dataset = "moons"
n_train = 128
n_eval = 48

[output]
dir = "{}"
"#,
            out.display()
        ),
    );
    path
}

#[test]
fn synth2d_writes_artifacts_and_reports_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let cfg = tiny_synth_config(tmp.path(), &out);
    let res = run(&["synth2d", "--config", cfg.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.contains("wasserstein:"), "{stdout}");
    for f in [
        "config.toml",
        "manifest.json",
        "metrics.json",
        "results.csv",
        "checkpoint_run0.json",
        "samples_run0.csv",
        "loss_trace_run0.csv",
    ] {
        assert!(out.join(f).exists(), "missing artifact {f}");
    }
}

#[test]
fn every_subcommand_is_bitwise_reproducible_from_its_snapshot() {
    let tmp = tempfile::tempdir().unwrap();

    // synth2d twice from the same config, different dirs.
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    let cfg_a = tiny_synth_config(tmp.path(), &out_a);
    assert!(run(&["synth2d", "--config", cfg_a.to_str().unwrap()]).status.success());
    // Re-run from the resolved snapshot, only redirecting the output dir.
    assert!(run(&[
        "synth2d",
        "--config",
        out_a.join("config.toml").to_str().unwrap(),
        "--out",
        out_b.to_str().unwrap(),
    ])
    .status
    .success());
    for f in ["metrics.json", "samples_run0.csv", "loss_trace_run0.csv", "results.csv"] {
        assert_eq!(
            std::fs::read(out_a.join(f)).unwrap(),
            std::fs::read(out_b.join(f)).unwrap(),
            "{f} not reproducible"
        );
    }

    // sample from the run checkpoint reproduces the run's samples CSV.
    let out_s = tmp.path().join("s");
    assert!(run(&[
        "sample",
        "--config",
        out_a.join("config.toml").to_str().unwrap(),
        "--checkpoint",
        out_a.join("checkpoint_run0.json").to_str().unwrap(),
        "--out",
        out_s.to_str().unwrap(),
    ])
    .status
    .success());
    assert_eq!(
        std::fs::read(out_a.join("samples_run0.csv")).unwrap(),
        std::fs::read(out_s.join("samples.csv")).unwrap()
    );

    // eval twice with the same seed.
    let samples = out_a.join("samples_run0.csv");
    let reference = out_a.join("reference_run0.csv");
    for (dir, seed) in [("e1", "9"), ("e2", "9")] {
        assert!(run(&[
            "eval",
            "--samples",
            samples.to_str().unwrap(),
            "--reference",
            reference.to_str().unwrap(),
            "--out",
            tmp.path().join(dir).to_str().unwrap(),
            "--seed",
            seed,
        ])
        .status
        .success());
    }
    assert_eq!(
        std::fs::read(tmp.path().join("e1/metrics.json")).unwrap(),
        std::fs::read(tmp.path().join("e2/metrics.json")).unwrap()
    );
}

#[test]
fn ar_bench_and_forecast_run_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let ar_out = tmp.path().join("ar");
    let ar_cfg = tmp.path().join("ar.toml");
    write_file(
        &ar_cfg,
        &format!(
            r#"
experiment = "ar-bench"

[model]
head = "si"
hidden = 8
blocks = 1
time_dim = 4
encoder_hidden = 6

[train]
iters = 2
batch = 16

[solver]
steps = 6

[data]
context_len = 4
ar_len = 100
ar_rollout = 50

[output]
dir = "{}"
"#,
            ar_out.display()
        ),
    );
    let res = run(&["ar-bench", "--config", ar_cfg.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(String::from_utf8_lossy(&res.stdout).contains("ar_param_error:"));

    let series_csv = tmp.path().join("series.csv");
    let spec = ArSpec::new(vec![0.7], 1.0, 90, 3).unwrap();
    write_csv(&gen_ar(&spec).unwrap(), &series_csv).unwrap();
    let fc_out = tmp.path().join("fc");
    let fc_cfg = tmp.path().join("fc.toml");
    write_file(
        &fc_cfg,
        &format!(
            r#"
experiment = "forecast"

[model]
head = "si"
hidden = 8
blocks = 1
time_dim = 4
encoder_hidden = 6

[train]
iters = 2
batch = 16

[solver]
steps = 6

[data]
path = "{}"
context_len = 4
horizon = 3
n_paths = 5

[output]
dir = "{}"
"#,
            series_csv.display(),
            fc_out.display()
        ),
    );
    let res = run(&["forecast", "--config", fc_cfg.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.contains("crps_sum:"), "{stdout}");
    assert!(fc_out.join("quantiles_run0.csv").exists());
}

#[test]
fn seed_override_changes_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let out_a = tmp.path().join("a");
    let cfg = tiny_synth_config(tmp.path(), &out_a);
    assert!(run(&["synth2d", "--config", cfg.to_str().unwrap()]).status.success());
    let out_b = tmp.path().join("b");
    assert!(run(&[
        "synth2d",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_b.to_str().unwrap(),
        "--seed",
        "123",
    ])
    .status
    .success());
    assert_ne!(
        std::fs::read(out_a.join("samples_run0.csv")).unwrap(),
        std::fs::read(out_b.join("samples_run0.csv")).unwrap(),
        "different seeds should give different samples"
    );
}

#[test]
fn exit_codes_and_single_line_errors() {
    let tmp = tempfile::tempdir().unwrap();

    // Unknown config key: 2.
    let bad_key = tmp.path().join("bad.toml");
    write_file(&bad_key, "experiment = \"synth2d\"\n[model]\nwidth = 3\n");
    let res = run(&["synth2d", "--config", bad_key.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert_eq!(stderr.lines().count(), 1, "stderr not single-line: {stderr}");
    assert!(stderr.starts_with("error:"), "{stderr}");

    // Unknown dataset name: 2.
    let bad_data = tmp.path().join("baddata.toml");
    write_file(
        &bad_data,
        "experiment = \"synth2d\"\n[data]\ndataset = \"spiral\"\nn_train = 64\nn_eval = 32\n[train]\niters = 0\n[model]\nhidden = 8\nblocks = 1\ntime_dim = 4\n",
    );
    let res = run(&["synth2d", "--config", bad_data.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2), "{}", String::from_utf8_lossy(&res.stderr));

    // Missing input file: 3.
    let res = run(&["synth2d", "--config", "/definitely/not/here.toml"]);
    assert_eq!(res.status.code(), Some(3));

    // Missing forecast CSV: 3.
    let fc = tmp.path().join("fc.toml");
    write_file(
        &fc,
        "experiment = \"forecast\"\n[data]\npath = \"/no/such/series.csv\"\n",
    );
    let res = run(&["forecast", "--config", fc.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(3));

    // Training divergence: 4. A huge learning rate overflows the weights
    // within a few iterations.
    let div_out = tmp.path().join("div");
    let div = tmp.path().join("div.toml");
    write_file(
        &div,
        &format!(
            r#"
experiment = "synth2d"

[model]
head = "fm"
hidden = 8
blocks = 1
time_dim = 4

[train]
iters = 8
batch = 16
lr = 1e200

[data]
dataset = "moons"
n_train = 64
n_eval = 16

[output]
dir = "{}"
"#,
            div_out.display()
        ),
    );
    let res = run(&["synth2d", "--config", div.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(4), "{}", String::from_utf8_lossy(&res.stderr));
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stderr.contains("diverged"), "{stderr}");
}

#[test]
fn experiment_kind_must_match_the_subcommand() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_synth_config(tmp.path(), &tmp.path().join("x"));
    let res = run(&["ar-bench", "--config", cfg.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
}
