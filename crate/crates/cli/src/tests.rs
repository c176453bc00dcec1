use std::fs;
use std::path::Path;

use clap::Parser;
use opmon_core::experiments::{Metrics, SWEEP_CSV_HEADER};
use opmon_core::mtlnet::load_model;
use opmon_core::Task;

use crate::{commands, Cli};

const PATH_FLAGS: [&str; 4] = ["--out", "--dataset", "--model", "--config"];

/// Runs `opmon args...` in-process with path flags resolved against `dir`
/// and `--out` defaulting to `dir/out`. Returns stdout or the one-line error.
fn opmon(dir: &Path, args: &[&str]) -> Result<String, String> {
    let mut argv = vec!["opmon".to_string()];
    let mut resolve = false;
    for a in args {
        argv.push(if resolve { dir.join(a).display().to_string() } else { a.to_string() });
        resolve = PATH_FLAGS.contains(a);
    }
    if !args.contains(&"--out") {
        argv.push("--out".into());
        argv.push(dir.join("out").display().to_string());
    }
    let cli = Cli::try_parse_from(argv).map_err(|e| e.render().to_string())?;
    let mut stdout = Vec::new();
    commands::run(cli, &mut stdout).map_err(|e| format!("error: {e:#}"))?;
    Ok(String::from_utf8(stdout).unwrap())
}

fn ok(dir: &Path, args: &[&str]) -> String {
    opmon(dir, args).unwrap_or_else(|e| panic!("opmon {args:?} failed: {e}"))
}

fn err(dir: &Path, args: &[&str]) -> String {
    opmon(dir, args).expect_err("command should fail")
}

const SMALL: &[&str] = &[
    "--n-symbols",
    "512",
    "--frames-per-point",
    "3",
    "--osnr",
    "32,36,40",
    "--bins",
    "20",
];

fn small_simulate(dir: &Path, extra: &[&str]) -> String {
    ok(dir, &[&["simulate"], SMALL, extra].concat())
}

fn small_train(dir: &Path, extra: &[&str]) -> String {
    ok(dir, &[&["train", "--max-epochs", "15", "--shared", "8"], extra].concat())
}

#[test]
fn default_simulate_reports_split() {
    let tmp = tempfile::tempdir().unwrap();
    let stdout = ok(tmp.path(), &["simulate"]);
    assert_eq!(stdout.trim(), "420 examples (360 train / 39 val / 21 test)");
    assert!(tmp.path().join("out/dataset.csv").exists());
    assert!(tmp.path().join("out/dataset.json").exists());
}

#[test]
fn single_point_dataset() {
    let tmp = tempfile::tempdir().unwrap();
    let stdout = ok(
        tmp.path(),
        &["simulate", "--frames-per-point", "1", "--formats", "PAM4", "--osnr", "40"],
    );
    assert!(stdout.starts_with("1 example "), "{stdout}");
}

#[test]
fn pipeline_reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let files = [
        "dataset.csv",
        "dataset.json",
        "model.json",
        "history.csv",
        "history.json",
        "metrics.json",
        "scatter.csv",
        "scatter.json",
    ];
    let run = |force: &[&str]| {
        small_simulate(dir, &[&["--seed", "11"], force].concat());
        small_train(dir, &[&["--seed", "11"], force].concat());
        ok(dir, &[&["evaluate", "--seed", "11"], force].concat());
        files
            .iter()
            .map(|f| fs::read(dir.join("out").join(f)).unwrap())
            .collect::<Vec<_>>()
    };
    let first = run(&[]);
    let second = run(&["--force"]);
    for ((a, b), name) in first.iter().zip(&second).zip(files) {
        assert!(a == b, "{name} differs between reruns");
    }
}

#[test]
fn refuses_to_overwrite_without_force() {
    let tmp = tempfile::tempdir().unwrap();
    small_simulate(tmp.path(), &[]);
    let e = err(tmp.path(), &[&["simulate"], SMALL].concat());
    assert_eq!(e.lines().count(), 1, "{e}");
    assert!(e.contains("--force"));
}

#[test]
fn config_file_and_flag_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.json");
    let from_file = tmp.path().join("from_file");
    fs::write(
        &cfg,
        format!(
            r#"{{"out": {:?}, "sim": {{"n_symbols": 512}}, "dataset": {{"frames_per_point": 1, "osnr_grid": [35.0], "bin_count": 10}}}}"#,
            from_file.display().to_string()
        ),
    )
    .unwrap();
    let mut argv = vec!["opmon".to_string(), "simulate".into(), "--config".into()];
    argv.push(cfg.display().to_string());
    let mut stdout = Vec::new();
    commands::run(Cli::try_parse_from(argv).unwrap(), &mut stdout).unwrap();
    assert!(stdout.starts_with(b"3 examples"));
    assert!(from_file.join("dataset.csv").exists());

    let stdout = ok(
        tmp.path(),
        &["simulate", "--config", "run.json", "--frames-per-point", "2", "--out", "flags"],
    );
    assert!(stdout.starts_with("6 examples"), "{stdout}");

    fs::write(&cfg, r#"{"dataset": {"frames": 1}}"#).unwrap();
    assert!(err(tmp.path(), &["simulate", "--config", "run.json"]).contains("frames"));
}

#[test]
fn invalid_values_fail_before_work() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(err(tmp.path(), &["simulate", "--bins", "1"]).contains("bin_count"));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn train_flags_shape_the_model() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    small_simulate(dir, &[]);

    small_train(dir, &["--loss-ratio", "3"]);
    let net = load_model(&dir.join("out/model.json")).unwrap();
    assert_eq!((net.loss_weights.w_mfi, net.loss_weights.w_osnr), (1.0, 3.0));
    assert!(net.has_task(Task::Mfi) && net.has_task(Task::Osnr));
    let history = fs::read_to_string(dir.join("out/history.csv")).unwrap();
    assert_eq!(
        history.lines().next().unwrap(),
        "epoch,train_loss,val_loss,val_acc,val_rmse_db"
    );
    assert!(history.lines().count() - 1 <= 15);

    small_train(dir, &["--stl", "mfi", "--out", "stl", "--dataset", "out/dataset.csv"]);
    let net = load_model(&dir.join("stl/model.json")).unwrap();
    assert!(net.has_task(Task::Mfi) && !net.has_task(Task::Osnr));
    ok(dir, &["evaluate", "--out", "stl", "--dataset", "out/dataset.csv"]);
    let metrics: Metrics =
        serde_json::from_str(&fs::read_to_string(dir.join("stl/metrics.json")).unwrap()).unwrap();
    assert!(metrics.mfi_accuracy.is_some() && metrics.osnr_rmse_db.is_none());
    assert!(!dir.join("stl/scatter.csv").exists());
}

#[test]
fn evaluate_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    small_simulate(dir, &[]);
    small_train(dir, &[]);
    let stdout = ok(dir, &["evaluate", "--partition", "train"]);
    assert!(stdout.contains("MFI accuracy") && stdout.contains("OSNR RMSE"));
    let metrics: Metrics =
        serde_json::from_str(&fs::read_to_string(dir.join("out/metrics.json")).unwrap()).unwrap();
    let scatter = fs::read_to_string(dir.join("out/scatter.csv")).unwrap();
    assert_eq!(scatter.lines().next().unwrap(), "true_osnr_db,est_osnr_db");
    assert_eq!(scatter.lines().count() - 1, metrics.n_examples);
    let trues: Vec<f64> = scatter
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert!(trues.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn evaluate_rejects_mismatched_shapes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    small_simulate(dir, &[]);
    small_train(dir, &[]);
    ok(
        dir,
        &["simulate", "--n-symbols", "512", "--frames-per-point", "3", "--bins", "30", "--out", "wide"],
    );
    let e = err(
        dir,
        &["evaluate", "--model", "out/model.json", "--dataset", "wide/dataset.csv", "--out", "wide"],
    );
    assert!(e.contains("shape mismatch"), "{e}");
}

#[test]
fn sweeps_emit_tables_and_optimum() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let common = [
        "--n-seeds", "2", "--max-epochs", "5", "--n-symbols", "512", "--frames-per-point", "10",
        "--osnr", "32,40",
    ];
    let stdout = ok(dir, &[&["sweep", "bins", "--values", "10,20"], &common[..]].concat());
    let csv = fs::read_to_string(dir.join("out/sweep_bin_count.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], SWEEP_CSV_HEADER);
    assert_eq!(lines.len(), 1 + 2 * 3);
    assert!(lines[1].starts_with("10,mtl,"));
    assert!(stdout.contains("optimum mtl: bin_count = "));
    assert!(dir.join("out/sweep_bin_count.json").exists());

    ok(
        dir,
        &[&["sweep", "loss-ratio", "--values", "1,5", "--shared", "6"], &common[..]].concat(),
    );
    let csv = fs::read_to_string(dir.join("out/sweep_loss_ratio.csv")).unwrap();
    assert!(csv.lines().next().unwrap().ends_with(",stl_osnr_rmse_avg"));
    assert_eq!(csv.lines().count(), 3);

    let e = err(dir, &[&["sweep", "shared", "--values", "20,10"], &common[..]].concat());
    assert!(e.contains("strictly increasing"), "{e}");
}

#[test]
fn help_lists_config_keys() {
    let tmp = tempfile::tempdir().unwrap();
    for sub in ["simulate", "train", "evaluate", "sweep", "compare"] {
        let help = err(tmp.path(), &[sub, "--help"]);
        for key in ["early_stop_patience", "frames_per_point", "n_symbols", "stl_bins", "step_size"] {
            assert!(help.contains(key), "{sub} --help lacks {key}");
        }
    }
}
