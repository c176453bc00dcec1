use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use opmon_core::experiments::{
    self, compare_stl_mtl, evaluate_partition, run_seed, run_sweep, scatter_true_vs_estimated,
    train_seeded, NetKind, SweepParam, SweepSpec, SweepTable,
};
use opmon_core::features::{load_dataset, save_dataset, sidecar_path, FeatureMode};
use opmon_core::mtlnet::{load_model, save_model, MfiLoss};
use opmon_core::{LossWeights, Partition, Task};
use serde::Serialize;

use crate::config::RunConfig;
use crate::{
    Cli, Command, CompareArgs, DatasetArgs, EvaluateArgs, PartitionArg, SimulateArgs, SweepArgs,
    SweepKind, TrainArgs, TrainingArgs,
};

/// Runs one command, writing its report to `w`.
pub fn run(cli: Cli, w: &mut dyn Write) -> Result<()> {
    if let Some(n) = cli.common.jobs {
        ensure!(n >= 1, "--jobs must be at least 1");
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot start worker pool")?;
    }
    let mut cfg = RunConfig::load(cli.common.config.as_deref())?;
    if let Some(seed) = cli.common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.common.out {
        cfg.out = out;
    }
    let out = OutputDir {
        dir: cfg.out.clone(),
        force: cli.common.force,
    };
    match cli.command {
        Command::Simulate(args) => simulate(cfg, &out, args, w),
        Command::Train(args) => train(cfg, &out, args, w),
        Command::Evaluate(args) => evaluate(cfg, &out, args, w),
        Command::Sweep(args) => sweep(cfg, &out, args, w),
        Command::Compare(args) => compare(cfg, &out, args, w),
    }
}

struct OutputDir {
    dir: PathBuf,
    force: bool,
}

impl OutputDir {
    /// Paths for `names`, refusing existing files unless forced.
    fn claim(&self, names: &[&str]) -> Result<Vec<PathBuf>> {
        let paths: Vec<PathBuf> = names.iter().map(|n| self.dir.join(n)).collect();
        if !self.force {
            if let Some(p) = paths.iter().find(|p| p.exists()) {
                bail!("{} already exists (pass --force to overwrite)", p.display());
            }
        }
        fs::create_dir_all(&self.dir)
            .with_context(|| format!("cannot create {}", self.dir.display()))?;
        Ok(paths)
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    write_file(path, text.as_bytes())
}

fn apply_dataset(cfg: &mut RunConfig, a: &DatasetArgs) {
    let d = &mut cfg.dataset;
    if let Some(n) = a.frames_per_point {
        d.frames_per_point = n;
    }
    if let Some(f) = &a.formats {
        d.formats = f.clone();
    }
    if let Some(g) = &a.osnr {
        d.osnr_grid = g.clone();
    }
    if let Some(b) = a.bins {
        d.bin_count = b;
    }
    if let Some(n) = a.n_symbols {
        cfg.sim.n_symbols = n;
    }
    if a.stratified {
        d.stratified = true;
    }
    if a.raw_counts {
        d.feature_mode = FeatureMode::RawCount;
    }
}

fn apply_training(cfg: &mut RunConfig, a: &TrainingArgs) {
    let t = &mut cfg.train;
    if let Some(lr) = a.learning_rate {
        t.learning_rate = lr;
    }
    if let Some(b) = a.batch_size {
        t.batch_size = b;
    }
    if let Some(e) = a.max_epochs {
        t.max_epochs = e;
    }
    if let Some(p) = a.patience {
        t.early_stop_patience = p;
    }
    if a.cross_entropy {
        t.mfi_loss = MfiLoss::CrossEntropy;
    }
    if let Some(r) = a.loss_ratio {
        cfg.loss_ratio = r;
    }
    if let Some(s) = a.shared {
        cfg.shared_neurons = s;
    }
}

fn simulate(
    mut cfg: RunConfig,
    out: &OutputDir,
    args: SimulateArgs,
    w: &mut dyn Write,
) -> Result<()> {
    apply_dataset(&mut cfg, &args.dataset);
    cfg.validate()?;
    let paths = out.claim(&["dataset.csv", "dataset.json"])?;
    let exp = cfg.experiment();
    let captures = exp.captures()?;
    let ds = exp.dataset_at(&captures, exp.dataset.bin_count)?;
    save_dataset(&ds, &paths[0])?;

    let reloaded = load_dataset(&paths[0])?;
    ensure!(reloaded.len() == ds.len(), "dataset did not reload cleanly");
    let (train, val, test) = ds.partition_counts();
    let noun = if ds.len() == 1 { "example" } else { "examples" };
    writeln!(
        w,
        "{} {noun} ({train} train / {val} val / {test} test)",
        ds.len()
    )?;
    Ok(())
}

#[derive(Serialize)]
struct TrainSidecar<'a> {
    dataset: &'a Path,
    kind: NetKind,
    bins: usize,
    shared_neurons: usize,
    loss_weights: LossWeights,
    network_seed: u64,
    best_epoch: usize,
    config: &'a RunConfig,
}

fn train(mut cfg: RunConfig, out: &OutputDir, args: TrainArgs, w: &mut dyn Write) -> Result<()> {
    apply_training(&mut cfg, &args.training);
    let kind = args.stl.map_or(NetKind::Mtl, |t| t.kind());
    if kind != NetKind::Mtl {
        if let Some(s) = args.training.shared {
            cfg.stl_shared_neurons = s;
        }
    }
    cfg.validate()?;
    let dataset_path = args.dataset.unwrap_or_else(|| cfg.out.join("dataset.csv"));
    let paths = out.claim(&["model.json", "history.csv", "history.json"])?;
    let ds = load_dataset(&dataset_path)
        .with_context(|| format!("cannot load dataset {}", dataset_path.display()))?;
    ensure!(
        ds.is_partitioned(),
        "{} has no train/val/test assignment",
        dataset_path.display()
    );

    let exp = cfg.experiment();
    let bins = ds.bin_count();
    let shared = exp.sizing(kind).1;
    let topology = kind.topology(bins, shared);
    let weights = exp.weights();
    let seed = run_seed(cfg.seed, 0);
    let outcome = train_seeded(&ds, &topology, &exp.train, weights, seed)?;

    save_model(&outcome.net, &paths[0])?;
    let mut history = Vec::new();
    experiments::write_history_csv(&outcome.history, &mut history)?;
    write_file(&paths[1], &history)?;
    write_json(
        &paths[2],
        &TrainSidecar {
            dataset: &dataset_path,
            kind,
            bins,
            shared_neurons: shared,
            loss_weights: weights,
            network_seed: seed,
            best_epoch: outcome.best_epoch,
            config: &cfg,
        },
    )?;

    load_model(&paths[0])?;
    let best = &outcome.history[outcome.best_epoch.max(1) - 1];
    writeln!(
        w,
        "{kind}: {} neurons, {} parameters; best epoch {} of {} (val loss {:.6})",
        topology.count_neurons(),
        topology.count_parameters(),
        outcome.best_epoch,
        outcome.history.len(),
        best.val_loss
    )?;
    Ok(())
}

#[derive(Serialize)]
struct EvaluateSidecar<'a> {
    model: &'a Path,
    dataset: &'a Path,
    partition: Partition,
}

fn evaluate(cfg: RunConfig, out: &OutputDir, args: EvaluateArgs, w: &mut dyn Write) -> Result<()> {
    let model_path = args.model.unwrap_or_else(|| cfg.out.join("model.json"));
    let dataset_path = args.dataset.unwrap_or_else(|| cfg.out.join("dataset.csv"));
    let partition = match args.partition {
        PartitionArg::Train => Partition::Train,
        PartitionArg::Val => Partition::Val,
        PartitionArg::Test => Partition::Test,
    };
    let net = load_model(&model_path)
        .with_context(|| format!("cannot load model {}", model_path.display()))?;
    let ds = load_dataset(&dataset_path)
        .with_context(|| format!("cannot load dataset {}", dataset_path.display()))?;
    ensure!(
        net.topology.input_size == ds.bin_count(),
        "shape mismatch: model {} expects {} inputs but dataset {} has {} bins",
        model_path.display(),
        net.topology.input_size,
        dataset_path.display(),
        ds.bin_count()
    );
    let has_osnr = net.has_task(Task::Osnr);
    let mut names = vec!["metrics.json"];
    if has_osnr {
        names.extend(["scatter.csv", "scatter.json"]);
    }
    let paths = out.claim(&names)?;

    let metrics = evaluate_partition(&net, &ds, partition)
        .with_context(|| format!("cannot evaluate the {partition} partition"))?;
    write_json(&paths[0], &metrics)?;
    let text = fs::read_to_string(&paths[0])?;
    serde_json::from_str::<experiments::Metrics>(&text).context("metrics did not reload")?;

    if has_osnr {
        let rows = scatter_true_vs_estimated(&net, &ds.subset(partition), &ds.spec.osnr_range())?;
        let mut buf = Vec::new();
        experiments::write_scatter_csv(&rows, &mut buf)?;
        write_file(&paths[1], &buf)?;
        debug_assert_eq!(sidecar_path(&paths[1]), paths[2]);
        write_json(
            &paths[2],
            &EvaluateSidecar {
                model: &model_path,
                dataset: &dataset_path,
                partition,
            },
        )?;
    }

    let mut line = format!("{partition}: {} examples", metrics.n_examples);
    if let Some(acc) = metrics.mfi_accuracy {
        line += &format!(", MFI accuracy {acc:.4}");
    }
    if let Some(rmse) = metrics.osnr_rmse_db {
        line += &format!(", OSNR RMSE {rmse:.4} dB");
    }
    writeln!(w, "{line}")?;
    Ok(())
}

#[derive(Serialize)]
struct SweepSidecar<'a> {
    spec: &'a SweepSpec,
    table: &'a SweepTable,
    config: &'a RunConfig,
}

fn sweep(mut cfg: RunConfig, out: &OutputDir, args: SweepArgs, w: &mut dyn Write) -> Result<()> {
    apply_dataset(&mut cfg, &args.dataset);
    apply_training(&mut cfg, &args.training);
    if let Some(n) = args.n_seeds {
        cfg.n_seeds = n;
    }
    if let Some(v) = args.values {
        cfg.sweep.values = Some(v);
    }
    if let Some(k) = args.kinds {
        cfg.sweep.kinds = Some(k);
    }
    let param = match args.kind {
        SweepKind::Bins => SweepParam::BinCount,
        SweepKind::Shared => SweepParam::SharedNeurons,
        SweepKind::LossRatio => SweepParam::LossRatio,
    };
    let mut spec = SweepSpec::new(param, cfg.experiment());
    if let Some(v) = &cfg.sweep.values {
        spec.values = v.clone();
    }
    if let Some(k) = &cfg.sweep.kinds {
        spec.kinds = k.clone();
    }
    spec.validate()?;
    let stem = format!("sweep_{}", param.name());
    let paths = out.claim(&[&format!("{stem}.csv"), &format!("{stem}.json")])?;

    let table = run_sweep(&spec)?;
    let mut buf = Vec::new();
    experiments::write_sweep_csv(&table, &mut buf)?;
    write_file(&paths[0], &buf)?;
    write_json(
        &paths[1],
        &SweepSidecar {
            spec: &spec,
            table: &table,
            config: &cfg,
        },
    )?;

    w.write_all(&buf)?;
    for kind in &spec.kinds {
        if let Some(row) = table.argmin(*kind) {
            let rmse = row.stats.rmse_db.map_or(f64::NAN, |s| s.avg);
            let acc = row
                .stats
                .accuracy
                .map_or(String::new(), |s| format!(", acc_avg {:.4}", s.avg));
            writeln!(
                w,
                "optimum {kind}: {} = {} (rmse_avg {rmse:.4} dB{acc})",
                param,
                row.value.map(experiments::format_value).unwrap_or_default()
            )?;
        }
    }
    if let Some(b) = table.baseline.as_ref().and_then(|b| b.stats.rmse_db) {
        writeln!(w, "stl_osnr baseline: rmse_avg {:.4} dB", b.avg)?;
    }
    Ok(())
}

fn compare(
    mut cfg: RunConfig,
    out: &OutputDir,
    args: CompareArgs,
    w: &mut dyn Write,
) -> Result<()> {
    apply_dataset(&mut cfg, &args.dataset);
    apply_training(&mut cfg, &args.training);
    if let Some(n) = args.n_seeds {
        cfg.n_seeds = n;
    }
    cfg.validate()?;
    let paths = out.claim(&["compare.csv", "compare.json"])?;
    let rows = compare_stl_mtl(&cfg.experiment())?;
    let mut buf = Vec::new();
    experiments::write_comparison_csv(&rows, &mut buf)?;
    write_file(&paths[0], &buf)?;
    write_json(
        &paths[1],
        &serde_json::json!({ "rows": rows, "config": cfg }),
    )?;
    w.write_all(&buf)?;
    Ok(())
}
