//! Evaluation metrics, multi-seed statistics and hyperparameter sweeps.
//!
//! Every table here is a pure function of its configuration: frames are
//! simulated once per master seed, re-histogrammed per bin count, and each
//! (value, network kind, seed) cell is trained independently. Cells run in
//! parallel and are assembled in canonical order.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp::EqualizerConfig;
use crate::error::{Error, Result};
use crate::features::{
    dataset_from_captures, simulate_captures, split_dataset, Capture, Dataset, DatasetSpec,
    LabeledExample, OsnrRange, Partition, N_CLASSES,
};
use crate::mtlnet::{
    init_network, train, EpochRecord, LossWeights, MtlNetwork, MtlTopology, Task, TrainConfig,
    TrainOutcome,
};
use crate::numfmt::sig17;
use crate::seed;
use crate::sigsim::{ModulationFormat, SimConfig};

/// Error statistics at one true OSNR value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OsnrError {
    pub true_osnr_db: f64,
    pub mean_est_db: f64,
    pub rmse_db: f64,
    pub count: usize,
}

/// Test metrics of one trained network. Fields for a task the network does
/// not have are `None` (or empty).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n_examples: usize,
    pub mfi_accuracy: Option<f64>,
    pub osnr_rmse_db: Option<f64>,
    /// Rows are true classes, columns predicted classes, in class-index order.
    pub confusion: Option<[[u64; N_CLASSES]; N_CLASSES]>,
    pub per_osnr_error: Vec<OsnrError>,
}

pub fn evaluate(
    net: &MtlNetwork,
    examples: &[&LabeledExample],
    range: &OsnrRange,
) -> Result<Metrics> {
    if examples.is_empty() {
        return Err(Error::EmptyPartition);
    }
    let mut confusion = [[0u64; N_CLASSES]; N_CLASSES];
    let mut pairs = Vec::new();
    for e in examples {
        let p = net.predict(&e.features, range)?;
        if let Some(f) = p.format {
            confusion[e.format.class_index()][f.class_index()] += 1;
        }
        if let Some(est) = p.osnr_db {
            pairs.push((e.osnr_db, est));
        }
    }
    let has_mfi = net.has_task(Task::Mfi);
    let total = examples.len() as f64;
    let trace: u64 = (0..N_CLASSES).map(|i| confusion[i][i]).sum();
    Ok(Metrics {
        n_examples: examples.len(),
        mfi_accuracy: has_mfi.then(|| trace as f64 / total),
        osnr_rmse_db: net.has_task(Task::Osnr).then(|| rmse(&pairs)),
        confusion: has_mfi.then_some(confusion),
        per_osnr_error: per_osnr_error(&pairs),
    })
}

/// Metrics on one partition of a split dataset.
pub fn evaluate_partition(net: &MtlNetwork, ds: &Dataset, part: Partition) -> Result<Metrics> {
    evaluate(net, &ds.subset(part), &ds.spec.osnr_range())
}

fn rmse(pairs: &[(f64, f64)]) -> f64 {
    let sq: f64 = pairs.iter().map(|(t, e)| (e - t).powi(2)).sum();
    (sq / pairs.len() as f64).sqrt()
}

/// Groups (true, estimated) pairs by true OSNR, ascending.
pub fn per_osnr_error(pairs: &[(f64, f64)]) -> Vec<OsnrError> {
    let mut sorted = pairs.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    sorted
        .chunk_by(|a, b| a.0 == b.0)
        .map(|group| OsnrError {
            true_osnr_db: group[0].0,
            mean_est_db: group.iter().map(|p| p.1).sum::<f64>() / group.len() as f64,
            rmse_db: rmse(group),
            count: group.len(),
        })
        .collect()
}

/// One row per example, sorted by true OSNR (ties keep input order).
pub fn scatter_true_vs_estimated(
    net: &MtlNetwork,
    examples: &[&LabeledExample],
    range: &OsnrRange,
) -> Result<Vec<(f64, f64)>> {
    if !net.has_task(Task::Osnr) {
        return Err(Error::InvalidConfig("network has no OSNR output".into()));
    }
    let mut rows = examples
        .iter()
        .map(|e| {
            let est = net.predict(&e.features, range)?.osnr_db.unwrap_or(f64::NAN);
            Ok((e.osnr_db, est))
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(rows)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub avg: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        Some(Self {
            avg: values.iter().sum::<f64>() / values.len() as f64,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }

    pub fn spread(&self) -> f64 {
        self.max - self.min
    }
}

/// Per-seed metrics and their aggregates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub seeds: Vec<u64>,
    pub metrics: Vec<Metrics>,
    pub accuracy: Option<Summary>,
    pub rmse_db: Option<Summary>,
}

impl RunStats {
    pub fn from_runs(seeds: Vec<u64>, metrics: Vec<Metrics>) -> Self {
        let acc: Option<Vec<f64>> = metrics.iter().map(|m| m.mfi_accuracy).collect();
        let rmse: Option<Vec<f64>> = metrics.iter().map(|m| m.osnr_rmse_db).collect();
        Self {
            accuracy: acc.and_then(|v| Summary::of(&v)),
            rmse_db: rmse.and_then(|v| Summary::of(&v)),
            seeds,
            metrics,
        }
    }
}

/// Seed of the `i`-th network in a multi-seed run.
pub fn run_seed(master: u64, i: usize) -> u64 {
    seed::mix(&[master, seed::TAG_RUN, i as u64])
}

/// Fresh network for `topology`, trained with init and shuffle seeds both
/// set to `seed`.
pub fn train_seeded(
    ds: &Dataset,
    topology: &MtlTopology,
    cfg: &TrainConfig,
    weights: LossWeights,
    seed: u64,
) -> Result<TrainOutcome> {
    let net = init_network(topology, seed)?;
    let cfg = TrainConfig { seed, ..cfg.clone() };
    train(net, ds, &cfg, weights)
}

fn train_and_test(
    ds: &Dataset,
    topology: &MtlTopology,
    cfg: &TrainConfig,
    weights: LossWeights,
    seed: u64,
) -> Result<Metrics> {
    let outcome = train_seeded(ds, topology, cfg, weights, seed)?;
    evaluate_partition(&outcome.net, ds, Partition::Test)
}

/// Trains `n_seeds` networks on the same split dataset and evaluates each on
/// its test partition.
pub fn multi_seed_run(
    ds: &Dataset,
    topology: &MtlTopology,
    cfg: &TrainConfig,
    weights: LossWeights,
    n_seeds: usize,
    master: u64,
) -> Result<RunStats> {
    if n_seeds == 0 {
        return Err(Error::InvalidConfig("n_seeds must be >= 1".into()));
    }
    let seeds: Vec<u64> = (0..n_seeds).map(|i| run_seed(master, i)).collect();
    let metrics = seeds
        .par_iter()
        .enumerate()
        .map(|(i, &s)| {
            train_and_test(ds, topology, cfg, weights, s).map_err(|e| Error::Seed {
                seed_index: i,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RunStats::from_runs(seeds, metrics))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetKind {
    Mtl,
    StlMfi,
    StlOsnr,
}

impl NetKind {
    pub const ALL: [NetKind; 3] = [NetKind::Mtl, NetKind::StlMfi, NetKind::StlOsnr];

    pub fn name(self) -> &'static str {
        match self {
            Self::Mtl => "mtl",
            Self::StlMfi => "stl_mfi",
            Self::StlOsnr => "stl_osnr",
        }
    }

    pub fn topology(self, bins: usize, shared: usize) -> MtlTopology {
        let mtl = MtlTopology::with_shared(bins, shared);
        match self {
            Self::Mtl => mtl,
            Self::StlMfi => mtl.make_stl(Task::Mfi),
            Self::StlOsnr => mtl.make_stl(Task::Osnr),
        }
    }
}

impl fmt::Display for NetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "mtl" => Ok(Self::Mtl),
            "stl_mfi" => Ok(Self::StlMfi),
            "stl_osnr" => Ok(Self::StlOsnr),
            _ => Err(Error::InvalidConfig(format!("unknown network kind {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    BinCount,
    SharedNeurons,
    LossRatio,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            Self::BinCount => "bin_count",
            Self::SharedNeurons => "shared_neurons",
            Self::LossRatio => "loss_ratio",
        }
    }

    pub fn default_values(self) -> Vec<f64> {
        let v: &[u32] = match self {
            Self::BinCount => &[50, 80, 100, 150, 200, 250, 300],
            Self::SharedNeurons => &[20, 40, 60, 80, 100, 110, 120, 140],
            Self::LossRatio => &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10],
        };
        v.iter().map(|&x| f64::from(x)).collect()
    }

    pub fn default_kinds(self) -> Vec<NetKind> {
        match self {
            Self::BinCount => NetKind::ALL.to_vec(),
            Self::SharedNeurons => vec![NetKind::Mtl, NetKind::StlOsnr],
            Self::LossRatio => vec![NetKind::Mtl],
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything a multi-seed experiment needs besides the swept axis.
///
/// `seed` is the master seed; it overrides `dataset.seed` and also keys the
/// split and the per-network seed schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub n_seeds: usize,
    pub sim: SimConfig,
    pub dataset: DatasetSpec,
    pub equalizer: EqualizerConfig,
    pub train: TrainConfig,
    /// Shared-layer width of the multi-task network.
    pub shared_neurons: usize,
    /// OSNR to MFI loss weight ratio.
    pub loss_ratio: f64,
    /// Bin count and shared width used for single-task networks.
    pub stl_bins: usize,
    pub stl_shared_neurons: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_seeds: 8,
            sim: SimConfig::default(),
            dataset: DatasetSpec::default(),
            equalizer: EqualizerConfig::default(),
            train: TrainConfig::default(),
            shared_neurons: 60,
            loss_ratio: 5.0,
            stl_bins: 200,
            stl_shared_neurons: 110,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_seeds == 0 {
            return Err(Error::InvalidConfig("n_seeds must be >= 1".into()));
        }
        if self.shared_neurons == 0 || self.stl_shared_neurons == 0 {
            return Err(Error::InvalidConfig("shared layer widths must be >= 1".into()));
        }
        if self.stl_bins < 2 {
            return Err(Error::InvalidConfig("stl_bins must be >= 2".into()));
        }
        self.sim.validate()?;
        self.dataset_spec().validate()?;
        self.equalizer.validate()?;
        self.train.validate()?;
        self.weights().validate()
    }

    pub fn dataset_spec(&self) -> DatasetSpec {
        DatasetSpec {
            seed: self.seed,
            ..self.dataset.clone()
        }
    }

    pub fn weights(&self) -> LossWeights {
        LossWeights::from_ratio(self.loss_ratio)
    }

    /// Simulated, equalized frames shared by every cell.
    pub fn captures(&self) -> Result<Vec<Capture>> {
        simulate_captures(&self.dataset_spec(), &self.sim, &self.equalizer)
    }

    /// Split dataset at `bins` from existing captures.
    pub fn dataset_at(&self, captures: &[Capture], bins: usize) -> Result<Dataset> {
        let spec = DatasetSpec {
            bin_count: bins,
            ..self.dataset_spec()
        };
        let ds = dataset_from_captures(captures, &spec, &self.sim, &self.equalizer)?;
        Ok(split_dataset(&ds, self.seed))
    }

    /// (bins, shared) at which `kind` is trained outside of sweeps.
    pub fn sizing(&self, kind: NetKind) -> (usize, usize) {
        match kind {
            NetKind::Mtl => (self.dataset.bin_count, self.shared_neurons),
            NetKind::StlMfi | NetKind::StlOsnr => (self.stl_bins, self.stl_shared_neurons),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub kinds: Vec<NetKind>,
    pub base: ExperimentConfig,
}

impl SweepSpec {
    pub fn new(param: SweepParam, base: ExperimentConfig) -> Self {
        Self {
            param,
            values: param.default_values(),
            kinds: param.default_kinds(),
            base,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.values.is_empty() {
            return bad("sweep values must be nonempty".into());
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return bad("sweep values must be finite".into());
        }
        if self.values.windows(2).any(|w| w[1] <= w[0]) {
            return bad("sweep values must be strictly increasing".into());
        }
        match self.param {
            SweepParam::BinCount | SweepParam::SharedNeurons => {
                let min = if self.param == SweepParam::BinCount { 2.0 } else { 1.0 };
                if self.values.iter().any(|&v| v.fract() != 0.0 || v < min) {
                    return bad(format!("{} values must be integers >= {min}", self.param));
                }
            }
            SweepParam::LossRatio => {
                if self.values.iter().any(|&v| v < 0.0) {
                    return bad("loss ratios must be >= 0".into());
                }
            }
        }
        if self.kinds.is_empty() {
            return bad("sweep needs at least one network kind".into());
        }
        let mut kinds = self.kinds.clone();
        kinds.sort();
        kinds.dedup();
        if kinds.len() != self.kinds.len() {
            return bad("network kinds must not repeat".into());
        }
        self.base.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// Swept value; `None` for reference rows outside the sweep axis.
    pub value: Option<f64>,
    pub kind: NetKind,
    pub bins: usize,
    pub shared_neurons: usize,
    pub loss_ratio: f64,
    pub n_neurons: usize,
    pub n_params: usize,
    pub stats: RunStats,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub param: SweepParam,
    pub rows: Vec<SweepRow>,
    /// Single-task OSNR reference, present for loss-ratio sweeps.
    pub baseline: Option<SweepRow>,
}

impl SweepTable {
    /// Swept value with the lowest average RMSE for `kind`; ties go to the
    /// smaller value.
    pub fn argmin(&self, kind: NetKind) -> Option<&SweepRow> {
        let mut best: Option<&SweepRow> = None;
        for row in self.rows.iter().filter(|r| r.kind == kind) {
            let Some(r) = row.stats.rmse_db else { continue };
            let better = match best.and_then(|b| b.stats.rmse_db.map(|s| (b, s))) {
                None => true,
                Some((b, s)) => r.avg < s.avg || (r.avg == s.avg && row.value < b.value),
            };
            if better {
                best = Some(row);
            }
        }
        best
    }
}

#[derive(Clone, Debug)]
struct Cell {
    value: Option<f64>,
    kind: NetKind,
    bins: usize,
    shared: usize,
    ratio: f64,
}

fn run_cells(base: &ExperimentConfig, cells: &[Cell]) -> Result<Vec<SweepRow>> {
    let captures = base.captures()?;
    let mut datasets = BTreeMap::new();
    for c in cells {
        if let Entry::Vacant(e) = datasets.entry(c.bins) {
            e.insert(base.dataset_at(&captures, c.bins)?);
        }
    }
    drop(captures);

    let seeds: Vec<u64> = (0..base.n_seeds).map(|i| run_seed(base.seed, i)).collect();
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..seeds.len()).map(move |s| (c, s)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(c, s)| {
            let cell = &cells[c];
            let topology = cell.kind.topology(cell.bins, cell.shared);
            train_and_test(
                &datasets[&cell.bins],
                &topology,
                &base.train,
                LossWeights::from_ratio(cell.ratio),
                seeds[s],
            )
            .map_err(|e| Error::SweepCell {
                value: cell.value.unwrap_or(f64::NAN),
                kind: cell.kind.name().into(),
                source: Box::new(Error::Seed {
                    seed_index: s,
                    source: Box::new(e),
                }),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(cells
        .iter()
        .zip(results.chunks(seeds.len()))
        .map(|(cell, metrics)| {
            let topology = cell.kind.topology(cell.bins, cell.shared);
            SweepRow {
                value: cell.value,
                kind: cell.kind,
                bins: cell.bins,
                shared_neurons: cell.shared,
                loss_ratio: cell.ratio,
                n_neurons: topology.count_neurons(),
                n_params: topology.count_parameters(),
                stats: RunStats::from_runs(seeds.clone(), metrics.to_vec()),
            }
        })
        .collect())
}

fn sweep_cells(spec: &SweepSpec) -> Vec<Cell> {
    let base = &spec.base;
    let mut cells = Vec::new();
    for &v in &spec.values {
        for &kind in &spec.kinds {
            let (bins, shared) = base.sizing(kind);
            let value = Some(v);
            let cell = match spec.param {
                SweepParam::BinCount => {
                    let b = v as usize;
                    Cell { value, kind, bins: b, shared: b.div_ceil(2), ratio: base.loss_ratio }
                }
                SweepParam::SharedNeurons => {
                    Cell { value, kind, bins, shared: v as usize, ratio: base.loss_ratio }
                }
                SweepParam::LossRatio => Cell { value, kind, bins, shared, ratio: v },
            };
            cells.push(cell);
        }
    }
    cells
}

/// Runs any sweep. Loss-ratio sweeps also train the single-task OSNR
/// reference at its own sizing.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepTable> {
    spec.validate()?;
    let mut cells = sweep_cells(spec);
    let with_baseline = spec.param == SweepParam::LossRatio;
    if with_baseline {
        let (bins, shared) = spec.base.sizing(NetKind::StlOsnr);
        cells.push(Cell {
            value: None,
            kind: NetKind::StlOsnr,
            bins,
            shared,
            ratio: spec.base.loss_ratio,
        });
    }
    let mut rows = run_cells(&spec.base, &cells)?;
    let baseline = if with_baseline { rows.pop() } else { None };
    Ok(SweepTable {
        param: spec.param,
        rows,
        baseline,
    })
}

fn run_param(spec: &SweepSpec, param: SweepParam) -> Result<SweepTable> {
    if spec.param != param {
        return Err(Error::InvalidConfig(format!(
            "expected a {param} sweep, got {}",
            spec.param
        )));
    }
    run_sweep(spec)
}

/// Accuracy and RMSE versus bin count; the shared layer is half the bins.
pub fn sweep_bins(spec: &SweepSpec) -> Result<SweepTable> {
    run_param(spec, SweepParam::BinCount)
}

/// RMSE versus shared-layer width, multi-task at the default bin count and
/// single-task at `stl_bins`.
pub fn sweep_shared_neurons(spec: &SweepSpec) -> Result<SweepTable> {
    run_param(spec, SweepParam::SharedNeurons)
}

/// RMSE versus the OSNR:MFI loss weight ratio with a single-task baseline.
pub fn sweep_loss_ratio(spec: &SweepSpec) -> Result<SweepTable> {
    run_param(spec, SweepParam::LossRatio)
}

/// Multi-task network against both single-task networks, each at its own
/// sizing.
pub fn compare_stl_mtl(base: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    base.validate()?;
    let cells: Vec<Cell> = NetKind::ALL
        .iter()
        .map(|&kind| {
            let (bins, shared) = base.sizing(kind);
            Cell { value: None, kind, bins, shared, ratio: base.loss_ratio }
        })
        .collect();
    run_cells(base, &cells)
}

fn opt(x: Option<f64>) -> String {
    x.map(sig17).unwrap_or_default()
}

/// Integers print bare, everything else at 17 significant digits.
pub fn format_value(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        sig17(v)
    }
}

fn stat_fields(stats: &RunStats) -> [String; 6] {
    let a = stats.accuracy;
    let r = stats.rmse_db;
    [
        opt(a.map(|s| s.avg)),
        opt(a.map(|s| s.min)),
        opt(a.map(|s| s.max)),
        opt(r.map(|s| s.avg)),
        opt(r.map(|s| s.min)),
        opt(r.map(|s| s.max)),
    ]
}

pub const SWEEP_CSV_HEADER: &str =
    "value,kind,acc_avg,acc_min,acc_max,rmse_avg,rmse_min,rmse_max,n_neurons,n_params";

pub fn write_sweep_csv<W: Write>(table: &SweepTable, mut w: W) -> Result<()> {
    let baseline = table.baseline.as_ref().map(|b| opt(b.stats.rmse_db.map(|s| s.avg)));
    write!(w, "{SWEEP_CSV_HEADER}")?;
    if baseline.is_some() {
        write!(w, ",stl_osnr_rmse_avg")?;
    }
    writeln!(w)?;
    for row in &table.rows {
        write!(
            w,
            "{},{},{},{},{}",
            row.value.map(format_value).unwrap_or_default(),
            row.kind,
            stat_fields(&row.stats).join(","),
            row.n_neurons,
            row.n_params
        )?;
        if let Some(b) = &baseline {
            write!(w, ",{b}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub const COMPARISON_CSV_HEADER: &str = "kind,bins,shared_neurons,n_neurons,n_params,\
acc_avg,acc_min,acc_max,rmse_avg,rmse_min,rmse_max,rmse_spread";

pub fn write_comparison_csv<W: Write>(rows: &[SweepRow], mut w: W) -> Result<()> {
    writeln!(w, "{COMPARISON_CSV_HEADER}")?;
    for row in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            row.kind,
            row.bins,
            row.shared_neurons,
            row.n_neurons,
            row.n_params,
            stat_fields(&row.stats).join(","),
            opt(row.stats.rmse_db.map(|s| s.spread()))
        )?;
    }
    Ok(())
}

pub fn write_scatter_csv<W: Write>(rows: &[(f64, f64)], mut w: W) -> Result<()> {
    writeln!(w, "true_osnr_db,est_osnr_db")?;
    for (t, e) in rows {
        writeln!(w, "{},{}", sig17(*t), sig17(*e))?;
    }
    Ok(())
}

pub fn write_history_csv<W: Write>(history: &[EpochRecord], mut w: W) -> Result<()> {
    writeln!(w, "epoch,train_loss,val_loss,val_acc,val_rmse_db")?;
    for r in history {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.epoch,
            sig17(r.train_loss),
            sig17(r.val_loss),
            sig17(r.val_acc),
            sig17(r.val_rmse_db)
        )?;
    }
    Ok(())
}

/// Per-format counts in `examples`, in class-index order.
pub fn class_counts(examples: &[&LabeledExample]) -> [u64; N_CLASSES] {
    let mut counts = [0; N_CLASSES];
    for e in examples {
        counts[ModulationFormat::class_index(e.format)] += 1;
    }
    counts
}
