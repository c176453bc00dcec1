//! Amplitude-histogram features and the labelled dataset built from them.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp::{self, EqualizedFrame, EqualizerConfig};
use crate::error::{Error, Result};
use crate::numfmt::{parse_f64, sig17};
use crate::seed;
use crate::sigsim::{self, ModulationFormat, SimConfig};

pub const N_CLASSES: usize = 3;
pub const DATASET_FORMAT_VERSION: u32 = 1;

/// Occurrence counts over `bin_count` equal bins of [0, 1]. Bin `i` covers
/// `[i/B, (i+1)/B)`; the last bin also takes 1.0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AmplitudeHistogram {
    pub counts: Vec<u64>,
}

impl AmplitudeHistogram {
    pub fn bin_count(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn relative_frequencies(&self) -> Vec<f64> {
        let total = self.total() as f64;
        self.counts.iter().map(|&c| c as f64 / total).collect()
    }
}

pub fn compute_histogram(amplitudes: &[f64], bin_count: usize) -> AmplitudeHistogram {
    assert!(bin_count >= 2, "need at least two bins");
    let mut counts = vec![0u64; bin_count];
    for &a in amplitudes {
        debug_assert!((0.0..=1.0).contains(&a), "amplitude {a} outside [0, 1]");
        let i = ((a * bin_count as f64) as usize).min(bin_count - 1);
        counts[i] += 1;
    }
    AmplitudeHistogram { counts }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    /// counts / total
    #[default]
    RelativeFrequency,
    RawCount,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Partition {
    Unassigned,
    Train,
    Val,
    Test,
}

impl Partition {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Unassigned => "none",
            Self::Train => "train",
            Self::Val => "val",
            Self::Test => "test",
        }
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Partition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(Self::Unassigned),
            "train" => Ok(Self::Train),
            "val" => Ok(Self::Val),
            "test" => Ok(Self::Test),
            other => Err(format!("unknown partition {other:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledExample {
    pub format: ModulationFormat,
    pub osnr_db: f64,
    pub frame_index: usize,
    pub features: Vec<f64>,
    pub format_onehot: [f64; N_CLASSES],
    pub osnr_norm: f64,
}

/// OSNR range used for min-max normalization of the regression target.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OsnrRange {
    pub min: f64,
    pub max: f64,
}

impl OsnrRange {
    pub fn from_grid(grid: &[f64]) -> Self {
        let min = grid.iter().copied().fold(f64::INFINITY, f64::min);
        let max = grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self { min, max }
    }

    pub fn normalize(&self, osnr_db: f64) -> f64 {
        if self.max > self.min {
            (osnr_db - self.min) / (self.max - self.min)
        } else {
            0.0
        }
    }

    /// Inverse of [`normalize`](Self::normalize); not clamped.
    pub fn decode(&self, norm: f64) -> f64 {
        self.min + norm * (self.max - self.min)
    }
}

/// One-hot class vector (order OOK, PAM4, PAM8) and normalized OSNR.
pub fn encode_targets(
    format: ModulationFormat,
    osnr_db: f64,
    grid: &[f64],
    formats: &[ModulationFormat],
) -> Result<([f64; N_CLASSES], f64)> {
    if !formats.contains(&format) {
        return Err(Error::UnknownFormat(format));
    }
    let range = OsnrRange::from_grid(grid);
    if !(osnr_db >= range.min && osnr_db <= range.max) {
        return Err(Error::OutOfGrid {
            osnr_db,
            min: range.min,
            max: range.max,
        });
    }
    let mut onehot = [0.0; N_CLASSES];
    onehot[format.class_index()] = 1.0;
    Ok((onehot, range.normalize(osnr_db)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSpec {
    pub osnr_grid: Vec<f64>,
    pub formats: Vec<ModulationFormat>,
    pub frames_per_point: usize,
    pub bin_count: usize,
    pub train_frac: f64,
    pub test_frac: f64,
    pub val_frac_of_train: f64,
    /// Split each format separately instead of one global permutation.
    pub stratified: bool,
    pub feature_mode: FeatureMode,
    pub seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            osnr_grid: (32..=45).map(f64::from).collect(),
            formats: ModulationFormat::ALL.to_vec(),
            frames_per_point: 10,
            bin_count: 100,
            train_frac: 0.95,
            test_frac: 0.05,
            val_frac_of_train: 0.10,
            stratified: false,
            feature_mode: FeatureMode::RelativeFrequency,
            seed: 0,
        }
    }
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.osnr_grid.is_empty() {
            return bad("osnr_grid must be nonempty".into());
        }
        if self.osnr_grid.iter().any(|v| !v.is_finite()) {
            return bad("osnr_grid must be finite".into());
        }
        if self.osnr_grid.windows(2).any(|w| w[1] <= w[0]) {
            return bad("osnr_grid must be strictly increasing".into());
        }
        if self.formats.is_empty() {
            return bad("formats must be nonempty".into());
        }
        let mut seen = self.formats.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.formats.len() {
            return bad("formats must not repeat".into());
        }
        if self.frames_per_point == 0 {
            return bad("frames_per_point must be >= 1".into());
        }
        if self.bin_count < 2 {
            return bad(format!("bin_count must be >= 2, got {}", self.bin_count));
        }
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !unit(self.train_frac) || !unit(self.test_frac) || !unit(self.val_frac_of_train) {
            return bad("split fractions must lie in [0, 1]".into());
        }
        if (self.train_frac + self.test_frac - 1.0).abs() > 1e-9 {
            return bad(format!(
                "train_frac + test_frac must be 1, got {}",
                self.train_frac + self.test_frac
            ));
        }
        Ok(())
    }

    pub fn n_examples(&self) -> usize {
        self.osnr_grid.len() * self.formats.len() * self.frames_per_point
    }

    pub fn osnr_range(&self) -> OsnrRange {
        OsnrRange::from_grid(&self.osnr_grid)
    }

    /// (train, val, test) sizes for `n` examples.
    pub fn split_sizes(&self, n: usize) -> (usize, usize, usize) {
        let test = floor_frac(self.test_frac, n);
        let val = floor_frac(self.val_frac_of_train, n - test);
        (n - test - val, val, test)
    }
}

// The small bias absorbs products like 0.05 * 420 landing a hair under an integer.
fn floor_frac(frac: f64, n: usize) -> usize {
    ((frac * n as f64 + 1e-9).floor() as usize).min(n)
}

/// Equalized amplitudes for one (format, OSNR, frame) tuple, kept so the
/// same captures can be re-histogrammed at any bin count.
#[derive(Clone, Debug)]
pub struct Capture {
    pub format: ModulationFormat,
    pub osnr_db: f64,
    pub frame_index: usize,
    pub frame: EqualizedFrame,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub spec: DatasetSpec,
    pub sim: SimConfig,
    pub equalizer: EqualizerConfig,
    pub split_seed: Option<u64>,
    pub examples: Vec<LabeledExample>,
    pub partition: Vec<Partition>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn bin_count(&self) -> usize {
        self.spec.bin_count
    }

    pub fn indices(&self, part: Partition) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.partition[i] == part).collect()
    }

    pub fn subset(&self, part: Partition) -> Vec<&LabeledExample> {
        self.examples
            .iter()
            .zip(&self.partition)
            .filter(|(_, p)| **p == part)
            .map(|(e, _)| e)
            .collect()
    }

    /// (train, val, test) counts.
    pub fn partition_counts(&self) -> (usize, usize, usize) {
        let count = |p| self.partition.iter().filter(|&&q| q == p).count();
        (count(Partition::Train), count(Partition::Val), count(Partition::Test))
    }

    pub fn is_partitioned(&self) -> bool {
        !self.partition.contains(&Partition::Unassigned)
    }
}

/// Runs simulation and the receiver chain for every tuple, in canonical
/// order (format, then OSNR, then frame index).
pub fn simulate_captures(
    spec: &DatasetSpec,
    sim: &SimConfig,
    eq: &EqualizerConfig,
) -> Result<Vec<Capture>> {
    spec.validate()?;
    sim.validate()?;
    eq.validate()?;
    let tuples: Vec<(ModulationFormat, usize, usize)> = spec
        .formats
        .iter()
        .flat_map(|&f| {
            (0..spec.osnr_grid.len())
                .flat_map(move |o| (0..spec.frames_per_point).map(move |k| (f, o, k)))
        })
        .collect();
    tuples
        .par_iter()
        .map(|&(format, osnr_index, frame_index)| {
            let osnr_db = spec.osnr_grid[osnr_index];
            let cfg = SimConfig {
                osnr_db,
                seed: sigsim::frame_seed(spec.seed, format, osnr_index, frame_index),
                ..sim.clone()
            };
            sigsim::simulate_frame(format, &cfg)
                .and_then(|frame| dsp::receive(&frame, eq))
                .map(|frame| Capture {
                    format,
                    osnr_db,
                    frame_index,
                    frame,
                })
                .map_err(|e| Error::Pipeline {
                    format,
                    osnr_db,
                    frame: frame_index,
                    source: Box::new(e),
                })
        })
        .collect()
}

pub fn make_example(
    capture: &Capture,
    spec: &DatasetSpec,
) -> Result<LabeledExample> {
    let hist = compute_histogram(&capture.frame.amplitudes, spec.bin_count);
    let features = match spec.feature_mode {
        FeatureMode::RelativeFrequency => hist.relative_frequencies(),
        FeatureMode::RawCount => hist.counts.iter().map(|&c| c as f64).collect(),
    };
    let (format_onehot, osnr_norm) =
        encode_targets(capture.format, capture.osnr_db, &spec.osnr_grid, &spec.formats)?;
    Ok(LabeledExample {
        format: capture.format,
        osnr_db: capture.osnr_db,
        frame_index: capture.frame_index,
        features,
        format_onehot,
        osnr_norm,
    })
}

/// Histograms existing captures at `spec.bin_count`.
pub fn dataset_from_captures(
    captures: &[Capture],
    spec: &DatasetSpec,
    sim: &SimConfig,
    eq: &EqualizerConfig,
) -> Result<Dataset> {
    spec.validate()?;
    let examples = captures
        .iter()
        .map(|c| make_example(c, spec))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        spec: spec.clone(),
        sim: sim.clone(),
        equalizer: eq.clone(),
        split_seed: None,
        partition: vec![Partition::Unassigned; examples.len()],
        examples,
    })
}

pub fn build_dataset(spec: &DatasetSpec, sim: &SimConfig, eq: &EqualizerConfig) -> Result<Dataset> {
    let captures = simulate_captures(spec, sim, eq)?;
    dataset_from_captures(&captures, spec, sim, eq)
}

/// Random train/val/test assignment.
///
/// `test = floor(test_frac * N)`, `val = floor(val_frac_of_train * (N - test))`,
/// the rest is training data.
pub fn split_dataset(ds: &Dataset, split_seed: u64) -> Dataset {
    let mut out = ds.clone();
    out.split_seed = Some(split_seed);
    let mut rng = seed::rng(seed::mix(&[split_seed, seed::TAG_SPLIT]));
    let groups: Vec<Vec<usize>> = if ds.spec.stratified {
        ds.spec
            .formats
            .iter()
            .map(|&f| (0..ds.len()).filter(|&i| ds.examples[i].format == f).collect())
            .collect()
    } else {
        vec![(0..ds.len()).collect()]
    };
    for mut group in groups {
        group.shuffle(&mut rng);
        let (_, val, test) = ds.spec.split_sizes(group.len());
        for (rank, &i) in group.iter().enumerate() {
            out.partition[i] = if rank < test {
                Partition::Test
            } else if rank < test + val {
                Partition::Val
            } else {
                Partition::Train
            };
        }
    }
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSeeds {
    pub master: u64,
    pub split: Option<u64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub feature_mode: FeatureMode,
    pub train_frac: f64,
    pub test_frac: f64,
    pub val_frac_of_train: f64,
    pub stratified: bool,
    pub sim: SimConfig,
    pub equalizer: EqualizerConfig,
}

/// Sidecar metadata written next to a dataset CSV.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetMeta {
    pub format_version: u32,
    pub bin_count: usize,
    pub osnr_grid: Vec<f64>,
    pub formats: Vec<ModulationFormat>,
    pub frames_per_point: usize,
    pub seeds: DatasetSeeds,
    pub pipeline_config: PipelineConfig,
}

impl DatasetMeta {
    fn of(ds: &Dataset) -> Self {
        let s = &ds.spec;
        Self {
            format_version: DATASET_FORMAT_VERSION,
            bin_count: s.bin_count,
            osnr_grid: s.osnr_grid.clone(),
            formats: s.formats.clone(),
            frames_per_point: s.frames_per_point,
            seeds: DatasetSeeds {
                master: s.seed,
                split: ds.split_seed,
            },
            pipeline_config: PipelineConfig {
                feature_mode: s.feature_mode,
                train_frac: s.train_frac,
                test_frac: s.test_frac,
                val_frac_of_train: s.val_frac_of_train,
                stratified: s.stratified,
                sim: ds.sim.clone(),
                equalizer: ds.equalizer.clone(),
            },
        }
    }

    fn spec(&self) -> DatasetSpec {
        let p = &self.pipeline_config;
        DatasetSpec {
            osnr_grid: self.osnr_grid.clone(),
            formats: self.formats.clone(),
            frames_per_point: self.frames_per_point,
            bin_count: self.bin_count,
            train_frac: p.train_frac,
            test_frac: p.test_frac,
            val_frac_of_train: p.val_frac_of_train,
            stratified: p.stratified,
            feature_mode: p.feature_mode,
            seed: self.seeds.master,
        }
    }
}

/// `data.csv` -> `data.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

pub fn dataset_csv_header(bin_count: usize) -> String {
    let mut h = String::from("format,osnr_db,frame_index,partition");
    for i in 0..bin_count {
        h.push_str(&format!(",bin_{i}"));
    }
    h
}

pub fn write_dataset_csv<W: Write>(ds: &Dataset, mut w: W) -> Result<()> {
    writeln!(w, "{}", dataset_csv_header(ds.bin_count()))?;
    for (ex, part) in ds.examples.iter().zip(&ds.partition) {
        let mut line = format!("{},{},{},{}", ex.format, sig17(ex.osnr_db), ex.frame_index, part);
        for f in &ex.features {
            line.push(',');
            line.push_str(&sig17(*f));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Writes the CSV and its JSON sidecar.
pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_dataset_csv(ds, &mut buf)?;
    fs::write(path, buf)?;
    let meta = serde_json::to_string_pretty(&DatasetMeta::of(ds))?;
    fs::write(sidecar_path(path), meta + "\n")?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let meta_path = sidecar_path(path);
    let meta: DatasetMeta = serde_json::from_str(&fs::read_to_string(&meta_path)?)
        .map_err(|e| Error::parse(&meta_path, e.line(), e.to_string()))?;
    if meta.format_version != DATASET_FORMAT_VERSION {
        return Err(Error::parse(
            &meta_path,
            1,
            format!("unsupported format_version {}", meta.format_version),
        ));
    }
    let spec = meta.spec();
    spec.validate()?;
    let text = fs::read_to_string(path)?;
    parse_dataset_csv(&text, path, &spec).map(|(examples, partition)| Dataset {
        spec,
        sim: meta.pipeline_config.sim.clone(),
        equalizer: meta.pipeline_config.equalizer.clone(),
        split_seed: meta.seeds.split,
        examples,
        partition,
    })
}

fn parse_dataset_csv(
    text: &str,
    path: &Path,
    spec: &DatasetSpec,
) -> Result<(Vec<LabeledExample>, Vec<Partition>)> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines
        .next()
        .filter(|(_, l)| !l.trim().is_empty())
        .ok_or_else(|| Error::parse(path, 1, "empty dataset file"))?;
    let columns: Vec<&str> = header.split(',').collect();
    if columns.len() < 5 || columns[..4] != ["format", "osnr_db", "frame_index", "partition"] {
        return Err(Error::parse(path, 1, "malformed header"));
    }
    let bins = columns.len() - 4;
    if bins != spec.bin_count {
        return Err(Error::parse(
            path,
            1,
            format!("header has {bins} bins but metadata says {}", spec.bin_count),
        ));
    }
    let mut examples = Vec::new();
    let mut partition = Vec::new();
    for (line_no, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != bins + 4 {
            return Err(Error::parse(
                path,
                line_no,
                format!("row {line_no} has {} columns, expected {}", fields.len(), bins + 4),
            ));
        }
        let err = |m: String| Error::parse(path, line_no, m);
        let format: ModulationFormat = fields[0].parse().map_err(|e: Error| err(e.to_string()))?;
        let osnr_db = parse_f64(fields[1]).ok_or_else(|| err(format!("bad osnr_db {:?}", fields[1])))?;
        let frame_index: usize = fields[2]
            .parse()
            .map_err(|_| err(format!("bad frame_index {:?}", fields[2])))?;
        let part: Partition = fields[3].parse().map_err(err)?;
        let features = fields[4..]
            .iter()
            .map(|f| parse_f64(f).ok_or_else(|| err(format!("bad feature value {f:?}"))))
            .collect::<Result<Vec<_>>>()?;
        let (format_onehot, osnr_norm) =
            encode_targets(format, osnr_db, &spec.osnr_grid, &spec.formats)
                .map_err(|e| err(e.to_string()))?;
        examples.push(LabeledExample {
            format,
            osnr_db,
            frame_index,
            features,
            format_onehot,
            osnr_norm,
        });
        partition.push(part);
    }
    if examples.is_empty() {
        return Err(Error::parse(path, 2, "dataset has no rows"));
    }
    Ok((examples, partition))
}
