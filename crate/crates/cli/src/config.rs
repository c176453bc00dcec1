use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use opmon_core::experiments::{ExperimentConfig, NetKind};
use opmon_core::{DatasetSpec, EqualizerConfig, SimConfig, TrainConfig};
use serde::{Deserialize, Serialize};

/// Per-run sweep overrides; unset fields fall back to the sweep's defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepOverrides {
    pub values: Option<Vec<f64>>,
    pub kinds: Option<Vec<NetKind>>,
}

/// Everything a command can be configured with. `seed` is the master seed
/// and replaces `dataset.seed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub n_seeds: usize,
    pub sim: SimConfig,
    pub dataset: DatasetSpec,
    pub equalizer: EqualizerConfig,
    pub train: TrainConfig,
    pub shared_neurons: usize,
    pub loss_ratio: f64,
    pub stl_bins: usize,
    pub stl_shared_neurons: usize,
    pub sweep: SweepOverrides,
}

impl Default for RunConfig {
    fn default() -> Self {
        let e = ExperimentConfig::default();
        Self {
            seed: e.seed,
            out: PathBuf::from("out"),
            n_seeds: e.n_seeds,
            sim: e.sim,
            dataset: e.dataset,
            equalizer: e.equalizer,
            train: e.train,
            shared_neurons: e.shared_neurons,
            loss_ratio: e.loss_ratio,
            stl_bins: e.stl_bins,
            stl_shared_neurons: e.stl_shared_neurons,
            sweep: SweepOverrides::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            seed: self.seed,
            n_seeds: self.n_seeds,
            sim: self.sim.clone(),
            dataset: self.dataset.clone(),
            equalizer: self.equalizer.clone(),
            train: self.train.clone(),
            shared_neurons: self.shared_neurons,
            loss_ratio: self.loss_ratio,
            stl_bins: self.stl_bins,
            stl_shared_neurons: self.stl_shared_neurons,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.experiment().validate().context("invalid configuration")
    }
}

/// Help text listing every config key with its default.
pub fn config_help() -> String {
    let json = serde_json::to_string_pretty(&RunConfig::default()).unwrap_or_default();
    format!(
        "Config file keys (JSON, via --config) with their defaults. Flags override the file.\n\
         `seed` replaces dataset.seed; `sweep.values`/`sweep.kinds` default per sweep.\n\n{json}"
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"seed": 1, "bogus": 2}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"train": {"lr": 1}}"#).is_err());
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg: RunConfig = serde_json::from_str(r#"{"seed": 7, "train": {"max_epochs": 3}}"#).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.train.max_epochs, 3);
        assert_eq!(cfg.train.batch_size, TrainConfig::default().batch_size);
        assert_eq!(cfg.dataset, DatasetSpec::default());
    }

    #[test]
    fn defaults_round_trip_and_validate() {
        let cfg = RunConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), cfg);
        cfg.validate().unwrap();
        assert!(config_help().contains("\"shared_neurons\": 60"));
    }
}
