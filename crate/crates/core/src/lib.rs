//! Optical performance monitoring from amplitude histograms.
//!
//! The pipeline simulates intensity-modulated PAM signals (OOK, PAM4, PAM8)
//! at a controlled OSNR, runs a blind receiver chain (DC removal, rational
//! resampling to two samples per symbol, constant-modulus equalization),
//! turns the equalized amplitudes into histogram features, and trains a
//! multi-task network that identifies the modulation format and regresses
//! the OSNR at the same time.
//!
//! Modules follow the data flow:
//!
//! * [`sigsim`] builds [`WaveformFrame`]s.
//! * [`dsp`] turns frames into [`EqualizedFrame`]s.
//! * [`features`] histograms them and assembles a labelled [`Dataset`].
//! * [`mtlnet`] is the network, its loss, backpropagation and Adam.
//! * [`experiments`] holds metrics, multi-seed statistics and the sweeps.

pub mod dsp;
pub mod error;
pub mod experiments;
pub mod features;
pub mod mtlnet;
pub mod numfmt;
pub mod seed;
pub mod sigsim;

pub use dsp::{EqualizedFrame, EqualizerConfig};
pub use error::{Error, Result};
pub use experiments::{ExperimentConfig, Metrics, NetKind, RunStats, SweepParam, SweepSpec, SweepTable};
pub use features::{AmplitudeHistogram, Dataset, DatasetSpec, LabeledExample, Partition};
pub use mtlnet::{LossWeights, MtlNetwork, MtlTopology, Task, TrainConfig};
pub use sigsim::{ModulationFormat, SamplesPerSymbol, SimConfig, WaveformFrame};
