//! Dense multi-task network: a shared tanh trunk feeding one softmax branch
//! for format identification and one linear branch for OSNR regression.
//!
//! The training objective is the weighted sum of per-task squared errors,
//!
//! ```text
//! J = w_mfi * sum_k (y1_k - h1_k)^2 + w_osnr * (y2 - h2)^2
//! ```
//!
//! averaged over a minibatch, minimized with Adam. Single-task variants are
//! the same network with one branch removed ([`MtlTopology::make_stl`]).

mod adam;
mod io;
mod loss;
mod network;
mod topology;
mod train;

pub use adam::{adam_step, AdamState};
pub use io::{load_model, model_from_json, model_to_json, save_model, MODEL_FORMAT_VERSION};
pub use loss::{batch_mtl_loss, example_loss, mtl_loss, softmax, LossWeights, MfiLoss, Outputs, Targets};
pub use network::{init_network, Dense, ForwardPass, Gradients, MtlNetwork, Prediction};
pub use topology::{Branch, MtlTopology, OutputActivation, Task};
pub use train::{batch_loss, train, EpochRecord, TrainConfig, TrainOutcome};
