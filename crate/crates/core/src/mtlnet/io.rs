//! Model file: JSON with every float written at 17 significant digits.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use super::loss::LossWeights;
use super::network::{Dense, MtlNetwork};
use super::topology::MtlTopology;
use crate::error::{Error, Result};
use crate::numfmt::sig17;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize)]
struct LayerOut {
    #[serde(rename = "W")]
    w: Vec<Vec<Box<RawValue>>>,
    b: Vec<Box<RawValue>>,
}

#[derive(Serialize)]
struct ModelOut<'a> {
    format_version: u32,
    topology: &'a MtlTopology,
    loss_weights: &'a LossWeights,
    seed: u64,
    layers: Vec<LayerOut>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerIn {
    #[serde(rename = "W")]
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelIn {
    format_version: u32,
    topology: MtlTopology,
    loss_weights: LossWeights,
    seed: u64,
    layers: Vec<LayerIn>,
}

fn raw(x: f64) -> Result<Box<RawValue>> {
    if !x.is_finite() {
        return Err(Error::Shape(format!("cannot serialize non-finite parameter {x}")));
    }
    Ok(RawValue::from_string(sig17(x))?)
}

pub fn model_to_json(net: &MtlNetwork) -> Result<String> {
    let layers = net
        .layers
        .iter()
        .map(|l| {
            let w = (0..l.n_out)
                .map(|r| l.row(r).iter().map(|&x| raw(x)).collect::<Result<Vec<_>>>())
                .collect::<Result<Vec<_>>>()?;
            let b = l.b.iter().map(|&x| raw(x)).collect::<Result<Vec<_>>>()?;
            Ok(LayerOut { w, b })
        })
        .collect::<Result<Vec<_>>>()?;
    let model = ModelOut {
        format_version: MODEL_FORMAT_VERSION,
        topology: &net.topology,
        loss_weights: &net.loss_weights,
        seed: net.seed,
        layers,
    };
    Ok(serde_json::to_string(&model)? + "\n")
}

pub fn model_from_json(text: &str) -> Result<MtlNetwork> {
    let m: ModelIn = serde_json::from_str(text)?;
    if m.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::Shape(format!(
            "unsupported model format_version {} (expected {MODEL_FORMAT_VERSION})",
            m.format_version
        )));
    }
    m.topology.validate()?;
    let shapes = m.topology.layer_shapes();
    if shapes.len() != m.layers.len() {
        return Err(Error::Shape(format!(
            "topology has {} layers but the payload has {}",
            shapes.len(),
            m.layers.len()
        )));
    }
    let mut layers = Vec::with_capacity(shapes.len());
    for (i, ((n_in, n_out), l)) in shapes.into_iter().zip(m.layers).enumerate() {
        if l.w.len() != n_out || l.w.iter().any(|r| r.len() != n_in) || l.b.len() != n_out {
            return Err(Error::Shape(format!(
                "layer {i} does not match the topology ({n_out} x {n_in})"
            )));
        }
        layers.push(Dense {
            n_in,
            n_out,
            w: l.w.into_iter().flatten().collect(),
            b: l.b,
        });
    }
    Ok(MtlNetwork {
        topology: m.topology,
        layers,
        seed: m.seed,
        loss_weights: m.loss_weights,
    })
}

pub fn save_model(net: &MtlNetwork, path: &Path) -> Result<()> {
    fs::write(path, model_to_json(net)?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<MtlNetwork> {
    model_from_json(&fs::read_to_string(path)?)
}
