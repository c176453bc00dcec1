use rand::Rng;
use serde::{Deserialize, Serialize};

use super::loss::{softmax, LossWeights, MfiLoss, Outputs, Targets};
use super::topology::{MtlTopology, Task};
use crate::error::{Error, Result};
use crate::features::{OsnrRange, N_CLASSES};
use crate::seed;
use crate::sigsim::ModulationFormat;

/// Fully connected layer; `w` is `n_out x n_in`, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub n_in: usize,
    pub n_out: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Dense {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Self {
            n_in,
            n_out,
            w: vec![0.0; n_in * n_out],
            b: vec![0.0; n_out],
        }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.w[r * self.n_in..(r + 1) * self.n_in]
    }

    /// `W x + b`
    pub fn affine(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n_in);
        (0..self.n_out)
            .map(|r| self.b[r] + self.row(r).iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            .collect()
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.w.iter().chain(&self.b)
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w.iter_mut().chain(self.b.iter_mut())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MtlNetwork {
    pub topology: MtlTopology,
    /// Trunk layers first, then each branch's hidden and output layers.
    pub layers: Vec<Dense>,
    pub seed: u64,
    /// Weights the network was (or will be) trained with.
    pub loss_weights: LossWeights,
}

/// Same layout as the network's layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn zeros_like(net: &MtlNetwork) -> Self {
        Self {
            layers: net.layers.iter().map(|l| Dense::zeros(l.n_in, l.n_out)).collect(),
        }
    }

    pub fn scale(&mut self, c: f64) {
        for l in &mut self.layers {
            l.params_mut().for_each(|g| *g *= c);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(Dense::params)
    }
}

/// Uniform Glorot initialization with zero biases.
pub fn init_network(topology: &MtlTopology, seed: u64) -> Result<MtlNetwork> {
    topology.validate()?;
    let mut rng = seed::rng(seed::mix(&[seed, seed::TAG_INIT]));
    let layers = topology
        .layer_shapes()
        .into_iter()
        .map(|(n_in, n_out)| {
            let bound = (6.0 / (n_in + n_out) as f64).sqrt();
            let mut layer = Dense::zeros(n_in, n_out);
            for w in &mut layer.w {
                *w = rng.random_range(-bound..=bound);
            }
            layer
        })
        .collect();
    Ok(MtlNetwork {
        topology: topology.clone(),
        layers,
        seed,
        loss_weights: LossWeights::default(),
    })
}

/// Activations kept for backpropagation.
#[derive(Clone, Debug)]
pub struct ForwardPass {
    pub outputs: Outputs,
    input: Vec<f64>,
    /// Post-activation output of every layer, in layer order.
    acts: Vec<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prediction {
    pub format: Option<ModulationFormat>,
    pub osnr_db: Option<f64>,
}

/// Index of the largest value; ties go to the lowest index.
pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

impl MtlNetwork {
    pub fn has_task(&self, task: Task) -> bool {
        self.topology.has_task(task)
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn forward(&self, features: &[f64]) -> Result<ForwardPass> {
        if features.len() != self.topology.input_size {
            return Err(Error::DimensionMismatch {
                expected: self.topology.input_size,
                actual: features.len(),
            });
        }
        let n_shared = self.topology.shared_sizes.len();
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        for l in &self.layers[..n_shared] {
            let x = acts.last().map_or(features, Vec::as_slice);
            acts.push(l.affine(x).into_iter().map(f64::tanh).collect());
        }
        let mut outputs = Outputs {
            mfi_probs: None,
            osnr_norm: None,
        };
        for (bi, branch) in self.topology.branches.iter().enumerate() {
            let range = self.topology.branch_layers(bi);
            let (start, last) = (range.start, range.end - 1);
            for li in range {
                let x = if li == start {
                    if n_shared == 0 { features } else { &acts[n_shared - 1] }
                } else {
                    &acts[li - 1]
                };
                let z = self.layers[li].affine(x);
                let a = if li < last {
                    z.into_iter().map(f64::tanh).collect()
                } else {
                    match branch.task {
                        Task::Mfi => softmax(&z),
                        Task::Osnr => z,
                    }
                };
                acts.push(a);
            }
            let out = &acts[last];
            match branch.task {
                Task::Mfi => outputs.mfi_probs = Some([out[0], out[1], out[2]]),
                Task::Osnr => outputs.osnr_norm = Some(out[0]),
            }
        }
        Ok(ForwardPass {
            outputs,
            input: features.to_vec(),
            acts,
        })
    }

    pub fn outputs(&self, features: &[f64]) -> Result<Outputs> {
        Ok(self.forward(features)?.outputs)
    }

    /// Adds the gradient of one example's loss to `grads`, scaled by `scale`.
    pub fn accumulate_gradients(
        &self,
        pass: &ForwardPass,
        target: &Targets,
        weights: &LossWeights,
        mfi_loss: MfiLoss,
        scale: f64,
        grads: &mut Gradients,
    ) {
        let topo = &self.topology;
        let n_shared = topo.shared_sizes.len();
        let mut trunk_delta = vec![0.0; topo.trunk_width()];

        for (bi, branch) in topo.branches.iter().enumerate() {
            let range = topo.branch_layers(bi);
            let out = &pass.acts[range.end - 1];
            // dJ/dz at the output pre-activation
            let mut delta: Vec<f64> = match branch.task {
                Task::Mfi => {
                    let w = scale * weights.w_mfi;
                    match mfi_loss {
                        MfiLoss::SquaredError => {
                            let g: Vec<f64> = (0..N_CLASSES)
                                .map(|k| 2.0 * w * (out[k] - target.onehot[k]))
                                .collect();
                            let gh: f64 = g.iter().zip(out).map(|(a, b)| a * b).sum();
                            (0..N_CLASSES).map(|j| out[j] * (g[j] - gh)).collect()
                        }
                        MfiLoss::CrossEntropy => (0..N_CLASSES)
                            .map(|k| w * (out[k] - target.onehot[k]))
                            .collect(),
                    }
                }
                Task::Osnr => vec![2.0 * scale * weights.w_osnr * (out[0] - target.osnr_norm)],
            };
            for li in range.clone().rev() {
                let input: &[f64] = if li == range.start {
                    if n_shared == 0 { &pass.input } else { &pass.acts[n_shared - 1] }
                } else {
                    &pass.acts[li - 1]
                };
                let back = self.backprop_layer(li, &delta, input, grads);
                if li == range.start {
                    for (t, b) in trunk_delta.iter_mut().zip(&back) {
                        *t += b;
                    }
                } else {
                    let a = &pass.acts[li - 1];
                    delta = back.iter().zip(a).map(|(d, a)| d * (1.0 - a * a)).collect();
                }
            }
        }

        if n_shared == 0 {
            return;
        }
        let a = &pass.acts[n_shared - 1];
        let mut delta: Vec<f64> = trunk_delta.iter().zip(a).map(|(d, a)| d * (1.0 - a * a)).collect();
        for li in (0..n_shared).rev() {
            let input: &[f64] = if li == 0 { &pass.input } else { &pass.acts[li - 1] };
            let back = self.backprop_layer(li, &delta, input, grads);
            if li > 0 {
                let a = &pass.acts[li - 1];
                delta = back.iter().zip(a).map(|(d, a)| d * (1.0 - a * a)).collect();
            }
        }
    }

    /// Accumulates layer gradients and returns `W^T delta`.
    fn backprop_layer(&self, li: usize, delta: &[f64], input: &[f64], grads: &mut Gradients) -> Vec<f64> {
        let layer = &self.layers[li];
        let g = &mut grads.layers[li];
        let mut back = vec![0.0; layer.n_in];
        for (r, &d) in delta.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            g.b[r] += d;
            let gw = &mut g.w[r * layer.n_in..(r + 1) * layer.n_in];
            for (gw, x) in gw.iter_mut().zip(input) {
                *gw += d * x;
            }
            for (bk, w) in back.iter_mut().zip(layer.row(r)) {
                *bk += d * w;
            }
        }
        back
    }

    /// Gradient of the mean loss over `examples`.
    pub fn gradients(
        &self,
        examples: &[(&[f64], Targets)],
        weights: &LossWeights,
        mfi_loss: MfiLoss,
    ) -> Result<Gradients> {
        let mut grads = Gradients::zeros_like(self);
        let scale = 1.0 / examples.len().max(1) as f64;
        for (x, t) in examples {
            let pass = self.forward(x)?;
            self.accumulate_gradients(&pass, t, weights, mfi_loss, scale, &mut grads);
        }
        Ok(grads)
    }

    /// Class by argmax (lowest index on ties) and OSNR decoded to dB.
    pub fn predict(&self, features: &[f64], range: &OsnrRange) -> Result<Prediction> {
        let out = self.outputs(features)?;
        Ok(prediction_from(&out, range))
    }
}

pub(crate) fn prediction_from(out: &Outputs, range: &OsnrRange) -> Prediction {
    Prediction {
        format: out
            .mfi_probs
            .and_then(|p| ModulationFormat::from_class_index(argmax(&p))),
        osnr_db: out.osnr_norm.map(|n| range.decode(n)),
    }
}
