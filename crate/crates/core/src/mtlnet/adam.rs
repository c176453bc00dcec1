use super::network::{Dense, Gradients, MtlNetwork};
use super::train::TrainConfig;

/// First and second moment estimates, shaped like the network.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<Dense>,
    pub v: Vec<Dense>,
    pub step: u64,
}

impl AdamState {
    pub fn new(net: &MtlNetwork) -> Self {
        let zeros = || net.layers.iter().map(|l| Dense::zeros(l.n_in, l.n_out)).collect();
        Self {
            m: zeros(),
            v: zeros(),
            step: 0,
        }
    }
}

/// Bias-corrected Adam update.
pub fn adam_step(net: &mut MtlNetwork, state: &mut AdamState, grads: &Gradients, cfg: &TrainConfig) {
    assert_eq!(state.m.len(), net.layers.len(), "optimizer state does not match the network");
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    let (b1, b2, lr, eps) = (cfg.beta1, cfg.beta2, cfg.learning_rate, cfg.epsilon);
    for (((layer, g), m), v) in net
        .layers
        .iter_mut()
        .zip(&grads.layers)
        .zip(&mut state.m)
        .zip(&mut state.v)
    {
        let params = layer.params_mut();
        let grads = g.params();
        let ms = m.params_mut();
        let vs = v.params_mut();
        for (((p, g), m), v) in params.zip(grads).zip(ms).zip(vs) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}
