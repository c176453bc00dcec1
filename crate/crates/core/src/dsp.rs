//! Receiver chain: DC removal, rational resampling to two samples per
//! symbol, blind constant-modulus equalization and amplitude normalization.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sigsim::{gcd, ModulationFormat, SamplesPerSymbol, WaveformFrame};

/// Polyphase branch length of the resampling filter.
pub const TAPS_PER_BRANCH: usize = 64;

/// Fraction of amplitudes that may exceed the normalization reference.
pub const CLIP_QUANTILE: f64 = 0.999;

const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModulusMode {
    /// R2 = E[x^4] / E[x^2] measured on the equalizer input.
    #[default]
    #[serde(rename = "FROM_INPUT")]
    FromInput,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EqualizerConfig {
    pub n_taps: usize,
    pub step_size: f64,
    pub n_passes: usize,
    pub modulus_mode: ModulusMode,
}

impl Default for EqualizerConfig {
    fn default() -> Self {
        Self {
            n_taps: 11,
            step_size: 1e-3,
            n_passes: 3,
            modulus_mode: ModulusMode::FromInput,
        }
    }
}

impl EqualizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_taps < 3 || self.n_taps.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "n_taps must be odd and >= 3, got {}",
                self.n_taps
            )));
        }
        if !(self.step_size > 0.0 && self.step_size <= 0.1) {
            return Err(Error::InvalidConfig(format!(
                "step_size must be in (0, 0.1], got {}",
                self.step_size
            )));
        }
        if self.n_passes == 0 {
            return Err(Error::InvalidConfig("n_passes must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EqualizedFrame {
    /// |y| at two samples per symbol.
    pub amplitudes: Vec<f64>,
    pub truth_format: ModulationFormat,
    pub truth_osnr_db: f64,
    pub final_cm_cost: f64,
    /// Cost of the center-spike filter on the same samples and modulus.
    pub initial_cm_cost: f64,
    pub modulus: f64,
    pub taps: Vec<f64>,
    /// Half-symbol phase (0 or 1) the taps were adapted on.
    pub update_phase: usize,
}

pub fn remove_dc(frame: &WaveformFrame) -> WaveformFrame {
    assert!(!frame.is_empty(), "remove_dc needs samples");
    let mean = frame.samples.iter().sum::<f64>() / frame.len() as f64;
    frame.with_samples(frame.samples.iter().map(|s| s - mean).collect())
}

/// Blackman-windowed sinc low-pass for an `up`/`down` rational resampler.
///
/// Length is `TAPS_PER_BRANCH * up + 1` so the group delay is an integer
/// number of samples at the upsampled rate. The DC gain is exactly `up`.
pub fn design_resampler(up: usize, down: usize) -> Vec<f64> {
    let n = TAPS_PER_BRANCH * up + 1;
    let center = (n - 1) as f64 / 2.0;
    let cutoff = 0.5 / up.max(down) as f64;
    let mut h: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 - center;
            let sinc = if t == 0.0 {
                2.0 * cutoff
            } else {
                (2.0 * PI * cutoff * t).sin() / (PI * t)
            };
            let phase = 2.0 * PI * i as f64 / (n - 1) as f64;
            let window = 0.42 - 0.5 * phase.cos() + 0.08 * (2.0 * phase).cos();
            sinc * window
        })
        .collect();
    let sum: f64 = h.iter().sum();
    for c in &mut h {
        *c *= up as f64 / sum;
    }
    h
}

/// Rational resampling by `up / down` with delay compensation, so output
/// sample `m` sits at input position `m * down / up`. Samples outside the
/// input are treated as zero.
pub fn resample(x: &[f64], up: usize, down: usize) -> Vec<f64> {
    if up == down {
        return x.to_vec();
    }
    let h = design_resampler(up, down);
    let delay = (h.len() - 1) / 2;
    let out_len = (x.len() * up).div_ceil(down);
    (0..out_len)
        .map(|m| {
            let t = m * down + delay;
            // input k contributes h[t - k * up] when 0 <= t - k*up < h.len()
            let k_hi = (t / up).min(x.len().saturating_sub(1));
            let k_lo = (t + 1).saturating_sub(h.len()).div_ceil(up);
            (k_lo..=k_hi).map(|k| x[k] * h[t - k * up]).sum()
        })
        .collect()
}

pub fn resample_to_2sps(frame: &WaveformFrame) -> Result<WaveformFrame> {
    let SamplesPerSymbol { num, den } = frame.sps;
    if num < 2 * den {
        return Err(Error::UnsupportedRatio { num, den });
    }
    // p/q -> 2: up 2q, down p
    let (up, down) = (2 * den, num);
    let g = gcd(up, down);
    let (up, down) = ((up / g) as usize, (down / g) as usize);
    let mut out = frame.with_samples(resample(&frame.samples, up, down));
    out.sps = SamplesPerSymbol::integer(2);
    Ok(out)
}

/// Mean of `(y^2 - r2)^2`.
pub fn cm_cost(y: &[f64], r2: f64) -> f64 {
    if y.is_empty() {
        return 0.0;
    }
    y.iter().map(|v| (v * v - r2).powi(2)).sum::<f64>() / y.len() as f64
}

/// E[x^4] / E[x^2].
pub fn dispersion_constant(x: &[f64]) -> f64 {
    let (m2, m4) = x.iter().fold((0.0, 0.0), |(m2, m4), v| {
        let s = v * v;
        (m2 + s, m4 + s * s)
    });
    if m2 == 0.0 {
        0.0
    } else {
        m4 / m2
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// Fractionally spaced (T/2) real CMA equalizer.
///
/// Taps start as a center spike and adapt once per symbol, on the
/// half-symbol phase with the larger mean-square input. The final pass
/// emits outputs at every half-symbol position, so the output holds
/// `len - (n_taps - 1)` samples. Costs are measured on the adapted phase.
pub fn cma_equalize(frame: &WaveformFrame, cfg: &EqualizerConfig) -> Result<EqualizedFrame> {
    run_cma(frame, cfg.n_taps, cfg.step_size, cfg.n_passes)
}

pub(crate) fn run_cma(
    frame: &WaveformFrame,
    n_taps: usize,
    mu: f64,
    n_passes: usize,
) -> Result<EqualizedFrame> {
    let x = &frame.samples;
    if n_taps == 0 || x.len() <= 10 * n_taps {
        return Err(Error::Shape(format!(
            "equalizer needs more than {} samples, got {}",
            10 * n_taps,
            x.len()
        )));
    }
    let center = n_taps / 2;
    let positions = x.len() - n_taps + 1;
    let r2 = dispersion_constant(x);

    let phase_power = |p: usize| -> f64 {
        (p..positions).step_by(2).map(|j| x[j + center].powi(2)).sum()
    };
    let phase = if phase_power(1) > phase_power(0) { 1 } else { 0 };
    let adapted: Vec<f64> = (phase..positions).step_by(2).map(|j| x[j + center]).collect();
    let initial_cm_cost = cm_cost(&adapted, r2);

    let mut w = vec![0.0; n_taps];
    w[center] = 1.0;

    let update = |w: &mut [f64], window: &[f64], y: f64, pass: usize, j: usize| -> Result<()> {
        let e = y * (y * y - r2);
        if e != 0.0 {
            for (wi, xi) in w.iter_mut().zip(window) {
                *wi -= mu * e * xi;
            }
            if w.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_LIMIT) {
                return Err(Error::Diverged { pass, position: j });
            }
        }
        Ok(())
    };

    for pass in 0..n_passes.saturating_sub(1) {
        for j in (phase..positions).step_by(2) {
            let window = &x[j..j + n_taps];
            let y = dot(&w, window);
            update(&mut w, window, y, pass, j)?;
        }
    }

    let mut amplitudes = Vec::with_capacity(positions);
    let mut cost = 0.0;
    let mut n_cost = 0usize;
    for j in 0..positions {
        let window = &x[j..j + n_taps];
        let y = dot(&w, window);
        amplitudes.push(y.abs());
        if j >= phase && (j - phase) % 2 == 0 {
            cost += (y * y - r2).powi(2);
            n_cost += 1;
            update(&mut w, window, y, n_passes - 1, j)?;
        }
    }

    Ok(EqualizedFrame {
        amplitudes,
        truth_format: frame.truth_format,
        truth_osnr_db: frame.truth_osnr_db,
        final_cm_cost: cost / n_cost as f64,
        initial_cm_cost,
        modulus: r2,
        taps: w,
        update_phase: phase,
    })
}

/// Divides by the 99.9th-percentile amplitude and clips to [0, 1].
pub fn normalize_amplitude(eq: &EqualizedFrame) -> Result<EqualizedFrame> {
    let reference = amplitude_quantile(&eq.amplitudes, CLIP_QUANTILE);
    if reference.is_nan() || reference <= 0.0 {
        return Err(Error::ZeroSignal);
    }
    let mut out = eq.clone();
    for a in &mut out.amplitudes {
        *a = (*a / reference).clamp(0.0, 1.0);
    }
    Ok(out)
}

/// Nearest-rank quantile: the `ceil(q * n)`-th smallest value.
pub fn amplitude_quantile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of an empty sequence");
    let rank = ((q * values.len() as f64).ceil() as usize).clamp(1, values.len());
    let mut v = values.to_vec();
    let (_, nth, _) = v.select_nth_unstable_by(rank - 1, f64::total_cmp);
    *nth
}

/// Full receiver chain from a noisy waveform to normalized amplitudes.
pub fn receive(frame: &WaveformFrame, cfg: &EqualizerConfig) -> Result<EqualizedFrame> {
    cfg.validate()?;
    let centered = remove_dc(frame);
    let resampled = resample_to_2sps(&centered)?;
    let equalized = cma_equalize(&resampled, cfg)?;
    normalize_amplitude(&equalized)
}
