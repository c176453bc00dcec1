//! PAM waveform simulation: symbol draw, NRZ modulation, a linear ISI
//! channel, OSNR-calibrated Gaussian noise and optional DAC quantization.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModulationFormat {
    #[serde(rename = "OOK")]
    Ook,
    #[serde(rename = "PAM4")]
    Pam4,
    #[serde(rename = "PAM8")]
    Pam8,
}

impl ModulationFormat {
    /// Class order used for one-hot targets.
    pub const ALL: [ModulationFormat; 3] = [Self::Ook, Self::Pam4, Self::Pam8];

    pub fn levels(self) -> usize {
        match self {
            Self::Ook => 2,
            Self::Pam4 => 4,
            Self::Pam8 => 8,
        }
    }

    pub fn class_index(self) -> usize {
        match self {
            Self::Ook => 0,
            Self::Pam4 => 1,
            Self::Pam8 => 2,
        }
    }

    pub fn from_class_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Equally spaced levels from 0 to 1.
    pub fn alphabet(self) -> Vec<f64> {
        let m = self.levels();
        (0..m).map(|k| k as f64 / (m - 1) as f64).collect()
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Ook => "OOK",
            Self::Pam4 => "PAM4",
            Self::Pam8 => "PAM8",
        }
    }
}

impl fmt::Display for ModulationFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModulationFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "OOK" | "NRZ-OOK" | "PAM2" => Ok(Self::Ook),
            "PAM4" => Ok(Self::Pam4),
            "PAM8" => Ok(Self::Pam8),
            other => Err(Error::InvalidConfig(format!("unknown modulation format {other:?}"))),
        }
    }
}

/// Oversampling ratio kept as a reduced fraction so rate conversions stay exact.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplesPerSymbol {
    pub num: u32,
    pub den: u32,
}

impl SamplesPerSymbol {
    pub fn new(num: u32, den: u32) -> Self {
        assert!(num > 0 && den > 0, "samples per symbol must be positive");
        let g = gcd(num, den);
        Self {
            num: num / g,
            den: den / g,
        }
    }

    pub fn integer(n: u32) -> Self {
        Self::new(n, 1)
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

pub(crate) fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub symbol_rate: f64,
    pub n_symbols: usize,
    pub gen_samples_per_symbol: u32,
    pub channel_taps: Vec<f64>,
    pub osnr_db: f64,
    pub ref_bandwidth: f64,
    pub dac_bits: Option<u32>,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            symbol_rate: 20e9,
            n_symbols: 8191,
            gen_samples_per_symbol: 5,
            channel_taps: vec![0.12, 1.0, 0.12],
            osnr_db: 40.0,
            ref_bandwidth: 12.5e9,
            dac_bits: None,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.symbol_rate.is_finite() && self.symbol_rate > 0.0) {
            return bad(format!("symbol_rate must be positive, got {}", self.symbol_rate));
        }
        if self.n_symbols < 64 {
            return bad(format!("n_symbols must be >= 64, got {}", self.n_symbols));
        }
        if self.gen_samples_per_symbol < 2 {
            return bad(format!(
                "gen_samples_per_symbol must be >= 2, got {}",
                self.gen_samples_per_symbol
            ));
        }
        if self.channel_taps.is_empty() || self.channel_taps.iter().any(|t| !t.is_finite()) {
            return bad("channel_taps must be nonempty and finite".into());
        }
        let peak = self.channel_taps.iter().fold(0.0_f64, |m, t| m.max(t.abs()));
        let n_peak = self.channel_taps.iter().filter(|t| t.abs() == peak).count();
        if peak == 0.0 || n_peak != 1 {
            return bad("channel_taps must have a single strict maximum-magnitude tap".into());
        }
        if !(self.ref_bandwidth.is_finite() && self.ref_bandwidth > 0.0) {
            return bad(format!("ref_bandwidth must be positive, got {}", self.ref_bandwidth));
        }
        if self.osnr_db.is_nan() || self.osnr_db == f64::NEG_INFINITY {
            return bad(format!("osnr_db must be finite, got {}", self.osnr_db));
        }
        if let Some(bits) = self.dac_bits {
            if !(2..=16).contains(&bits) {
                return bad(format!("dac_bits must be in [2, 16], got {bits}"));
            }
        }
        Ok(())
    }

    /// Channel taps scaled so the peak tap has unit magnitude.
    pub fn normalized_taps(&self) -> Vec<f64> {
        let peak = self.channel_taps.iter().fold(0.0_f64, |m, t| m.max(t.abs()));
        self.channel_taps.iter().map(|t| t / peak).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WaveformFrame {
    pub samples: Vec<f64>,
    pub symbol_rate: f64,
    pub sps: SamplesPerSymbol,
    pub truth_format: ModulationFormat,
    /// `+inf` until noise has been loaded.
    pub truth_osnr_db: f64,
}

impl WaveformFrame {
    pub fn sample_rate(&self) -> f64 {
        self.symbol_rate * self.sps.num as f64 / self.sps.den as f64
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub(crate) fn with_samples(&self, samples: Vec<f64>) -> Self {
        Self {
            samples,
            symbol_rate: self.symbol_rate,
            sps: self.sps,
            truth_format: self.truth_format,
            truth_osnr_db: self.truth_osnr_db,
        }
    }
}

/// Draws `n` i.i.d. symbols uniformly from the format's alphabet.
pub fn generate_symbols(format: ModulationFormat, n: usize, seed: u64) -> Vec<f64> {
    let alphabet = format.alphabet();
    let mut rng = seed::rng(seed);
    (0..n)
        .map(|_| alphabet[rng.random_range(0..alphabet.len())])
        .collect()
}

/// Rectangular NRZ pulse: every symbol held for `sps` samples.
pub fn sample_and_hold(symbols: &[f64], sps: usize) -> Vec<f64> {
    symbols
        .iter()
        .flat_map(|&s| std::iter::repeat_n(s, sps))
        .collect()
}

/// Sample-and-hold followed by the configured channel.
pub fn modulate(format: ModulationFormat, symbols: &[f64], cfg: &SimConfig) -> WaveformFrame {
    assert!(!symbols.is_empty(), "modulate needs at least one symbol");
    let frame = WaveformFrame {
        samples: sample_and_hold(symbols, cfg.gen_samples_per_symbol as usize),
        symbol_rate: cfg.symbol_rate,
        sps: SamplesPerSymbol::integer(cfg.gen_samples_per_symbol),
        truth_format: format,
        truth_osnr_db: f64::INFINITY,
    };
    apply_channel(&frame, &cfg.normalized_taps())
}

/// Causal linear convolution truncated to the input length.
pub fn apply_channel(frame: &WaveformFrame, taps: &[f64]) -> WaveformFrame {
    assert!(!taps.is_empty(), "channel needs at least one tap");
    let x = &frame.samples;
    let out = (0..x.len())
        .map(|i| {
            taps.iter()
                .enumerate()
                .take(i + 1)
                .map(|(j, t)| t * x[i - j])
                .sum()
        })
        .collect();
    frame.with_samples(out)
}

/// Mean square of the DC-removed samples.
pub fn ac_power(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n
}

/// Noise variance that realizes `osnr_db` for a signal of AC power `p_sig`.
pub fn noise_variance(p_sig: f64, osnr_db: f64, ref_bandwidth: f64, symbol_rate: f64) -> f64 {
    p_sig / (10f64.powf(osnr_db / 10.0) * ref_bandwidth / symbol_rate)
}

/// Adds white Gaussian noise for the requested OSNR. `+inf` adds nothing.
pub fn load_noise(
    frame: &WaveformFrame,
    osnr_db: f64,
    ref_bandwidth: f64,
    seed: u64,
) -> Result<WaveformFrame> {
    if osnr_db.is_nan() || osnr_db == f64::NEG_INFINITY {
        return Err(Error::InvalidConfig(format!("osnr_db must be finite, got {osnr_db}")));
    }
    let p_sig = ac_power(&frame.samples);
    let scale = frame.samples.iter().fold(0.0_f64, |m, s| m.max(s.abs()));
    // rounding residue of a constant frame counts as zero
    if p_sig <= (1e-12 * scale).powi(2) {
        return Err(Error::ZeroSignal);
    }
    let mut out = frame.clone();
    out.truth_osnr_db = osnr_db;
    if osnr_db == f64::INFINITY {
        return Ok(out);
    }
    let sigma = noise_variance(p_sig, osnr_db, ref_bandwidth, frame.symbol_rate).sqrt();
    let mut rng = seed::rng(seed);
    for s in &mut out.samples {
        let z: f64 = rng.sample(StandardNormal);
        *s += sigma * z;
    }
    Ok(out)
}

/// Uniform quantizer with `2^bits` levels spanning the frame's range.
pub fn quantize(frame: &WaveformFrame, bits: u32) -> WaveformFrame {
    assert!((2..=16).contains(&bits), "bits must be in [2, 16]");
    let lo = frame.samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = frame.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi.is_nan() || hi <= lo {
        return frame.clone();
    }
    let top = (1u32 << bits) - 1;
    let step = (hi - lo) / top as f64;
    let out = frame
        .samples
        .iter()
        .map(|&x| {
            let k = ((x - lo) / step).round().clamp(0.0, top as f64) as u32;
            // Pin the end points so the range, and hence the grid, is reproduced.
            match k {
                0 => lo,
                k if k == top => hi,
                k => lo + k as f64 * step,
            }
        })
        .collect();
    frame.with_samples(out)
}

/// Seed for one (format, OSNR point, frame) tuple of a dataset.
pub fn frame_seed(master: u64, format: ModulationFormat, osnr_index: usize, frame_index: usize) -> u64 {
    seed::mix(&[
        master,
        format.class_index() as u64,
        osnr_index as u64,
        frame_index as u64,
    ])
}

/// Full transmitter and channel: symbols, NRZ, ISI, optional DAC, noise.
pub fn simulate_frame(format: ModulationFormat, cfg: &SimConfig) -> Result<WaveformFrame> {
    cfg.validate()?;
    let symbols = generate_symbols(format, cfg.n_symbols, seed::mix(&[cfg.seed, seed::TAG_SYMBOLS]));
    let mut frame = modulate(format, &symbols, cfg);
    if let Some(bits) = cfg.dac_bits {
        frame = quantize(&frame, bits);
    }
    load_noise(
        &frame,
        cfg.osnr_db,
        cfg.ref_bandwidth,
        seed::mix(&[cfg.seed, seed::TAG_NOISE]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frame_of(samples: Vec<f64>) -> WaveformFrame {
        WaveformFrame {
            samples,
            symbol_rate: 20e9,
            sps: SamplesPerSymbol::integer(5),
            truth_format: ModulationFormat::Pam4,
            truth_osnr_db: f64::INFINITY,
        }
    }

    #[test]
    fn alphabets() {
        assert_eq!(ModulationFormat::Ook.alphabet(), vec![0.0, 1.0]);
        let pam8 = ModulationFormat::Pam8.alphabet();
        assert_eq!(pam8.len(), 8);
        assert_eq!(pam8[0], 0.0);
        assert_eq!(pam8[7], 1.0);
    }

    #[test]
    fn ook_symbols_are_binary() {
        for seed in 0..16 {
            let s = generate_symbols(ModulationFormat::Ook, 4, seed);
            assert!(s.iter().all(|&v| v == 0.0 || v == 1.0));
        }
    }

    #[test]
    fn pam4_levels_are_equiprobable() {
        let n = 100_000;
        let s = generate_symbols(ModulationFormat::Pam4, n, 1);
        let alphabet = ModulationFormat::Pam4.alphabet();
        for level in alphabet {
            let f = s.iter().filter(|&&v| v == level).count() as f64 / n as f64;
            assert!((f - 0.25).abs() < 0.01, "level {level}: {f}");
        }
    }

    #[test]
    fn symbols_are_deterministic() {
        let a = generate_symbols(ModulationFormat::Pam8, 1, 7);
        let b = generate_symbols(ModulationFormat::Pam8, 1, 7);
        assert_eq!(a, b);
    }

    #[test]
    fn hold_repeats_symbols() {
        assert_eq!(sample_and_hold(&[0.0, 1.0], 2), vec![0.0, 0.0, 1.0, 1.0]);
        assert_eq!(sample_and_hold(&[0.5; 7], 5).len(), 35);
    }

    #[test]
    fn constant_input_settles_at_tap_sum() {
        let cfg = SimConfig::default();
        let frame = modulate(ModulationFormat::Pam4, &[0.5; 64], &cfg);
        let expected = 0.5 * (0.12 + 1.0 + 0.12);
        for &s in &frame.samples[2..] {
            assert!((s - expected).abs() < 1e-15);
        }
        assert_eq!(frame.sample_rate(), 1e11);
    }

    #[test]
    fn channel_identity_delay_and_impulse() {
        let x = frame_of(vec![0.3, -1.0, 2.0, 0.5]);
        assert_eq!(apply_channel(&x, &[1.0]).samples, x.samples);
        assert_eq!(apply_channel(&x, &[0.0, 1.0]).samples, vec![0.0, 0.3, -1.0, 2.0]);
        let imp = frame_of(vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(
            apply_channel(&imp, &[0.12, 1.0, 0.12]).samples,
            vec![0.12, 1.0, 0.12, 0.0, 0.0]
        );
    }

    #[test]
    fn infinite_osnr_is_noiseless() {
        let x = frame_of(vec![0.0, 1.0, 0.0, 1.0]);
        let y = load_noise(&x, f64::INFINITY, 12.5e9, 3).unwrap();
        assert_eq!(y.samples, x.samples);
        assert_eq!(y.truth_osnr_db, f64::INFINITY);
    }

    #[test]
    fn zero_signal_is_rejected() {
        let x = frame_of(vec![0.7; 10]);
        assert!(matches!(load_noise(&x, 30.0, 12.5e9, 0), Err(Error::ZeroSignal)));
    }

    #[test]
    fn noise_variance_formula() {
        // 1 / (10^3.2 * 0.625)
        let v = noise_variance(1.0, 32.0, 12.5e9, 20e9);
        assert!((v - 1.009_531_751_168_309e-3).abs() < 1e-15, "{v}");
    }

    #[test]
    fn measured_noise_variance_matches() {
        let n = 1_000_000;
        let samples: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let x = frame_of(samples);
        let y = load_noise(&x, 32.0, 12.5e9, 11).unwrap();
        let noise: Vec<f64> = y.samples.iter().zip(&x.samples).map(|(a, b)| a - b).collect();
        let mean = noise.iter().sum::<f64>() / n as f64;
        let var = noise.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n as f64;
        let want = noise_variance(1.0, 32.0, 12.5e9, 20e9);
        assert!((var / want - 1.0).abs() < 0.02, "{var} vs {want}");
    }

    #[test]
    fn quantizer_grid() {
        let x = frame_of(vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0]);
        let q = quantize(&x, 2);
        for v in &q.samples {
            assert!([0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0].iter().any(|g| (v - g).abs() < 1e-15));
        }
        assert_eq!(quantize(&q, 2).samples, q.samples);
    }

    #[test]
    fn quantizer_error_bound() {
        let x = frame_of((0..1000).map(|i| (i as f64 * 0.37).sin()).collect());
        let q = quantize(&x, 16);
        let lo = x.samples.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = x.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let half_step = (hi - lo) / 65535.0 / 2.0;
        for (a, b) in x.samples.iter().zip(&q.samples) {
            assert!((a - b).abs() <= half_step * (1.0 + 1e-9));
        }
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig::default().validate().is_ok());
        let mut c = SimConfig { channel_taps: vec![1.0, 1.0], ..SimConfig::default() };
        assert!(c.validate().is_err());
        c = SimConfig { n_symbols: 10, ..SimConfig::default() };
        assert!(c.validate().is_err());
        c = SimConfig { dac_bits: Some(1), ..SimConfig::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn simulated_frames_are_deterministic() {
        let cfg = SimConfig { n_symbols: 128, seed: 9, ..SimConfig::default() };
        let a = simulate_frame(ModulationFormat::Pam8, &cfg).unwrap();
        let b = simulate_frame(ModulationFormat::Pam8, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sps_reduces() {
        assert_eq!(SamplesPerSymbol::new(10, 4), SamplesPerSymbol { num: 5, den: 2 });
    }

    proptest! {
        #[test]
        fn channel_is_linear(
            x in prop::collection::vec(-1.0f64..1.0, 1..24),
            taps in prop::collection::vec(-1.0f64..1.0, 1..6),
            a in -2.0f64..2.0,
            b in -2.0f64..2.0,
            seed in any::<u64>(),
        ) {
            let y: Vec<f64> = generate_symbols(ModulationFormat::Pam8, x.len(), seed);
            let combo: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
            let lhs = apply_channel(&frame_of(combo), &taps).samples;
            let cx = apply_channel(&frame_of(x.clone()), &taps).samples;
            let cy = apply_channel(&frame_of(y), &taps).samples;
            for i in 0..lhs.len() {
                prop_assert!((lhs[i] - (a * cx[i] + b * cy[i])).abs() < 1e-12);
            }
        }

        #[test]
        fn noiseless_samples_stay_in_range(fmt_idx in 0usize..3, seed in any::<u64>()) {
            let format = ModulationFormat::ALL[fmt_idx];
            let cfg = SimConfig { n_symbols: 64, ..SimConfig::default() };
            let frame = modulate(format, &generate_symbols(format, 64, seed), &cfg);
            let top: f64 = cfg.normalized_taps().iter().map(|t| t.abs()).sum();
            prop_assert!(frame.samples.iter().all(|&s| (0.0..=top + 1e-12).contains(&s)));
        }
    }
}
