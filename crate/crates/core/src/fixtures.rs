//! Constructed impulse responses with known ground truth.
//!
//! An exponential RIR is a single direct-path impulse followed, after the
//! early tolerance window, by uniform white noise under the envelope
//! `e^(-δt)` with `δ = ln(1000)/T60`. The direct amplitude is solved so the
//! early/late energy ratio equals the requested DRR exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::{energy, window_samples, ImpulseResponse, RirKind, DEFAULT_T0, LN_1000};
use crate::wave::Waveform;

#[derive(Debug, Clone)]
pub struct ExponentialRir {
    pub t60: f64,
    pub drr_db: f64,
    pub sample_rate: u32,
    pub seed: u64,
    pub direct_index: usize,
    /// Total length in seconds; defaults to `1.2·T60 + 50 ms`.
    pub duration_s: Option<f64>,
    pub id: String,
}

impl ExponentialRir {
    pub fn new(t60: f64, drr_db: f64, sample_rate: u32, seed: u64) -> Self {
        Self {
            t60,
            drr_db,
            sample_rate,
            seed,
            direct_index: (0.01 * sample_rate as f64).round() as usize,
            duration_s: None,
            id: format!("exp_t{:.0}ms_d{}_s{seed}", t60 * 1000.0, drr_db),
        }
    }

    pub fn with_duration(mut self, seconds: f64) -> Self {
        self.duration_s = Some(seconds);
        self
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }
}

/// Builds the response described by `spec`.
///
/// # Panics
///
/// If the requested DRR is so low that the direct impulse would not be the
/// global peak, since the ground truth would then be ill-defined.
pub fn exponential_rir(spec: &ExponentialRir) -> ImpulseResponse {
    let fs = spec.sample_rate as f64;
    let duration = spec.duration_s.unwrap_or(1.2 * spec.t60 + 0.05);
    let len = (duration * fs).round() as usize;
    let tail_start = spec.direct_index + window_samples(DEFAULT_T0, spec.sample_rate) + 1;
    assert!(tail_start < len, "fixture too short for its tolerance window");

    let delta = LN_1000 / spec.t60;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut h = vec![0.0; len];
    for (t, v) in h.iter_mut().enumerate().skip(tail_start) {
        let env = (-delta * (t - spec.direct_index) as f64 / fs).exp();
        *v = rng.gen_range(-1.0..1.0) * env;
    }
    let late_peak = h.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let direct = (10f64.powf(spec.drr_db / 10.0) * energy(&h)).sqrt();
    assert!(
        direct > late_peak,
        "direct amplitude {direct} does not dominate the tail peak {late_peak}"
    );
    h[spec.direct_index] = direct;

    let wave = Waveform::new(h, spec.sample_rate, spec.id.clone()).expect("positive rate");
    ImpulseResponse::new(wave, spec.id.clone(), RirKind::Recorded).expect("non-silent")
}

/// Pseudo-speech test signal: a few harmonics under a syllable-rate
/// envelope plus a little noise. Deterministic per seed.
pub fn toy_utterance(seconds: f64, sample_rate: u32, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fs = sample_rate as f64;
    let f0 = rng.gen_range(90.0..220.0);
    let syllable = rng.gen_range(3.0..6.0);
    let amps: Vec<f64> = (1..=6).map(|k| rng.gen_range(0.2..1.0) / k as f64).collect();
    let n = (seconds * fs).round() as usize;
    (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            let env = (std::f64::consts::PI * syllable * t).sin().abs();
            let voiced: f64 = amps
                .iter()
                .enumerate()
                .map(|(k, a)| a * (2.0 * std::f64::consts::PI * f0 * (k + 1) as f64 * t).sin())
                .sum();
            0.25 * env * voiced + 0.01 * rng.gen_range(-1.0..1.0)
        })
        .collect()
}
