//! Reverberating speech: fast convolution with an impulse response, the
//! random amplitude scaling used for augmentation, and a clipping guard that
//! renormalizes instead of clipping.

use std::cell::RefCell;

use rand::Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::analysis::ImpulseResponse;
use crate::error::{Error, Result};
use crate::rng::Substream;
use crate::wave::{peak_abs, Waveform};

/// Peak level after the clipping guard fires.
pub const RENORMALIZED_PEAK: f64 = 0.999;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Relative cost of one FFT butterfly against one multiply-add, used to pick
/// between sparse direct accumulation and the FFT path.
const FFT_COST_FACTOR: usize = 6;

fn nonzero_taps(s: &[f64]) -> Vec<(usize, f64)> {
    s.iter().copied().enumerate().filter(|&(_, v)| v != 0.0).collect()
}

/// Direct accumulation over the non-zero taps of `sparse`; exact for a
/// (scaled, shifted) unit impulse.
fn sparse_convolve(dense: &[f64], taps: &[(usize, f64)], out_len: usize) -> Vec<f64> {
    let mut out = vec![0.0; out_len];
    for &(k, g) in taps {
        for (o, v) in out[k..k + dense.len()].iter_mut().zip(dense) {
            *o += g * v;
        }
    }
    out
}

/// Full linear convolution `x ⊛ h` (length `N + M − 1`): zero-padded FFTs
/// when that is cheaper, otherwise direct accumulation over the sparser
/// side's non-zero taps, which also makes impulse kernels exact. Empty
/// inputs give an empty output.
pub fn convolve_samples(x: &[f64], h: &[f64]) -> Vec<f64> {
    if x.is_empty() || h.is_empty() {
        return Vec::new();
    }
    let out_len = x.len() + h.len() - 1;
    let size = out_len.next_power_of_two();
    let fft_cost = FFT_COST_FACTOR * size * (size.trailing_zeros() as usize).max(1);
    let (hx, hh) = (nonzero_taps(x), nonzero_taps(h));
    let (dense, taps) = if hh.len() * x.len() <= hx.len() * h.len() { (x, hh) } else { (h, hx) };
    if taps.len() * dense.len() <= fft_cost {
        sparse_convolve(dense, &taps, out_len)
    } else {
        fft_convolve(x, h)
    }
}

/// Full linear convolution `x ⊛ h` (length `N + M − 1`) via zero-padded FFTs.
/// Empty inputs give an empty output.
pub fn fft_convolve(x: &[f64], h: &[f64]) -> Vec<f64> {
    if x.is_empty() || h.is_empty() {
        return Vec::new();
    }
    let out_len = x.len() + h.len() - 1;
    let size = out_len.next_power_of_two();
    let (fwd, inv) = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft_forward(size), p.plan_fft_inverse(size))
    });
    let padded = |s: &[f64]| {
        let mut buf = vec![Complex::new(0.0, 0.0); size];
        for (b, v) in buf.iter_mut().zip(s) {
            b.re = *v;
        }
        buf
    };
    let mut a = padded(x);
    let mut b = padded(h);
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (u, v) in a.iter_mut().zip(&b) {
        *u *= v;
    }
    inv.process(&mut a);
    let norm = 1.0 / size as f64;
    a[..out_len].iter().map(|c| c.re * norm).collect()
}

/// Reverberates `speech` with `ir`. Sample rates must match exactly; there
/// is no implicit resampling.
pub fn convolve(speech: &Waveform, ir: &ImpulseResponse) -> Result<Waveform> {
    if speech.sample_rate != ir.sample_rate() {
        return Err(Error::SampleRateMismatch { left: speech.sample_rate, right: ir.sample_rate() });
    }
    Waveform::new(convolve_samples(&speech.samples, ir.samples()), speech.sample_rate, speech.source_id.clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LengthPolicy {
    /// Keep the whole convolution tail.
    Full,
    /// Cut to the first `n` samples (the clean input's length).
    TrimToInput(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Finalized {
    pub wave: Waveform,
    /// The scaled signal exceeded full scale and was renormalized.
    pub renormalized: bool,
}

/// Applies `scale`, renormalizes the peak to [`RENORMALIZED_PEAK`] if
/// anything still exceeds full scale, then applies the length policy.
pub fn finalize(mut wave: Waveform, scale: f64, policy: LengthPolicy) -> Result<Finalized> {
    if !(scale > 0.0 && scale <= 1.0) {
        return Err(Error::invalid(format!("scale {scale} outside (0, 1]")));
    }
    wave.samples.iter_mut().for_each(|v| *v *= scale);
    let peak = peak_abs(&wave.samples);
    let renormalized = peak > 1.0;
    if renormalized {
        let g = RENORMALIZED_PEAK / peak;
        wave.samples.iter_mut().for_each(|v| *v *= g);
    }
    if let LengthPolicy::TrimToInput(n) = policy {
        wave.samples.truncate(n);
    }
    Ok(Finalized { wave, renormalized })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleRange {
    pub lo: f64,
    pub hi: f64,
}

impl Default for ScaleRange {
    fn default() -> Self {
        Self { lo: 0.4, hi: 1.0 }
    }
}

impl ScaleRange {
    pub fn validate(&self) -> Result<()> {
        if self.lo > 0.0 && self.lo <= self.hi && self.hi <= 1.0 {
            Ok(())
        } else {
            Err(Error::invalid(format!("scale range [{}, {}] must satisfy 0 < lo ≤ hi ≤ 1", self.lo, self.hi)))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReverbRecipe {
    pub rir_id: String,
    pub scale: f64,
    /// Tag of the substream that made the choice.
    pub seed_tag: String,
}

/// Uniform choice of RIR and uniform scale within `scales`.
pub fn draw_recipe(rng: &mut Substream, inventory_ids: &[String], scales: ScaleRange) -> Result<ReverbRecipe> {
    if inventory_ids.is_empty() {
        return Err(Error::EmptyInventory);
    }
    scales.validate()?;
    let rir_id = inventory_ids[rng.gen_range(0..inventory_ids.len())].clone();
    let scale = if scales.lo == scales.hi { scales.lo } else { rng.gen_range(scales.lo..=scales.hi) };
    Ok(ReverbRecipe { rir_id, scale, seed_tag: rng.tag().to_owned() })
}
