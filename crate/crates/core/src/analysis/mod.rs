//! Early/late decomposition of room impulse responses and the DRR and T60
//! estimators built on it.
//!
//! The early response is the RIR restricted to `[t_d - t_0, t_d + t_0]`
//! around the direct path `t_d`; the late field is everything after that
//! window. Samples ahead of the window belong to neither. Reverberation time
//! is measured on the late field alone, by Schroeder backward integration and
//! a least-squares line fit over a dB range of the decay curve.

mod filters;

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use filters::{default_octave_centers, OctaveFilter};

use crate::error::{Error, Result};
use crate::wave::{read_wave, Waveform};

/// Tolerance window around the direct path, seconds.
pub const DEFAULT_T0: f64 = 0.0025;

/// `ln(10^3)`: amplitude decay rate times T60 for a -60 dB energy drop.
pub const LN_1000: f64 = 6.907_755_278_982_137;

/// Fraction of the analyzed sequence at its end where a crossing of the lower
/// fit bound is attributed to truncation rather than decay.
const TRUNCATION_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RirKind {
    Recorded,
    Synthetic,
    Simulated,
}

impl fmt::Display for RirKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RirKind::Recorded => "recorded",
            RirKind::Synthetic => "synthetic",
            RirKind::Simulated => "simulated",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponse {
    pub wave: Waveform,
    pub rir_id: String,
    pub kind: RirKind,
}

impl ImpulseResponse {
    pub fn new(wave: Waveform, rir_id: impl Into<String>, kind: RirKind) -> Result<Self> {
        if wave.samples.iter().all(|&s| s == 0.0) {
            return Err(Error::Silent);
        }
        Ok(Self { wave, rir_id: rir_id.into(), kind })
    }

    /// Loads a RIR whose id is the file stem.
    pub fn load(path: impl AsRef<Path>, kind: RirKind) -> Result<Self> {
        let wave = read_wave(path)?;
        let id = wave.source_id.clone();
        Self::new(wave, id, kind)
    }

    pub fn samples(&self) -> &[f64] {
        &self.wave.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.wave.sample_rate
    }
}

/// Energy-decay range used for the T60 line fit, both bounds in dB with
/// `upper > lower` (e.g. -5 and -25).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitRange {
    pub upper_db: f64,
    pub lower_db: f64,
}

impl Default for FitRange {
    fn default() -> Self {
        Self { upper_db: -5.0, lower_db: -25.0 }
    }
}

impl FitRange {
    pub fn new(upper_db: f64, lower_db: f64) -> Result<Self> {
        if !(upper_db <= 0.0 && lower_db < upper_db && lower_db.is_finite()) {
            return Err(Error::invalid(format!("bad fit range ({upper_db}, {lower_db}) dB")));
        }
        Ok(Self { upper_db, lower_db })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EarlyLateSplit {
    /// Direct-path index.
    pub t_d: usize,
    /// Tolerance window, seconds.
    pub t_0: f64,
    pub sample_rate: u32,
    /// Inclusive early-window bounds after clamping.
    pub window_start: usize,
    pub window_end: usize,
    pub early: Vec<f64>,
    pub late: Vec<f64>,
}

impl EarlyLateSplit {
    pub fn len(&self) -> usize {
        self.early.len()
    }

    pub fn is_empty(&self) -> bool {
        self.early.is_empty()
    }

    /// First index of the late field.
    pub fn late_start(&self) -> usize {
        self.window_end + 1
    }

    pub fn early_energy(&self) -> f64 {
        energy(&self.early[self.window_start..=self.window_end])
    }

    pub fn late_energy(&self) -> f64 {
        energy(&self.late[self.late_start().min(self.late.len())..])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandT60 {
    pub center_hz: f64,
    pub t60: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AcousticParams {
    /// Broadband reverberation time, absent when the decay fit failed.
    pub t60: Option<f64>,
    /// Direct-to-reverberant ratio in dB; `+inf` for an empty late field.
    pub drr: f64,
    pub band_t60: Option<Vec<BandT60>>,
}

pub(crate) fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Index of the largest magnitude sample, first occurrence on ties.
pub fn direct_path_index(h: &[f64]) -> Result<usize> {
    let mut best = 0;
    let mut peak = 0.0;
    for (i, v) in h.iter().enumerate() {
        if v.abs() > peak {
            peak = v.abs();
            best = i;
        }
    }
    if peak == 0.0 {
        return Err(Error::Silent);
    }
    Ok(best)
}

pub fn detect_direct_path(ir: &ImpulseResponse) -> Result<usize> {
    direct_path_index(ir.samples())
}

pub fn window_samples(t_0: f64, sample_rate: u32) -> usize {
    (t_0 * sample_rate as f64).round() as usize
}

pub fn split_early_late(ir: &ImpulseResponse, t_0: f64) -> Result<EarlyLateSplit> {
    split_at(ir.samples(), ir.sample_rate(), detect_direct_path(ir)?, t_0)
}

/// Splits around a known direct-path index.
pub fn split_at(h: &[f64], sample_rate: u32, t_d: usize, t_0: f64) -> Result<EarlyLateSplit> {
    if !(t_0 > 0.0 && t_0.is_finite()) {
        return Err(Error::invalid(format!("tolerance window must be positive, got {t_0}")));
    }
    let n = h.len();
    if t_d >= n {
        return Err(Error::invalid(format!("direct path {t_d} outside {n}-sample response")));
    }
    let w = window_samples(t_0, sample_rate);
    if 2 * w + 1 > n {
        return Err(Error::WindowTooLong { window: 2 * w + 1, len: n });
    }
    let window_start = t_d.saturating_sub(w);
    let window_end = (t_d + w).min(n - 1);

    let mut early = vec![0.0; n];
    let mut late = vec![0.0; n];
    early[window_start..=window_end].copy_from_slice(&h[window_start..=window_end]);
    late[window_end + 1..].copy_from_slice(&h[window_end + 1..]);

    Ok(EarlyLateSplit { t_d, t_0, sample_rate, window_start, window_end, early, late })
}

/// `10·log10(E_early / E_late)`. An empty late field yields `+inf`, an empty
/// early window `-inf`.
pub fn estimate_drr(split: &EarlyLateSplit) -> f64 {
    drr_from_energies(split.early_energy(), split.late_energy())
}

pub(crate) fn drr_from_energies(early: f64, late: f64) -> f64 {
    match (early > 0.0, late > 0.0) {
        (_, false) => f64::INFINITY,
        (false, true) => f64::NEG_INFINITY,
        (true, true) => 10.0 * (early / late).log10(),
    }
}

/// Schroeder backward integral, normalized to the total energy, in dB.
pub fn energy_decay_curve(h: &[f64]) -> Result<Vec<f64>> {
    let mut tail = vec![0.0; h.len()];
    let mut acc = 0.0;
    for (t, v) in h.iter().enumerate().rev() {
        acc += v * v;
        tail[t] = acc;
    }
    if acc == 0.0 {
        return Err(Error::Silent);
    }
    let total = acc;
    Ok(tail.into_iter().map(|e| 10.0 * (e / total).log10()).collect())
}

/// Reverberation time of a decaying sequence: line fit to its decay curve
/// between the fit bounds, extrapolated to -60 dB.
pub fn decay_t60(h: &[f64], sample_rate: u32, fit: FitRange) -> Result<f64> {
    let edc = energy_decay_curve(h)?;
    let start = edc.iter().position(|&v| v <= fit.upper_db);
    let end = edc.iter().position(|&v| v <= fit.lower_db);
    let (start, end) = match (start, end) {
        (Some(s), Some(e)) if e > s => (s, e),
        _ => return Err(Error::InsufficientDecay { floor_db: fit.lower_db }),
    };
    // Any finite sequence reaches every level at its end; a crossing that
    // late measures the truncation, not the room.
    if end as f64 > (1.0 - TRUNCATION_MARGIN) * (h.len() - 1) as f64 {
        return Err(Error::InsufficientDecay { floor_db: fit.lower_db });
    }

    let fs = sample_rate as f64;
    let n = (end - start + 1) as f64;
    let (mut sx, mut sy) = (0.0, 0.0);
    for (i, &y) in edc.iter().enumerate().take(end + 1).skip(start) {
        sx += i as f64 / fs;
        sy += y;
    }
    let (mx, my) = (sx / n, sy / n);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, &y) in edc.iter().enumerate().take(end + 1).skip(start) {
        let dx = i as f64 / fs - mx;
        sxy += dx * (y - my);
        sxx += dx * dx;
    }
    let slope = sxy / sxx;
    if !(slope < 0.0) {
        return Err(Error::NonNegativeSlope { slope_db_per_s: slope });
    }
    Ok(-60.0 / slope)
}

/// Broadband T60 of the late field, using the default tolerance window.
pub fn estimate_t60(ir: &ImpulseResponse, fit: FitRange) -> Result<f64> {
    let split = split_early_late(ir, DEFAULT_T0)?;
    late_t60(&split, fit)
}

pub fn late_t60(split: &EarlyLateSplit, fit: FitRange) -> Result<f64> {
    decay_t60(&split.late[split.late_start()..], split.sample_rate, fit)
}

fn check_centers(centers: &[f64], sample_rate: u32) -> Result<()> {
    if centers.is_empty() {
        return Err(Error::invalid("empty band center list"));
    }
    let nyquist = sample_rate as f64 / 2.0;
    if let Some(c) = centers.iter().find(|&&c| !(c > 0.0 && c < nyquist)) {
        return Err(Error::invalid(format!("band center {c} Hz outside (0, {nyquist}) Hz")));
    }
    Ok(())
}

/// Late field split into octave bands, each band causally filtered.
pub fn late_bands(split: &EarlyLateSplit, centers: &[f64]) -> Result<Vec<Vec<f64>>> {
    check_centers(centers, split.sample_rate)?;
    let late = &split.late[split.late_start()..];
    Ok(centers
        .iter()
        .map(|&c| OctaveFilter::new(c, split.sample_rate as f64).apply(late))
        .collect())
}

/// Per-band T60 of the late field. Bands whose decay fit fails are reported
/// with `t60: None`.
pub fn band_t60s(split: &EarlyLateSplit, centers: &[f64], fit: FitRange) -> Result<Vec<BandT60>> {
    let bands = late_bands(split, centers)?;
    Ok(centers
        .iter()
        .zip(bands)
        .map(|(&center_hz, band)| BandT60 {
            center_hz,
            t60: decay_t60(&band, split.sample_rate, fit).ok(),
        })
        .collect())
}

pub fn octave_band_t60(ir: &ImpulseResponse, centers: &[f64], fit: FitRange) -> Result<Vec<BandT60>> {
    check_centers(centers, ir.sample_rate())?;
    band_t60s(&split_early_late(ir, DEFAULT_T0)?, centers, fit)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisConfig {
    pub t_0: f64,
    pub fit: FitRange,
    pub bands: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self { t_0: DEFAULT_T0, fit: FitRange::default(), bands: true }
    }
}

/// Full analysis of one RIR.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub split: EarlyLateSplit,
    pub params: AcousticParams,
    /// Why the broadband fit failed, when it did.
    pub t60_failure: Option<String>,
}

pub fn analyze(ir: &ImpulseResponse, config: &AnalysisConfig) -> Result<Analysis> {
    let split = split_early_late(ir, config.t_0)?;
    let drr = estimate_drr(&split);
    let (t60, t60_failure) = match late_t60(&split, config.fit) {
        Ok(t) => (Some(t), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let band_t60 = if config.bands {
        let centers = default_octave_centers(ir.sample_rate());
        if centers.is_empty() {
            None
        } else {
            Some(band_t60s(&split, &centers, config.fit)?)
        }
    } else {
        None
    };
    Ok(Analysis { split, params: AcousticParams { t60, drr, band_t60 }, t60_failure })
}
