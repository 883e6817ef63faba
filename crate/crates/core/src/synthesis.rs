//! Synthetic RIRs with target T60 and DRR, derived from a recorded parent.
//!
//! The parent is split into early and late parts. The late field is
//! re-enveloped by `e^(-(δ_tgt - δ_org)(t - t_d))` to move its decay rate to
//! the target, per octave band when enough bands have a measurable decay.
//! The early window is then scaled so the early/late energy ratio equals the
//! target DRR. A combination whose late-field peak exceeds the scaled early
//! peak is rejected and the caller draws a fresh target.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    analyze, band_t60s, decay_t60, default_octave_centers, energy, late_bands, late_t60, split_early_late,
    AcousticParams, AnalysisConfig, EarlyLateSplit, FitRange, ImpulseResponse, RirKind, LN_1000,
};
use crate::error::{Error, Result};
use crate::rng::Substream;
use crate::wave::{peak_abs, Waveform};

/// Peak level of every synthesized output.
pub const OUTPUT_PEAK: f64 = 0.9;
pub const DEFAULT_RETRY_CAP: usize = 1000;
/// Minimum number of bands with a valid decay fit for per-band reshaping.
const MIN_VALID_BANDS: usize = 3;
/// Decay-rate correction passes after the initial reshape.
const CALIBRATION_ROUNDS: usize = 8;
/// Relative T60 error at which calibration stops.
const CALIBRATION_TOLERANCE: f64 = 0.002;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetRanges {
    pub t60: (f64, f64),
    pub drr: (f64, f64),
}

impl Default for TargetRanges {
    fn default() -> Self {
        Self { t60: (0.02, 2.0), drr: (-10.0, 30.0) }
    }
}

impl TargetRanges {
    pub fn validate(&self) -> Result<()> {
        let (t_lo, t_hi) = self.t60;
        let (d_lo, d_hi) = self.drr;
        if !(t_lo > 0.0 && t_lo <= t_hi && t_hi.is_finite()) {
            return Err(Error::invalid(format!("bad T60 range [{t_lo}, {t_hi}]")));
        }
        if !(d_lo.is_finite() && d_hi.is_finite() && d_lo <= d_hi) {
            return Err(Error::invalid(format!("bad DRR range [{d_lo}, {d_hi}]")));
        }
        Ok(())
    }

    pub fn target(&self, t60: f64, drr: f64) -> Result<SynthesisTarget> {
        let inside = |v: f64, (lo, hi): (f64, f64)| v >= lo && v <= hi;
        if !inside(t60, self.t60) || !inside(drr, self.drr) {
            return Err(Error::invalid(format!("target ({t60} s, {drr} dB) outside {self:?}")));
        }
        Ok(SynthesisTarget { t60, drr })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthesisTarget {
    pub t60: f64,
    pub drr: f64,
}

/// Independent uniform draws over both closed ranges.
pub fn sample_target<R: Rng + ?Sized>(rng: &mut R, ranges: &TargetRanges) -> SynthesisTarget {
    SynthesisTarget {
        t60: rng.gen_range(ranges.t60.0..=ranges.t60.1),
        drr: rng.gen_range(ranges.drr.0..=ranges.drr.1),
    }
}

fn decay_rate(t60: f64) -> Result<f64> {
    if !(t60 > 0.0 && t60.is_finite()) {
        return Err(Error::invalid(format!("T60 must be positive, got {t60}")));
    }
    Ok(LN_1000 / t60)
}

/// Broadband late-field reshaping. Returns `late'` in the parent index space.
pub fn reshape_t60(split: &EarlyLateSplit, t60_orig: f64, t60_target: f64) -> Result<Vec<f64>> {
    let components = [DecayComponent { samples: split.late[split.late_start()..].to_vec(), t60: t60_orig }];
    reshape_components(split, &components, t60_target, 0.0)
}

/// A piece of the late field (starting at `late_start`) with its own decay.
#[derive(Debug, Clone)]
struct DecayComponent {
    samples: Vec<f64>,
    t60: f64,
}

/// `correction` is added to every component's rate change.
fn reshape_components(
    split: &EarlyLateSplit,
    components: &[DecayComponent],
    t60_target: f64,
    correction: f64,
) -> Result<Vec<f64>> {
    let target_rate = decay_rate(t60_target)?;
    let fs = split.sample_rate as f64;
    let start = split.late_start();
    let mut out = vec![0.0; split.len()];
    for c in components {
        let rate_change = target_rate - decay_rate(c.t60)? + correction;
        if rate_change == 0.0 {
            for (o, v) in out[start..].iter_mut().zip(&c.samples) {
                *o += v;
            }
            continue;
        }
        // envelope advanced by a per-sample factor; drift stays near n·ε
        let step = (-rate_change / fs).exp();
        let mut gain = (-rate_change * (start - split.t_d) as f64 / fs).exp();
        for (o, v) in out[start..].iter_mut().zip(&c.samples) {
            *o += v * gain;
            gain *= step;
        }
    }
    Ok(out)
}

/// Early gain that brings the early/late energy ratio to `drr_target`.
pub fn drr_gain(early: &[f64], late: &[f64], drr_target: f64) -> Result<f64> {
    let e_early = energy(early);
    let e_late = energy(late);
    if e_early == 0.0 {
        return Err(Error::data("early window has no energy"));
    }
    if e_late == 0.0 {
        return Err(Error::data("late field has no energy"));
    }
    Ok((10f64.powf(drr_target / 10.0) * e_late / e_early).sqrt())
}

/// Returns `early'` scaled to the target DRR against `late`.
pub fn reshape_drr(early: &[f64], late: &[f64], drr_target: f64) -> Result<Vec<f64>> {
    let alpha = drr_gain(early, late, drr_target)?;
    Ok(early.iter().map(|v| v * alpha).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisConfig {
    pub analysis: AnalysisConfig,
    /// Reshape per octave band when enough bands yield a decay.
    pub per_band: bool,
    pub retry_cap: usize,
    pub ranges: TargetRanges,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            analysis: AnalysisConfig { bands: false, ..AnalysisConfig::default() },
            per_band: true,
            retry_cap: DEFAULT_RETRY_CAP,
            ranges: TargetRanges::default(),
        }
    }
}

/// A parent RIR with its analysis precomputed, ready for repeated
/// synthesis.
#[derive(Debug, Clone)]
pub struct SynthesisParent {
    pub ir: ImpulseResponse,
    pub split: EarlyLateSplit,
    pub params: AcousticParams,
    components: Vec<DecayComponent>,
}

impl SynthesisParent {
    pub fn prepare(ir: ImpulseResponse, config: &SynthesisConfig) -> Result<Self> {
        let split = split_early_late(&ir, config.analysis.t_0)?;
        let t60 = late_t60(&split, config.analysis.fit)?;
        let drr = crate::analysis::estimate_drr(&split);
        let late = split.late[split.late_start()..].to_vec();

        let mut band_report = None;
        let mut components = Vec::new();
        let centers = default_octave_centers(ir.sample_rate());
        if config.per_band && centers.len() >= MIN_VALID_BANDS {
            let bands = band_t60s(&split, &centers, config.analysis.fit)?;
            let valid: Vec<usize> = (0..bands.len()).filter(|&i| bands[i].t60.is_some()).collect();
            if valid.len() >= MIN_VALID_BANDS {
                let filtered = late_bands(&split, &centers)?;
                // bands without a decay stay in the residual, which follows
                // the broadband rate
                let mut residual = late.clone();
                for &i in &valid {
                    for (r, v) in residual.iter_mut().zip(&filtered[i]) {
                        *r -= v;
                    }
                }
                for &i in &valid {
                    components.push(DecayComponent {
                        samples: filtered[i].clone(),
                        t60: bands[i].t60.expect("valid band"),
                    });
                }
                components.push(DecayComponent { samples: residual, t60 });
            }
            band_report = Some(bands);
        }
        if components.is_empty() {
            components.push(DecayComponent { samples: late, t60 });
        }

        Ok(Self { ir, split, params: AcousticParams { t60: Some(t60), drr, band_t60: band_report }, components })
    }

    pub fn id(&self) -> &str {
        &self.ir.rir_id
    }

    pub fn t60(&self) -> f64 {
        self.params.t60.expect("prepared parents have a T60")
    }

    pub fn is_per_band(&self) -> bool {
        self.components.len() > 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    /// The reshaped late field peaks above the rescaled early part.
    LateExceedsEarly,
    /// The output's decay cannot be re-measured, so its T60 is unverifiable.
    UnmeasurableDecay,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SynthesisResult {
    Accepted(ImpulseResponse),
    Rejected(RejectReason),
}

#[derive(Debug, Clone)]
pub struct SynthesisOutcome {
    pub result: SynthesisResult,
    pub attempts: usize,
    /// Re-estimated on the output, present whenever one was built.
    pub achieved: Option<AcousticParams>,
}

impl SynthesisOutcome {
    pub fn is_accepted(&self) -> bool {
        matches!(self.result, SynthesisResult::Accepted(_))
    }
}

/// Reshaped but unnormalized parts, exposed so callers can inspect the
/// acceptance decision.
#[derive(Debug, Clone)]
pub struct ReshapedParts {
    pub early: Vec<f64>,
    pub late: Vec<f64>,
    pub accepted: bool,
}

/// Reshapes the late field to the target decay, then corrects the rate until
/// the decay estimator reads the target on the result. Real late fields are
/// not pure exponentials, so a single pass built from the parent's fitted
/// rate lands off target, most of all when a fast decay is slowed down.
fn calibrated_late(parent: &SynthesisParent, t60_target: f64, fit: FitRange) -> Result<Vec<f64>> {
    let split = &parent.split;
    let target_rate = decay_rate(t60_target)?;
    let mut correction = 0.0;
    let mut late = reshape_components(split, &parent.components, t60_target, correction)?;
    for _ in 0..CALIBRATION_ROUNDS {
        let Ok(measured) = decay_t60(&late[split.late_start()..], split.sample_rate, fit) else {
            break;
        };
        if (measured - t60_target).abs() <= CALIBRATION_TOLERANCE * t60_target {
            break;
        }
        correction += target_rate - LN_1000 / measured;
        late = reshape_components(split, &parent.components, t60_target, correction)?;
    }
    Ok(late)
}

pub fn reshape_parts(parent: &SynthesisParent, target: SynthesisTarget, fit: FitRange) -> Result<ReshapedParts> {
    let late = calibrated_late(parent, target.t60, fit)?;
    let early = reshape_drr(&parent.split.early, &late, target.drr)?;
    let accepted = peak_abs(&late) <= peak_abs(&early);
    Ok(ReshapedParts { early, late, accepted })
}

pub fn synthesize(parent: &SynthesisParent, target: SynthesisTarget, out_id: &str, config: &SynthesisConfig) -> Result<SynthesisOutcome> {
    let parts = reshape_parts(parent, target, config.analysis.fit)?;
    if !parts.accepted {
        let result = SynthesisResult::Rejected(RejectReason::LateExceedsEarly);
        return Ok(SynthesisOutcome { result, attempts: 1, achieved: None });
    }
    let ir = recombine(parent, &parts, out_id)?;
    let achieved = analyze(&ir, &config.analysis)?.params;
    if achieved.t60.is_none() {
        let result = SynthesisResult::Rejected(RejectReason::UnmeasurableDecay);
        return Ok(SynthesisOutcome { result, attempts: 1, achieved: Some(achieved) });
    }
    Ok(SynthesisOutcome { result: SynthesisResult::Accepted(ir), attempts: 1, achieved: Some(achieved) })
}

/// Pre-direct samples verbatim, then `early' + late'`, peak-normalized.
fn recombine(parent: &SynthesisParent, parts: &ReshapedParts, out_id: &str) -> Result<ImpulseResponse> {
    let h = parent.ir.samples();
    let start = parent.split.window_start;
    let mut out: Vec<f64> = Vec::with_capacity(h.len());
    out.extend_from_slice(&h[..start]);
    out.extend(parts.early[start..].iter().zip(&parts.late[start..]).map(|(e, l)| e + l));
    let peak = peak_abs(&out);
    for v in &mut out {
        *v *= OUTPUT_PEAK / peak;
    }
    let wave = Waveform::new(out, parent.ir.sample_rate(), out_id)?;
    ImpulseResponse::new(wave, out_id, RirKind::Synthetic)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationLogRow {
    pub parent_id: String,
    pub slot: usize,
    pub attempt: usize,
    pub t60_target: f64,
    pub drr_target: f64,
    pub accepted: bool,
    pub t60_achieved: Option<f64>,
    pub drr_achieved: Option<f64>,
    pub reject_reason: Option<RejectReason>,
}

#[derive(Debug, Clone)]
pub struct SyntheticRir {
    pub ir: ImpulseResponse,
    pub parent_id: String,
    pub slot: usize,
    pub target: SynthesisTarget,
    pub achieved: AcousticParams,
}

pub fn synthetic_id(parent_id: &str, slot: usize) -> String {
    format!("{parent_id}_syn{slot}")
}

#[derive(Debug, Clone, Default)]
pub struct ExpansionReport {
    pub log: Vec<GenerationLogRow>,
    pub accepted: usize,
    /// `(parent_id, slot)` pairs that exhausted the retry cap.
    pub unfilled: Vec<(String, usize)>,
}

impl ExpansionReport {
    fn merge(&mut self, other: ExpansionReport) {
        self.log.extend(other.log);
        self.accepted += other.accepted;
        self.unfilled.extend(other.unfilled);
    }
}

/// Fills `n_per_parent` slots for one parent, passing each accepted output
/// to `sink` in slot order.
pub fn expand_parent(
    parent: &SynthesisParent,
    n_per_parent: usize,
    seed: u64,
    config: &SynthesisConfig,
    sink: &mut dyn FnMut(SyntheticRir) -> Result<()>,
) -> Result<ExpansionReport> {
    let mut rng = Substream::new(seed, &["synthesize", parent.id()]);
    let mut report = ExpansionReport::default();
    for slot in 0..n_per_parent {
        let out_id = synthetic_id(parent.id(), slot);
        let mut filled = false;
        for attempt in 0..config.retry_cap {
            let target = sample_target(&mut rng, &config.ranges);
            let outcome = synthesize(parent, target, &out_id, config)?;
            let achieved = outcome.achieved.clone();
            report.log.push(GenerationLogRow {
                parent_id: parent.id().to_string(),
                slot,
                attempt,
                t60_target: target.t60,
                drr_target: target.drr,
                accepted: outcome.is_accepted(),
                t60_achieved: achieved.as_ref().and_then(|a| a.t60),
                drr_achieved: achieved.as_ref().map(|a| a.drr),
                reject_reason: match &outcome.result {
                    SynthesisResult::Rejected(r) => Some(*r),
                    SynthesisResult::Accepted(_) => None,
                },
            });
            if let SynthesisResult::Accepted(ir) = outcome.result {
                sink(SyntheticRir {
                    ir,
                    parent_id: parent.id().to_string(),
                    slot,
                    target,
                    achieved: achieved.expect("accepted outputs carry params"),
                })?;
                report.accepted += 1;
                filled = true;
                break;
            }
        }
        if !filled {
            log::warn!("{}: slot {slot} unfilled after {} attempts", parent.id(), config.retry_cap);
            report.unfilled.push((parent.id().to_string(), slot));
        }
    }
    Ok(report)
}

/// Expands every parent in parallel, streaming accepted outputs into `sink`.
/// Call order across parents is unspecified; content is not.
pub fn expand_inventory_with<F>(
    parents: &[SynthesisParent],
    n_per_parent: usize,
    seed: u64,
    config: &SynthesisConfig,
    sink: F,
) -> Result<ExpansionReport>
where
    F: Fn(SyntheticRir) -> Result<()> + Sync,
{
    if n_per_parent == 0 {
        return Err(Error::invalid("n_per_parent must be at least 1"));
    }
    let reports: Vec<ExpansionReport> = parents
        .par_iter()
        .map(|p| expand_parent(p, n_per_parent, seed, config, &mut |rir| sink(rir)))
        .collect::<Result<_>>()?;
    let mut total = ExpansionReport::default();
    for r in reports {
        total.merge(r);
    }
    Ok(total)
}

/// In-memory expansion, ordered by parent then slot.
pub fn expand_inventory(
    parents: &[SynthesisParent],
    n_per_parent: usize,
    seed: u64,
    config: &SynthesisConfig,
) -> Result<(Vec<SyntheticRir>, ExpansionReport)> {
    if n_per_parent == 0 {
        return Err(Error::invalid("n_per_parent must be at least 1"));
    }
    let per_parent: Vec<(Vec<SyntheticRir>, ExpansionReport)> = parents
        .par_iter()
        .map(|p| {
            let mut rirs = Vec::with_capacity(n_per_parent);
            let report = expand_parent(p, n_per_parent, seed, config, &mut |r| {
                rirs.push(r);
                Ok(())
            })?;
            Ok((rirs, report))
        })
        .collect::<Result<_>>()?;
    let mut all = Vec::new();
    let mut total = ExpansionReport::default();
    for (rirs, report) in per_parent {
        all.extend(rirs);
        total.merge(report);
    }
    Ok((all, total))
}
