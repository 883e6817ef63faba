//! Detector scoring: equal error rate, false acceptance at a threshold,
//! pooled and per-condition EER, and false acceptance binned by the T60 and
//! DRR of the RIR each spoofed trial was reverberated with.
//!
//! Convention: higher scores are more bona fide-like. A spoofed trial is
//! falsely accepted when its score is at or above the threshold; a bona fide
//! trial is falsely rejected when its score is below it.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::{Label, TrialManifest};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredTrial {
    pub utt_id: String,
    pub score: f64,
    pub label: Label,
    pub condition: String,
    pub rir_t60: Option<f64>,
    pub rir_drr: Option<f64>,
    /// Whether the trial was reverberated (its key row names an RIR).
    pub has_rir: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreSet {
    pub trials: Vec<ScoredTrial>,
}

/// Reads `utt_id score` lines (whitespace separated). Blank lines are
/// skipped; duplicate ids and malformed lines are errors.
pub fn read_scores(path: impl AsRef<Path>) -> Result<Vec<(String, f64)>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut seen = HashSet::new();
    let mut scores = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let bad = || Error::data(format!("{}:{}: expected `utt_id score`", path.display(), n + 1));
        let [id, value] = fields[..] else {
            return Err(bad());
        };
        let score: f64 = value.parse().map_err(|_| bad())?;
        if !score.is_finite() {
            return Err(bad());
        }
        if !seen.insert(id.to_owned()) {
            return Err(Error::data(format!("{}:{}: duplicate utt_id {id}", path.display(), n + 1)));
        }
        scores.push((id.to_owned(), score));
    }
    Ok(scores)
}

impl ScoreSet {
    /// Joins scores with their key rows. Every scored id must be in the key;
    /// key rows without a score are left out. `invert` negates scores for
    /// detectors where higher means more spoof-like.
    pub fn join(scores: &[(String, f64)], key: &TrialManifest, invert: bool) -> Result<Self> {
        let rows: HashMap<&str, _> = key.rows.iter().map(|r| (r.utt_id.as_str(), r)).collect();
        let trials = scores
            .iter()
            .map(|(id, score)| {
                let row = rows.get(id.as_str()).ok_or_else(|| Error::data(format!("scored utt_id {id} is not in the key")))?;
                Ok(ScoredTrial {
                    utt_id: id.clone(),
                    score: if invert { -score } else { *score },
                    label: row.label,
                    condition: row.condition.clone(),
                    rir_t60: row.rir_t60,
                    rir_drr: row.rir_drr,
                    has_rir: row.rir_id.is_some(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { trials })
    }

    fn split(&self) -> (Vec<f64>, Vec<f64>) {
        let mut bonafide = Vec::new();
        let mut spoof = Vec::new();
        for t in &self.trials {
            match t.label {
                Label::Bonafide => bonafide.push(t.score),
                Label::Spoof => spoof.push(t.score),
            }
        }
        (bonafide, spoof)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EerResult {
    /// Percent.
    pub eer: f64,
    pub threshold: f64,
    pub n_bonafide: usize,
    pub n_spoof: usize,
}

/// Sweeps every distinct score as a threshold and keeps the one with the
/// smallest `|FAR − FRR|` (the smaller threshold on ties); the EER is the
/// mean of FAR and FRR there. Comparisons are done on exact counts.
pub fn compute_eer(bonafide: &[f64], spoof: &[f64]) -> Result<EerResult> {
    if bonafide.is_empty() || spoof.is_empty() {
        return Err(Error::data(format!(
            "EER needs both classes (bonafide {}, spoof {})",
            bonafide.len(),
            spoof.len()
        )));
    }
    if bonafide.iter().chain(spoof).any(|s| !s.is_finite()) {
        return Err(Error::data("non-finite score"));
    }
    let (nb, ns) = (bonafide.len() as u128, spoof.len() as u128);
    let mut b = bonafide.to_vec();
    let mut s = spoof.to_vec();
    b.sort_by(f64::total_cmp);
    s.sort_by(f64::total_cmp);
    let mut thresholds: Vec<f64> = b.iter().chain(&s).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();

    // cursors: bonafide below θ, spoof below θ
    let (mut ib, mut is) = (0usize, 0usize);
    let mut best: Option<(u128, f64, usize, usize)> = None;
    for &theta in &thresholds {
        while ib < b.len() && b[ib] < theta {
            ib += 1;
        }
        while is < s.len() && s[is] < theta {
            is += 1;
        }
        let false_accepts = (s.len() - is) as u128;
        let false_rejects = ib as u128;
        // |FA/ns − FR/nb| scaled by ns·nb
        let gap = (false_accepts * nb).abs_diff(false_rejects * ns);
        if best.is_none_or(|(g, ..)| gap < g) {
            best = Some((gap, theta, s.len() - is, ib));
        }
    }
    let (_, threshold, fa, fr) = best.expect("at least two scores");
    let far = fa as f64 / ns as f64;
    let frr = fr as f64 / nb as f64;
    Ok(EerResult { eer: 50.0 * (far + frr), threshold, n_bonafide: bonafide.len(), n_spoof: spoof.len() })
}

pub fn eer(scores: &ScoreSet) -> Result<EerResult> {
    let (b, s) = scores.split();
    compute_eer(&b, &s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FarCell {
    /// Percent.
    pub far: f64,
    pub count: usize,
}

/// False acceptance over the spoof trials passing `filter`; `None` when no
/// trial passes.
pub fn far_at(scores: &ScoreSet, threshold: f64, filter: impl Fn(&ScoredTrial) -> bool) -> Option<FarCell> {
    let (accepted, count) = scores
        .trials
        .iter()
        .filter(|t| t.label == Label::Spoof && filter(t))
        .fold((0usize, 0usize), |(a, n), t| (a + usize::from(t.score >= threshold), n + 1));
    (count > 0).then(|| FarCell { far: 100.0 * accepted as f64 / count as f64, count })
}

pub const GRID_T60_RANGE: (f64, f64) = (0.02, 2.0);
pub const GRID_DRR_RANGE: (f64, f64) = (-10.0, 30.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FarGrid {
    pub t60_edges: Vec<f64>,
    pub drr_edges: Vec<f64>,
    /// `cells[i][j]` covers T60 bin `i` and DRR bin `j`; `None` when empty.
    pub cells: Vec<Vec<Option<FarCell>>>,
}

fn edges((lo, hi): (f64, f64), bins: usize) -> Vec<f64> {
    (0..=bins).map(|k| if k == bins { hi } else { lo + (hi - lo) * k as f64 / bins as f64 }).collect()
}

/// Bin index for `v`; values outside the range clamp to the edge bins.
fn bin_of(v: f64, (lo, hi): (f64, f64), bins: usize) -> usize {
    let pos = ((v - lo) / (hi - lo) * bins as f64).floor();
    if pos.is_nan() || pos < 0.0 {
        0
    } else {
        (pos as usize).min(bins - 1)
    }
}

/// FAR per cell of a uniform T60 × DRR grid over the reverberated spoof
/// trials. Spoofed trials without an RIR are not part of the grid; a
/// reverberated one missing its T60 or DRR is an error.
pub fn far_grid(scores: &ScoreSet, threshold: f64, t60_bins: usize, drr_bins: usize) -> Result<FarGrid> {
    if t60_bins == 0 || drr_bins == 0 {
        return Err(Error::invalid("grid needs at least one bin per axis"));
    }
    let mut counts = vec![vec![(0usize, 0usize); drr_bins]; t60_bins];
    for t in scores.trials.iter().filter(|t| t.label == Label::Spoof && t.has_rir) {
        let (Some(t60), Some(drr)) = (t.rir_t60, t.rir_drr) else {
            return Err(Error::data(format!("spoof trial {} is missing RIR T60/DRR", t.utt_id)));
        };
        let cell = &mut counts[bin_of(t60, GRID_T60_RANGE, t60_bins)][bin_of(drr, GRID_DRR_RANGE, drr_bins)];
        cell.0 += usize::from(t.score >= threshold);
        cell.1 += 1;
    }
    let cells = counts
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|(a, n)| (n > 0).then(|| FarCell { far: 100.0 * a as f64 / n as f64, count: n }))
                .collect()
        })
        .collect();
    Ok(FarGrid { t60_edges: edges(GRID_T60_RANGE, t60_bins), drr_edges: edges(GRID_DRR_RANGE, drr_bins), cells })
}

impl FarGrid {
    pub fn total_count(&self) -> usize {
        self.cells.iter().flatten().flatten().map(|c| c.count).sum()
    }

    /// `t60_lo,t60_hi,drr_lo,drr_hi,far,count`, one row per cell; empty
    /// cells have a blank `far`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let csv_err = |source| Error::Csv { path: path.to_owned(), source };
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        w.write_record(["t60_lo", "t60_hi", "drr_lo", "drr_hi", "far", "count"]).map_err(csv_err)?;
        for (i, row) in self.cells.iter().enumerate() {
            for (j, cell) in row.iter().enumerate() {
                w.write_record([
                    self.t60_edges[i].to_string(),
                    self.t60_edges[i + 1].to_string(),
                    self.drr_edges[j].to_string(),
                    self.drr_edges[j + 1].to_string(),
                    cell.map(|c| c.far.to_string()).unwrap_or_default(),
                    cell.map_or(0, |c| c.count).to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledEer {
    pub pooled: EerResult,
    /// Sorted by condition name.
    pub per_condition: BTreeMap<String, EerResult>,
}

pub fn pooled_eer(scores: &ScoreSet) -> Result<PooledEer> {
    let mut groups: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for t in &scores.trials {
        if t.condition.is_empty() {
            return Err(Error::data(format!("trial {} has an empty condition label", t.utt_id)));
        }
        let g = groups.entry(&t.condition).or_default();
        match t.label {
            Label::Bonafide => g.0.push(t.score),
            Label::Spoof => g.1.push(t.score),
        }
    }
    let per_condition = groups
        .into_iter()
        .map(|(c, (b, s))| {
            compute_eer(&b, &s).map(|r| (c.to_owned(), r)).map_err(|e| Error::data(format!("condition {c}: {e}")))
        })
        .collect::<Result<_>>()?;
    Ok(PooledEer { pooled: eer(scores)?, per_condition })
}
