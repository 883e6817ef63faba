//! Filtering an RIR inventory by its estimated parameters and drawing a
//! random held-out test set from the survivors.

use std::fmt;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::inventory::RirInventory;
use crate::error::{Error, Result};
use crate::rng::Substream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionConfig {
    pub t60_max: f64,
    pub drr_min: f64,
    pub drr_max: f64,
    pub n_test: usize,
    pub seed: u64,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        Self { t60_max: 2.0, drr_min: -10.0, drr_max: 30.0, n_test: 30, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExclusionReason {
    T60ExceedsMax,
    DrrOutOfRange,
    /// The decay fit failed, so the T60 rule cannot be checked.
    T60Unmeasurable,
    AnalysisFailed,
}

impl fmt::Display for ExclusionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExclusionReason::T60ExceedsMax => "t60-exceeds-max",
            ExclusionReason::DrrOutOfRange => "drr-out-of-range",
            ExclusionReason::T60Unmeasurable => "t60-unmeasurable",
            ExclusionReason::AnalysisFailed => "analysis-failed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct InventoryPartition {
    pub train: Vec<String>,
    pub test: Vec<String>,
    pub excluded: Vec<(String, ExclusionReason)>,
}

/// Exclusion check against the estimated parameters; `None` keeps the RIR.
fn exclusion(t60: Option<f64>, drr: Option<f64>, config: &PartitionConfig) -> Option<ExclusionReason> {
    let Some(drr) = drr else {
        return Some(ExclusionReason::AnalysisFailed);
    };
    match t60 {
        None => Some(ExclusionReason::T60Unmeasurable),
        Some(t) if t > config.t60_max => Some(ExclusionReason::T60ExceedsMax),
        _ if !(config.drr_min..=config.drr_max).contains(&drr) => Some(ExclusionReason::DrrOutOfRange),
        _ => None,
    }
}

/// Survivors keep inventory order in both sets; the test set is a uniform
/// draw without replacement keyed by the seed.
pub fn filter_and_partition(inventory: &RirInventory, config: &PartitionConfig) -> Result<InventoryPartition> {
    if !(config.t60_max > 0.0 && config.drr_min <= config.drr_max) {
        return Err(Error::invalid(format!(
            "bad filter: t60_max {} s, drr [{}, {}] dB",
            config.t60_max, config.drr_min, config.drr_max
        )));
    }
    let mut survivors = Vec::new();
    let mut excluded = Vec::new();
    for e in inventory.entries() {
        match exclusion(e.t60(), e.drr(), config) {
            Some(reason) => excluded.push((e.rir_id.clone(), reason)),
            None => survivors.push(e.rir_id.clone()),
        }
    }
    if config.n_test > 0 && config.n_test >= survivors.len() {
        return Err(Error::invalid(format!(
            "n_test {} must be smaller than the {} surviving RIRs",
            config.n_test,
            survivors.len()
        )));
    }
    let mut rng = Substream::new(config.seed, &["partition"]);
    let mut in_test = vec![false; survivors.len()];
    for i in index::sample(&mut rng, survivors.len(), config.n_test) {
        in_test[i] = true;
    }
    let (test, train): (Vec<_>, Vec<_>) = survivors.into_iter().zip(in_test).partition(|(_, t)| *t);
    Ok(InventoryPartition {
        train: train.into_iter().map(|(id, _)| id).collect(),
        test: test.into_iter().map(|(id, _)| id).collect(),
        excluded,
    })
}
