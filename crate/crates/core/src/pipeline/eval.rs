//! Reverberant evaluation sets: spoofed utterances are convolved with RIRs
//! drawn from an inventory, bona fide utterances are copied byte for byte.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::inventory::RirInventory;
use super::manifest::{Label, ManifestRow, TrialManifest};
use crate::error::{Error, Result};
use crate::reverb::{convolve, draw_recipe, finalize, LengthPolicy, ScaleRange};
use crate::rng::Substream;
use crate::wave::{read_wave, write_wave, BitDepth};

pub const MANIFEST_FILE: &str = "manifest.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalBuildConfig {
    pub seed: u64,
    pub condition: String,
    /// Amplitude scaling range; evaluation builds default to no scaling.
    pub scale: ScaleRange,
    /// Keep the reverberant tail (default) or cut to the clean length.
    pub trim_to_input: bool,
}

impl EvalBuildConfig {
    pub fn new(seed: u64, condition: impl Into<String>) -> Self {
        Self { seed, condition: condition.into(), scale: ScaleRange { lo: 1.0, hi: 1.0 }, trim_to_input: false }
    }
}

/// Output file name for an utterance; ids are used verbatim so they must be
/// usable as file names.
pub(crate) fn utterance_file(utt_id: &str) -> Result<String> {
    if utt_id.is_empty() || utt_id.contains(['/', '\\']) || utt_id == "." || utt_id == ".." {
        return Err(Error::data(format!("utt_id {utt_id:?} cannot be used as a file name")));
    }
    Ok(format!("{utt_id}.wav"))
}

/// Builds the condition into `out_dir` and writes its manifest there as
/// [`MANIFEST_FILE`]. Each spoof row's RIR comes from a substream keyed by
/// its utterance id, so the result does not depend on thread count.
pub fn build_reverb_eval(
    source: &TrialManifest,
    inventory: &RirInventory,
    config: &EvalBuildConfig,
    out_dir: impl AsRef<Path>,
) -> Result<TrialManifest> {
    let out_dir = out_dir.as_ref();
    if config.condition.is_empty() {
        return Err(Error::invalid("condition name is empty"));
    }
    config.scale.validate()?;
    let has_spoof = source.rows.iter().any(|r| r.label == Label::Spoof);
    if has_spoof && inventory.is_empty() {
        return Err(Error::EmptyInventory);
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let ids = inventory.ids();

    let rows = source
        .rows
        .par_iter()
        .map(|row| {
            let file = utterance_file(&row.utt_id)?;
            let src = source.resolve(row);
            let dst = out_dir.join(&file);
            let mut out = ManifestRow::clean(&row.utt_id, &file, row.label, &config.condition);
            match row.label {
                Label::Bonafide => {
                    std::fs::copy(&src, &dst).map_err(|e| Error::io(&src, e))?;
                }
                Label::Spoof => {
                    let mut rng = Substream::new(config.seed, &["build-eval", &row.utt_id]);
                    let recipe = draw_recipe(&mut rng, &ids, config.scale)?;
                    let entry = inventory.get(&recipe.rir_id).expect("drawn from inventory ids");
                    let speech = read_wave(&src)?;
                    let rir = entry.load()?;
                    let reverb = convolve(&speech, &rir)?;
                    let policy = if config.trim_to_input { LengthPolicy::TrimToInput(speech.len()) } else { LengthPolicy::Full };
                    let done = finalize(reverb, recipe.scale, policy)?;
                    if done.renormalized {
                        log::debug!("{}: renormalized after convolution", row.utt_id);
                    }
                    write_wave(&done.wave, &dst, BitDepth::Float32).inspect_err(|_| remove_partial(&dst))?;
                    out.rir_t60 = entry.t60();
                    out.rir_drr = entry.drr();
                    out.rir_id = Some(recipe.rir_id);
                    out.scale = Some(recipe.scale);
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;

    let manifest = TrialManifest::new(rows, out_dir)?;
    manifest.check_eval_condition()?;
    manifest.write(out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

/// Best-effort removal of a file left behind by a failed write.
pub(crate) fn remove_partial(path: &Path) {
    let _ = std::fs::remove_file(path);
}
