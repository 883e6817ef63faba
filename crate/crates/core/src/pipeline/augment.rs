//! Online augmentation: each training utterance is reverberated with
//! probability `p_apply`, using a random RIR and a random amplitude scale.
//! Every decision is keyed by (seed, epoch, utterance id), so an epoch can be
//! replayed or consumed in any order with identical content.

use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::eval::{remove_partial, utterance_file, MANIFEST_FILE};
use super::inventory::RirInventory;
use super::manifest::{ManifestRow, TrialManifest};
use crate::error::{Error, Result};
use crate::reverb::{convolve, draw_recipe, finalize, LengthPolicy, ReverbRecipe, ScaleRange};
use crate::rng::Substream;
use crate::wave::{read_wave, write_wave, BitDepth, Waveform};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub seed: u64,
    pub epoch: u64,
    pub p_apply: f64,
    pub scale: ScaleRange,
}

impl AugmentConfig {
    pub fn new(seed: u64, epoch: u64) -> Self {
        Self { seed, epoch, p_apply: 0.99, scale: ScaleRange::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedItem {
    pub utt_id: String,
    pub wave: Waveform,
    /// Absent when the item passed through clean.
    pub recipe: Option<ReverbRecipe>,
    pub renormalized: bool,
}

/// Items follow manifest order. The stream is also random-access through
/// [`AugmentationStream::item`], which returns the same content.
#[derive(Debug, Clone)]
pub struct AugmentationStream<'a> {
    manifest: &'a TrialManifest,
    inventory: &'a RirInventory,
    ids: Vec<String>,
    config: AugmentConfig,
    next: usize,
}

impl<'a> AugmentationStream<'a> {
    pub fn new(manifest: &'a TrialManifest, inventory: &'a RirInventory, config: AugmentConfig) -> Result<Self> {
        if !(0.0..=1.0).contains(&config.p_apply) {
            return Err(Error::invalid(format!("p_apply {} outside [0, 1]", config.p_apply)));
        }
        if config.p_apply > 0.0 && inventory.is_empty() {
            return Err(Error::EmptyInventory);
        }
        config.scale.validate()?;
        Ok(Self { manifest, inventory, ids: inventory.ids(), config, next: 0 })
    }

    pub fn config(&self) -> &AugmentConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.manifest.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.rows.is_empty()
    }

    /// The random decisions for one utterance, without touching audio.
    pub fn plan(&self, utt_id: &str) -> Result<Option<ReverbRecipe>> {
        if self.config.p_apply == 0.0 {
            return Ok(None);
        }
        let epoch = self.config.epoch.to_string();
        let mut rng = Substream::new(self.config.seed, &["augment", &epoch, utt_id]);
        if !rng.gen_bool(self.config.p_apply) {
            return Ok(None);
        }
        draw_recipe(&mut rng, &self.ids, self.config.scale).map(Some)
    }

    pub fn item(&self, index: usize) -> Result<AugmentedItem> {
        let row = &self.manifest.rows[index];
        let clean = read_wave(self.manifest.resolve(row))?;
        let Some(recipe) = self.plan(&row.utt_id)? else {
            return Ok(AugmentedItem { utt_id: row.utt_id.clone(), wave: clean, recipe: None, renormalized: false });
        };
        let entry = self.inventory.get(&recipe.rir_id).expect("drawn from inventory ids");
        let n = clean.len();
        let rir = entry.load()?;
        let done = finalize(convolve(&clean, &rir)?, recipe.scale, LengthPolicy::TrimToInput(n))?;
        Ok(AugmentedItem { utt_id: row.utt_id.clone(), wave: done.wave, recipe: Some(recipe), renormalized: done.renormalized })
    }

    fn manifest_row(&self, index: usize, item: &AugmentedItem) -> Result<ManifestRow> {
        let src = &self.manifest.rows[index];
        let mut row = ManifestRow::clean(&item.utt_id, utterance_file(&item.utt_id)?, src.label, &src.condition);
        if let Some(recipe) = &item.recipe {
            let entry = self.inventory.get(&recipe.rir_id).expect("drawn from inventory ids");
            row.rir_id = Some(recipe.rir_id.clone());
            row.rir_t60 = entry.t60();
            row.rir_drr = entry.drr();
            row.scale = Some(recipe.scale);
        }
        Ok(row)
    }
}

impl Iterator for AugmentationStream<'_> {
    type Item = Result<AugmentedItem>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.len() {
            return None;
        }
        self.next += 1;
        Some(self.item(self.next - 1))
    }
}

/// Writes every item of the epoch as a float WAV named `<utt_id>.wav` plus a
/// manifest with the recipes. The first failing file aborts the export and
/// is removed.
pub fn export_augmented_epoch(stream: &AugmentationStream<'_>, out_dir: impl AsRef<Path>) -> Result<TrialManifest> {
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let rows = (0..stream.len())
        .into_par_iter()
        .map(|i| {
            let item = stream.item(i)?;
            let row = stream.manifest_row(i, &item)?;
            let dst = out_dir.join(&row.path);
            write_wave(&item.wave, &dst, BitDepth::Float32).inspect_err(|_| remove_partial(&dst))?;
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = TrialManifest::new(rows, out_dir)?;
    manifest.write(out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}
