//! Trial manifests: one CSV row per utterance with its label, condition and,
//! for reverberated rows, the RIR that was applied.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MANIFEST_HEADER: [&str; 8] = ["utt_id", "path", "label", "condition", "rir_id", "rir_t60", "rir_drr", "scale"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Bonafide,
    Spoof,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Bonafide => "bonafide",
            Label::Spoof => "spoof",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub utt_id: String,
    /// Relative paths resolve against the manifest's directory.
    pub path: String,
    pub label: Label,
    pub condition: String,
    pub rir_id: Option<String>,
    pub rir_t60: Option<f64>,
    pub rir_drr: Option<f64>,
    pub scale: Option<f64>,
}

impl ManifestRow {
    pub fn clean(utt_id: impl Into<String>, path: impl Into<String>, label: Label, condition: impl Into<String>) -> Self {
        Self {
            utt_id: utt_id.into(),
            path: path.into(),
            label,
            condition: condition.into(),
            rir_id: None,
            rir_t60: None,
            rir_drr: None,
            scale: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrialManifest {
    pub rows: Vec<ManifestRow>,
    /// Directory that relative row paths are resolved against.
    pub base_dir: PathBuf,
}

impl TrialManifest {
    pub fn new(rows: Vec<ManifestRow>, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let manifest = Self { rows, base_dir: base_dir.into() };
        manifest.validate()?;
        Ok(manifest)
    }

    /// Utterance ids are non-empty and unique.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::with_capacity(self.rows.len());
        for row in &self.rows {
            if row.utt_id.is_empty() {
                return Err(Error::data("manifest row with empty utt_id"));
            }
            if !seen.insert(row.utt_id.as_str()) {
                return Err(Error::data(format!("duplicate utt_id {}", row.utt_id)));
            }
        }
        Ok(())
    }

    /// Evaluation conditions reverberate spoofed audio only, so no bona fide
    /// row may carry an RIR. (Augmented training manifests may.)
    pub fn check_eval_condition(&self) -> Result<()> {
        match self.rows.iter().find(|r| r.label == Label::Bonafide && r.rir_id.is_some()) {
            Some(row) => Err(Error::data(format!("bonafide row {} carries an RIR", row.utt_id))),
            None => Ok(()),
        }
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let csv_err = |source| Error::Csv { path: path.to_owned(), source };
        let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
        let header = reader.headers().map_err(csv_err)?;
        if header.iter().ne(MANIFEST_HEADER) {
            return Err(Error::data(format!(
                "{}: manifest header must be {}",
                path.display(),
                MANIFEST_HEADER.join(",")
            )));
        }
        let rows = reader.deserialize().collect::<std::result::Result<Vec<ManifestRow>, _>>().map_err(csv_err)?;
        Self::new(rows, path.parent().unwrap_or(Path::new("")))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let csv_err = |source| Error::Csv { path: path.to_owned(), source };
        let mut writer = csv::Writer::from_path(path).map_err(csv_err)?;
        if self.rows.is_empty() {
            writer.write_record(MANIFEST_HEADER).map_err(csv_err)?;
        }
        for row in &self.rows {
            writer.serialize(row).map_err(csv_err)?;
        }
        writer.flush().map_err(|e| Error::io(path, e))
    }

    pub fn resolve(&self, row: &ManifestRow) -> PathBuf {
        self.base_dir.join(&row.path)
    }
}
