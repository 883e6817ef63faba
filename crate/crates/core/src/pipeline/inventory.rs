//! RIR inventories: a set of impulse responses with their analysis, backed
//! either by memory or by WAV files loaded on demand.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;

use crate::analysis::{analyze, default_octave_centers, AcousticParams, AnalysisConfig, ImpulseResponse, RirKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
enum RirSource {
    Memory(Arc<ImpulseResponse>),
    File(PathBuf),
}

#[derive(Debug, Clone)]
pub struct InventoryEntry {
    pub rir_id: String,
    pub kind: RirKind,
    pub sample_rate: u32,
    /// Direct-path index, absent when the response could not be split.
    pub t_d: Option<usize>,
    /// Absent when analysis failed outright.
    pub params: Option<AcousticParams>,
    /// Why analysis (or just the decay fit) failed.
    pub failure: Option<String>,
    source: RirSource,
}

impl InventoryEntry {
    fn analyzed(ir: &ImpulseResponse, config: &AnalysisConfig, source: RirSource) -> Self {
        let (t_d, params, failure) = match analyze(ir, config) {
            Ok(a) => (Some(a.split.t_d), Some(a.params), a.t60_failure),
            Err(e) => (None, None, Some(e.to_string())),
        };
        Self { rir_id: ir.rir_id.clone(), kind: ir.kind, sample_rate: ir.sample_rate(), t_d, params, failure, source }
    }

    pub fn t60(&self) -> Option<f64> {
        self.params.as_ref().and_then(|p| p.t60)
    }

    pub fn drr(&self) -> Option<f64> {
        self.params.as_ref().map(|p| p.drr)
    }

    pub fn path(&self) -> Option<&Path> {
        match &self.source {
            RirSource::File(p) => Some(p),
            RirSource::Memory(_) => None,
        }
    }

    pub fn load(&self) -> Result<Arc<ImpulseResponse>> {
        match &self.source {
            RirSource::Memory(ir) => Ok(Arc::clone(ir)),
            RirSource::File(path) => {
                let mut ir = ImpulseResponse::load(path, self.kind)?;
                ir.rir_id.clone_from(&self.rir_id);
                Ok(Arc::new(ir))
            }
        }
    }
}

/// RIRs in a fixed order (file-name order when loaded from disk), all at one
/// sample rate.
#[derive(Debug, Clone, Default)]
pub struct RirInventory {
    entries: Vec<InventoryEntry>,
    index: HashMap<String, usize>,
}

impl RirInventory {
    fn from_entries(entries: Vec<InventoryEntry>) -> Result<Self> {
        let mut index = HashMap::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            if index.insert(e.rir_id.clone(), i).is_some() {
                return Err(Error::data(format!("duplicate RIR id {}", e.rir_id)));
            }
            if e.sample_rate != entries[0].sample_rate {
                return Err(Error::SampleRateMismatch { left: entries[0].sample_rate, right: e.sample_rate });
            }
        }
        Ok(Self { entries, index })
    }

    pub fn from_irs(irs: Vec<ImpulseResponse>, config: &AnalysisConfig) -> Result<Self> {
        let entries = irs
            .into_par_iter()
            .map(|ir| {
                let ir = Arc::new(ir);
                InventoryEntry::analyzed(&ir, config, RirSource::Memory(Arc::clone(&ir)))
            })
            .collect();
        Self::from_entries(entries)
    }

    /// Analyzes every `*.wav` in `dir`; samples stay on disk. A file that
    /// parses but cannot be analyzed (e.g. silence) becomes an entry with a
    /// failure, while unreadable files are errors.
    pub fn load_dir(dir: impl AsRef<Path>, kind: RirKind, config: &AnalysisConfig) -> Result<Self> {
        let paths = wav_files(dir.as_ref())?;
        let entries = paths
            .into_par_iter()
            .map(|path| {
                let id = file_stem(&path);
                match ImpulseResponse::load(&path, kind) {
                    Ok(ir) => Ok(InventoryEntry::analyzed(&ir, config, RirSource::File(path))),
                    Err(Error::Silent) => {
                        let rate = crate::wave::read_wave(&path)?.sample_rate;
                        Ok(InventoryEntry {
                            rir_id: id,
                            kind,
                            sample_rate: rate,
                            t_d: None,
                            params: None,
                            failure: Some(Error::Silent.to_string()),
                            source: RirSource::File(path),
                        })
                    }
                    Err(e) => Err(e),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_entries(entries)
    }

    pub fn entries(&self) -> &[InventoryEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.rir_id.clone()).collect()
    }

    pub fn get(&self, rir_id: &str) -> Option<&InventoryEntry> {
        self.index.get(rir_id).map(|&i| &self.entries[i])
    }

    pub fn sample_rate(&self) -> Option<u32> {
        self.entries.first().map(|e| e.sample_rate)
    }

    /// Entries for `ids`, in the order given.
    pub fn subset(&self, ids: &[String]) -> Result<Self> {
        let entries = ids
            .iter()
            .map(|id| self.get(id).cloned().ok_or_else(|| Error::data(format!("unknown RIR id {id}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::from_entries(entries)
    }
}

/// Sorted `*.wav` files directly inside `dir`.
pub fn wav_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let read = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in read {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")) {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}

fn file_stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Analysis report: `rir_id,kind,t_d_samples,t60_s,drr_db`, one
/// `t60_<center>hz` column per octave band, then `status` (`ok` or the
/// failure reason).
pub fn write_analysis_report(inventory: &RirInventory, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let csv_err = |source| Error::Csv { path: path.to_owned(), source };
    let centers = inventory.sample_rate().map(default_octave_centers).unwrap_or_default();
    let mut header: Vec<String> = ["rir_id", "kind", "t_d_samples", "t60_s", "drr_db"].map(String::from).to_vec();
    header.extend(centers.iter().map(|c| format!("t60_{c}hz")));
    header.push("status".into());

    let mut writer = csv::Writer::from_path(path).map_err(csv_err)?;
    writer.write_record(&header).map_err(csv_err)?;
    for e in inventory.entries() {
        let mut record = vec![
            e.rir_id.clone(),
            e.kind.to_string(),
            e.t_d.map(|t| t.to_string()).unwrap_or_default(),
            opt(e.t60()),
            opt(e.drr()),
        ];
        let bands = e.params.as_ref().and_then(|p| p.band_t60.as_ref());
        record.extend((0..centers.len()).map(|i| opt(bands.and_then(|b| b.get(i)).and_then(|b| b.t60))));
        record.push(e.failure.clone().unwrap_or_else(|| "ok".into()));
        writer.write_record(&record).map_err(csv_err)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}
