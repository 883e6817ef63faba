//! Run records: what a command was asked to do and checksums of everything
//! it read and wrote. Paths are stored relative to their root so that reruns
//! into a different directory produce the same record.

use std::fs::File;
use std::io;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;
use reverb_forge::config::RunConfig;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const RECORD_FILE: &str = "run-record.json";

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunRecord {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub parameters: serde_json::Value,
    pub config: RunConfig,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut hasher = Sha256::new();
    io::copy(&mut file, &mut hasher).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(hasher.finalize()))
}

/// Files to checksum, each with the label it is recorded under.
#[derive(Debug, Default)]
pub struct FileSet {
    files: Vec<(String, PathBuf)>,
}

impl FileSet {
    pub fn add(&mut self, label: impl Into<String>, path: impl Into<PathBuf>) {
        self.files.push((label.into(), path.into()));
    }

    pub fn digest(mut self) -> Result<Vec<FileDigest>> {
        self.files.sort();
        self.files.dedup();
        self.files
            .par_iter()
            .map(|(label, path)| Ok(FileDigest { path: label.clone(), sha256: sha256_file(path)? }))
            .collect()
    }
}

impl RunRecord {
    pub fn new(command: &'static str, parameters: serde_json::Value, config: &RunConfig) -> Self {
        Self {
            tool: "reverb-forge",
            version: env!("CARGO_PKG_VERSION"),
            command,
            parameters,
            config: config.clone(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }
}
