//! Run manifests: resolved configuration plus SHA-256 digests of inputs and
//! outputs.
//!
//! CSV outputs are digested with their wall-clock columns (`time_ms` and any
//! header ending in `_ms`) blanked, so a replay compares everything except
//! timings.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::args::Command;

pub const TOOL: &str = "graphvar";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: PathBuf,
    pub sha256: String,
    /// CSV columns left out of the digest.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub excluded_columns: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    /// Arguments as typed.
    pub argv: Vec<String>,
    /// Full configuration with every default filled in.
    pub config: Command,
    pub seed: u64,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
}

impl Manifest {
    pub fn new(argv: Vec<String>, config: Command, seed: u64) -> Self {
        Self {
            tool: TOOL.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            argv,
            config,
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(FileRecord {
            path: path.to_path_buf(),
            sha256: sha256_file(path)?,
            excluded_columns: Vec::new(),
        });
        Ok(())
    }

    pub fn add_output(&mut self, path: &Path) -> Result<()> {
        self.outputs.push(output_record(path, false)?);
        Ok(())
    }

    pub fn add_csv_output(&mut self, path: &Path) -> Result<()> {
        self.outputs.push(output_record(path, true)?);
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        fs::write(path, json + "\n").with_context(|| format!("writing {}", path.display()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_bytes(&bytes))
}

fn is_time_column(name: &str) -> bool {
    name == "time_ms" || name.ends_with("_ms")
}

/// Digest of a file; for CSV files, wall-clock columns are blanked first.
pub fn output_record(path: &Path, csv: bool) -> Result<FileRecord> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let text = if csv { std::str::from_utf8(&bytes).ok() } else { None };
    let Some(text) = text else {
        return Ok(FileRecord {
            path: path.to_path_buf(),
            sha256: sha256_bytes(&bytes),
            excluded_columns: Vec::new(),
        });
    };
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let skip: Vec<bool> = header.iter().map(|h| is_time_column(h)).collect();
    let mut hasher = Sha256::new();
    hasher.update(header.join(",").as_bytes());
    hasher.update(b"\n");
    for line in lines {
        let kept: Vec<&str> = line
            .split(',')
            .enumerate()
            .map(|(i, cell)| if skip.get(i).copied().unwrap_or(false) { "" } else { cell })
            .collect();
        hasher.update(kept.join(",").as_bytes());
        hasher.update(b"\n");
    }
    Ok(FileRecord {
        path: path.to_path_buf(),
        sha256: hex::encode(hasher.finalize()),
        excluded_columns: header
            .iter()
            .zip(&skip)
            .filter(|(_, &s)| s)
            .map(|(h, _)| h.to_string())
            .collect(),
    })
}
