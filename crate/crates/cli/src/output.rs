use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Formats a double with 17 significant digits; negative zero prints as zero.
pub fn num(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.16e}")
}

/// Hex SHA-256 of the canonical JSON form of the effective configuration.
pub fn digest<T: Serialize>(config: &T) -> Result<String, CliError> {
    let bytes = serde_json::to_vec(config).map_err(|e| CliError::Config(e.to_string()))?;
    let hash = Sha256::digest(&bytes);
    let mut out = String::with_capacity(64);
    for b in hash.iter() {
        let _ = write!(out, "{b:02x}");
    }
    Ok(out)
}

/// Comma-separated table built row by row.
pub struct Table {
    text: String,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Self { text }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }
}

#[derive(Debug, Serialize)]
pub struct CheckEntry {
    pub name: String,
    pub pass: bool,
    pub anchor: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_digest: String,
    pub seed: u64,
    pub artifact_version: String,
    pub outputs: Vec<String>,
    pub checks: Vec<CheckEntry>,
    pub exit_code: i32,
}

/// Collects output files for one run and writes the manifest last.
pub struct Writer {
    dir: PathBuf,
    prefix: String,
    outputs: Vec<String>,
}

impl Writer {
    pub fn new(dir: &Path, prefix: &str) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            prefix: prefix.to_string(),
            outputs: Vec::new(),
        })
    }

    fn put(&mut self, suffix: &str, contents: &str) -> Result<(), CliError> {
        let name = format!("{}{suffix}", self.prefix);
        let path = self.dir.join(&name);
        fs::write(&path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.outputs.push(name);
        Ok(())
    }

    pub fn table(&mut self, suffix: &str, table: Table) -> Result<(), CliError> {
        self.put(suffix, &table.text)
    }

    pub fn json<T: Serialize>(&mut self, suffix: &str, value: &T) -> Result<(), CliError> {
        let mut text =
            serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        self.put(suffix, &text)
    }

    /// Writes `<prefix>_manifest.json` and returns its path.
    pub fn finish(
        self,
        command: &str,
        config_digest: String,
        seed: u64,
        checks: Vec<CheckEntry>,
        exit_code: i32,
    ) -> Result<PathBuf, CliError> {
        let manifest = RunManifest {
            command: command.to_string(),
            config_digest,
            seed,
            artifact_version: ARTIFACT_VERSION.to_string(),
            outputs: self.outputs,
            checks,
            exit_code,
        };
        let path = self.dir.join(format!("{}_manifest.json", self.prefix));
        let mut text =
            serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok(path)
    }
}
