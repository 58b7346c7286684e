use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// What a stage read, wrote and how long it took. Timings and solver
/// statistics live here so that the data files stay reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub inputs: Vec<String>,
    pub output_dir: String,
    pub config_hash: String,
    pub version: String,
    /// Wall-clock seconds per stage.
    pub timings: BTreeMap<String, f64>,
    /// File name (relative to `output_dir`) to SHA-256 of its bytes.
    pub outputs: BTreeMap<String, String>,
    pub solver: BTreeMap<String, Value>,
}

impl RunManifest {
    pub fn new(subcommand: &str, inputs: &[&Path], output_dir: &Path, config_hash: &str) -> Self {
        Self {
            subcommand: subcommand.to_string(),
            inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
            output_dir: output_dir.display().to_string(),
            config_hash: config_hash.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            timings: BTreeMap::new(),
            outputs: BTreeMap::new(),
            solver: BTreeMap::new(),
        }
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("serializable")
    }

    /// `<subcommand>.manifest.json`, so stages sharing a directory keep
    /// their own record.
    pub fn file_name(&self) -> String {
        format!("{}.manifest.json", self.subcommand)
    }

    pub fn read(dir: &Path, subcommand: &str) -> Result<Self> {
        let path = dir.join(format!("{subcommand}.manifest.json"));
        let v = super::read_json(&path)?;
        serde_json::from_value(v).map_err(|e| Error::parse(path.display().to_string(), e.to_string()))
    }
}
