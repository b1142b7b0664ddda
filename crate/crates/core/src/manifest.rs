//! Run manifests written next to every CLI output.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    /// Command line as typed.
    pub args: Vec<String>,
    /// Every parameter after defaults and paths were resolved.
    pub params: serde_json::Value,
    pub threads: usize,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub seed: Option<u64>,
    pub version: String,
}

impl RunManifest {
    pub fn new(subcommand: &str, args: Vec<String>) -> Self {
        RunManifest {
            subcommand: subcommand.to_string(),
            args,
            params: serde_json::Value::Null,
            threads: 1,
            inputs: Vec::new(),
            outputs: Vec::new(),
            seed: None,
            version: VERSION.to_string(),
        }
    }

    pub fn with_params<T: Serialize>(mut self, params: &T) -> Self {
        self.params = serde_json::to_value(params).expect("parameters serialize");
        self
    }

    /// `<output>.manifest.json`
    pub fn path_for(output: &Path) -> PathBuf {
        let mut s = output.as_os_str().to_owned();
        s.push(".manifest.json");
        PathBuf::from(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::format("manifest", e.line(), e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
