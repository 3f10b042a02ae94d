use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliResult, OrExit};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Everything needed to re-run a command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    /// Fully resolved settings of the command.
    pub config: Value,
    pub inputs: Vec<PathBuf>,
    /// Files written next to the manifest.
    pub outputs: Vec<String>,
    pub duration_secs: f64,
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> CliResult<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).or_config("serializing manifest")?;
        std::fs::write(&path, text + "\n")?;
        Ok(path)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let path = if path.is_dir() { path.join(MANIFEST_FILE) } else { path.to_path_buf() };
        let text = std::fs::read_to_string(&path).or_input(&format!("reading {}", path.display()))?;
        serde_json::from_str(&text).or_input(&format!("parsing {}", path.display()))
    }
}
