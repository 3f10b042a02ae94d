//! Settings resolution: built-in defaults, then a JSON config file, then
//! explicit command-line flags.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult, OrExit};

pub const SEED_ENV: &str = "SMOOTHCERT_SEED";

/// Seed used when neither the config file nor a flag sets one.
pub fn default_seed() -> CliResult<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().or_config(&format!("{SEED_ENV}={v:?} is not a 64-bit unsigned integer")),
        Err(_) => Ok(0),
    }
}

fn object(v: Value, what: &str) -> CliResult<Map<String, Value>> {
    match v {
        Value::Object(m) => Ok(m),
        _ => Err(CliError::config(format!("{what} must be a JSON object"))),
    }
}

/// Layers `file` and then the non-null fields of `flags` over `defaults`.
pub fn resolve<T: Serialize + DeserializeOwned>(defaults: &T, file: Option<&Path>, flags: &impl Serialize) -> CliResult<T> {
    let mut merged = object(serde_json::to_value(defaults).or_config("defaults")?, "defaults")?;
    if let Some(path) = file {
        let text = std::fs::read_to_string(path).or_config(&format!("reading config {}", path.display()))?;
        let value: Value = serde_json::from_str(&text).or_config(&format!("parsing config {}", path.display()))?;
        merged.extend(object(value, "config file")?);
    }
    let flags = object(serde_json::to_value(flags).or_config("flags")?, "flags")?;
    merged.extend(flags.into_iter().filter(|(_, v)| !v.is_null()));
    serde_json::from_value(Value::Object(merged)).or_config("invalid settings")
}

/// Absolute form of a user-supplied path, so manifests replay from any
/// working directory.
pub fn absolute(path: &Path) -> CliResult<PathBuf> {
    std::path::absolute(path).or_input(&format!("resolving {}", path.display()))
}

pub fn required<'a>(value: &'a Option<PathBuf>, flag: &str) -> CliResult<&'a PathBuf> {
    value.as_ref().ok_or_else(|| CliError::config(format!("missing required setting --{flag}")))
}
