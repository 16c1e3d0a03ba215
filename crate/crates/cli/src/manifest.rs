use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use heatpencil_core::io::write_json;
use serde::Serialize;
use serde_json::Value;

use crate::CliError;

pub const SEED_VAR: &str = "HEATPENCIL_SEED";

/// Record of one invocation. Every artifact a subcommand writes is listed in `outputs`, and
/// JSON artifacts carry the manifest's file name under the `manifest` key.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: &'static str,
    /// Seconds since the Unix epoch; `SOURCE_DATE_EPOCH` overrides the clock.
    pub timestamp: u64,
    /// Recorded for provenance only, the computation is deterministic.
    pub seed: Option<String>,
    pub config_paths: Vec<PathBuf>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub parameters: Value,
}

impl RunManifest {
    pub fn new(subcommand: &'static str, parameters: Value) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            subcommand,
            timestamp: timestamp(),
            seed: std::env::var(SEED_VAR).ok(),
            config_paths: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            parameters,
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        Ok(write_json(path, self)?)
    }
}

fn timestamp() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or_else(|| {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        })
}

/// `result.json` -> `result.manifest.json`, next to the artifact.
pub fn manifest_path_for(artifact: &Path) -> PathBuf {
    artifact.with_extension("manifest.json")
}

/// Serializes `value` and adds a `manifest` key naming the manifest file.
pub fn with_manifest<T: Serialize>(value: &T, manifest: &Path) -> Result<Value, CliError> {
    let mut v = serde_json::to_value(value).map_err(|e| CliError::Input(e.to_string()))?;
    if let Value::Object(map) = &mut v {
        let name = manifest
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        map.insert("manifest".into(), Value::String(name));
    }
    Ok(v)
}
