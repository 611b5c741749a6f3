//! Run manifests recorded next to every command's outputs.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use time::format_description::well_known::Rfc3339;
use time::OffsetDateTime;

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    pub library_version: String,
    pub seed: u64,
    pub config: Value,
    pub started_at: String,
    pub finished_at: String,
    /// File names relative to the manifest's directory.
    pub artifacts: Vec<String>,
}

pub fn now_rfc3339() -> String {
    OffsetDateTime::now_utc().format(&Rfc3339).unwrap_or_else(|_| "unknown".into())
}

impl RunManifest {
    pub fn begin(command: &str, seed: u64, config: Value) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command: command.into(),
            library_version: env!("CARGO_PKG_VERSION").into(),
            seed,
            config,
            started_at: now_rfc3339(),
            finished_at: String::new(),
            artifacts: Vec::new(),
        }
    }

    /// Stamps the end time, checks every artifact exists and writes
    /// `manifest.json` into `dir`.
    pub fn finish(mut self, dir: &Path) -> Result<()> {
        self.finished_at = now_rfc3339();
        if let Some(missing) = self.artifacts.iter().find(|a| !dir.join(a).is_file()) {
            return Err(Error::Integrity { path: dir.join(missing), message: "listed artifact was not written".into() });
        }
        self.artifacts.push(MANIFEST_FILE.into());
        let mut text = serde_json::to_string_pretty(&self).expect("manifest serializes");
        text.push('\n');
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

pub fn read_manifest(path: &Path) -> Result<RunManifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::format(path, e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}
