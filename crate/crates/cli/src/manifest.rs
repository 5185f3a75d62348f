use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use serde::{Deserialize, Serialize};

use crate::commands::Settings;
use crate::error::UsageError;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SCHEMA_VERSION: u32 = 1;

/// Everything needed to reproduce an output directory.
///
/// `settings` is the fully resolved configuration; replaying it with any
/// worker count rewrites every CSV byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub code_version: String,
    pub command_line: Vec<String>,
    pub settings: Settings,
    pub seeds: Vec<u64>,
    pub workers: usize,
    pub started_unix_s: f64,
    pub finished_unix_s: f64,
    /// Manifest this run was replayed from, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replay_of: Option<PathBuf>,
    pub outputs: Vec<String>,
    /// Per-row parameter records (optima, grid axes or fit parameters).
    pub records: serde_json::Value,
}

pub fn now_unix_s() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

impl RunManifest {
    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
        let m: RunManifest =
            serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))?;
        if m.schema_version != SCHEMA_VERSION {
            return Err(UsageError(format!(
                "manifest schema version {} is not supported (expected {SCHEMA_VERSION})",
                m.schema_version
            ))
            .into());
        }
        Ok(m)
    }

    pub fn write(&self, dir: &Path) -> anyhow::Result<()> {
        let path = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }
}
