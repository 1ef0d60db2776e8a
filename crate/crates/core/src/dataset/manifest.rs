//! JSON-lines sample manifests referencing frame files on disk.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::{self, Timestamp};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub storm_id: String,
    #[serde(with = "time::serde_iso")]
    pub t: Timestamp,
    pub frame_paths: Vec<String>,
    pub label: u8,
    /// `null` when no environmental record matched.
    pub env: Option<Vec<f64>>,
    pub env_names: Vec<String>,
}

pub fn write_manifest(entries: &[ManifestEntry]) -> Result<String> {
    let mut out = String::new();
    for e in entries {
        out.push_str(&serde_json::to_string(e)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn read_manifest(text: &str) -> Result<Vec<ManifestEntry>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::parse(i + 1, e.to_string())))
        .collect()
}
