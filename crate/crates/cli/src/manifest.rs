//! Run manifests: everything needed to replay a command bit-identically.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::commands::Command;

/// Densification of one input label map: `values[i]` is the original value
/// of dense label `i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMapRecord {
    pub path: PathBuf,
    pub values: Vec<u64>,
}

/// Written next to every command's outputs. Carries no timestamps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    /// Full invocation with absolute input paths, including the seed.
    pub invocation: Command,
    pub out_dir: PathBuf,
    /// Output file names relative to `out_dir`.
    pub outputs: Vec<String>,
    pub label_maps: Vec<LabelMapRecord>,
}

impl RunManifest {
    pub fn new(
        invocation: Command,
        out_dir: PathBuf,
        outputs: Vec<String>,
        label_maps: Vec<LabelMapRecord>,
    ) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            invocation,
            out_dir,
            outputs,
            label_maps,
        }
    }
}
