use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use tenure_core::{MatchingKeyMode, MonthStamp, ValuationMode};

/// Record of one subcommand run, written as `<subcommand>.manifest.json`
/// next to the run's primary output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub inputs: BTreeMap<String, PathBuf>,
    pub outputs: BTreeMap<String, PathBuf>,
    pub seed: Option<u64>,
    pub mode: Option<ValuationMode>,
    pub matching_key: Option<MatchingKeyMode>,
    pub k_classes: Option<usize>,
    pub deflate_to: Option<MonthStamp>,
    pub tool_version: String,
    /// Seconds since the Unix epoch. The only field that varies between
    /// otherwise identical runs.
    pub created_unix: u64,
}

impl RunManifest {
    pub fn new(subcommand: &str) -> Self {
        Self {
            subcommand: subcommand.to_owned(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            seed: None,
            mode: None,
            matching_key: None,
            k_classes: None,
            deflate_to: None,
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        }
    }

    pub fn input(mut self, name: &str, path: &Path) -> Self {
        self.inputs.insert(name.to_owned(), path.to_owned());
        self
    }

    pub fn output(mut self, name: &str, path: &Path) -> Self {
        self.outputs.insert(name.to_owned(), path.to_owned());
        self
    }

    pub fn file_name(&self) -> String {
        format!("{}.manifest.json", self.subcommand)
    }
}
