//! Run manifest: what a run produced, from which config, and how long each
//! stage took. Wall-clock times live only here so the report files stay
//! byte-identical across reruns.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::{io_runtime, CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub toolkit_version: String,
    pub command: String,
    pub scenario: String,
    pub master_seed: u64,
    pub config_sha256: String,
    pub stages: Vec<StageRecord>,
    /// Artifact name to path relative to the run directory.
    pub artifacts: BTreeMap<String, String>,
    pub failed_stage: Option<String>,
}

impl RunManifest {
    pub fn new(command: &str, scenario: &str, master_seed: u64, config_sha256: String) -> Self {
        RunManifest {
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            scenario: scenario.to_string(),
            master_seed,
            config_sha256,
            stages: Vec::new(),
            artifacts: BTreeMap::new(),
            failed_stage: None,
        }
    }

    /// Time one stage; on failure the manifest records the stage name so
    /// partial artifacts remain interpretable. The body receives the
    /// manifest back for artifact registration.
    pub fn stage<T>(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut Self) -> CliResult<T>,
    ) -> CliResult<T> {
        let start = Instant::now();
        match body(self) {
            Ok(value) => {
                self.stages.push(StageRecord {
                    name: name.to_string(),
                    wall_ms: start.elapsed().as_millis() as u64,
                });
                Ok(value)
            }
            Err(err) => {
                self.failed_stage = Some(name.to_string());
                Err(err)
            }
        }
    }

    pub fn add_artifact(&mut self, name: &str, relative_path: &str) {
        self.artifacts
            .insert(name.to_string(), relative_path.to_string());
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        let path = dir.join(MANIFEST_FILE);
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(&path, json).map_err(|e| io_runtime("writing manifest", e))
    }

    pub fn load(dir: &Path) -> CliResult<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path)
            .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Runtime(format!("malformed manifest {}: {e}", path.display())))
    }
}
