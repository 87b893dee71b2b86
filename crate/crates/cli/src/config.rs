//! Config loading and hashing.

use std::fs;
use std::path::Path;

use mia_core::shadow::ExperimentConfig;
use sha2::{Digest, Sha256};

use crate::{CliError, CliResult};

/// Load the experiment config, or the built-in desk-scale defaults when no
/// path is given. Unknown keys and malformed JSON are usage errors that name
/// the offending key and line.
pub fn load_config(path: Option<&Path>) -> CliResult<ExperimentConfig> {
    let config = match path {
        None => ExperimentConfig::default_desk_scale(),
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                CliError::Usage(format!("cannot read config {}: {e}", path.display()))
            })?;
            serde_json::from_str(&text).map_err(|e| {
                CliError::Usage(format!("invalid config {}: {e}", path.display()))
            })?
        }
    };
    config
        .validate()
        .map_err(|e| CliError::Usage(format!("invalid config: {e}")))?;
    Ok(config)
}

/// Canonical JSON rendering of a config (what gets hashed and echoed).
pub fn config_json(config: &ExperimentConfig) -> String {
    serde_json::to_string_pretty(config).expect("config serializes")
}

/// SHA-256 of the canonical config JSON, hex-encoded.
pub fn config_sha256(config: &ExperimentConfig) -> String {
    let mut hasher = Sha256::new();
    hasher.update(config_json(config).as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
