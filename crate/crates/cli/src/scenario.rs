//! Calibration/defense scenarios applied identically to target and shadow.

use mia_core::nn::TemperatureConfig;
use mia_core::shadow::ExperimentConfig;

use crate::{CliError, CliResult};

pub const DEFAULT_LS_ALPHA: f64 = 0.1;
pub const DEFAULT_TEMPERATURE_T: f64 = 10.0;
/// Strong enough to pull the default desk-scale net out of the memorization
/// regime (train accuracy below 90%).
pub const DEFAULT_L2_LAMBDA: f64 = 0.04;

/// One training/inference modification; exactly one is active per run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScenarioSpec {
    Standard,
    LabelSmoothing { alpha: f64 },
    Temperature { t: f64 },
    L2 { lambda: f64 },
}

impl ScenarioSpec {
    /// Parse `--scenario` values: a name (`standard`, `label-smoothing`/`ls`,
    /// `temperature`/`temp`, `l2`) with an optional `:value` parameter.
    pub fn parse(raw: &str) -> CliResult<Self> {
        let (name, value) = match raw.split_once(':') {
            Some((n, v)) => (n, Some(v)),
            None => (raw, None),
        };
        let param = |default: f64| -> CliResult<f64> {
            match value {
                None => Ok(default),
                Some(v) => v
                    .parse::<f64>()
                    .map_err(|_| CliError::Usage(format!("bad scenario parameter `{v}`"))),
            }
        };
        match name {
            "standard" => {
                if value.is_some() {
                    return Err(CliError::Usage("standard takes no parameter".into()));
                }
                Ok(ScenarioSpec::Standard)
            }
            "label-smoothing" | "label_smoothing" | "ls" => Ok(ScenarioSpec::LabelSmoothing {
                alpha: param(DEFAULT_LS_ALPHA)?,
            }),
            "temperature" | "temp" => Ok(ScenarioSpec::Temperature {
                t: param(DEFAULT_TEMPERATURE_T)?,
            }),
            "l2" => Ok(ScenarioSpec::L2 {
                lambda: param(DEFAULT_L2_LAMBDA)?,
            }),
            other => Err(CliError::Usage(format!(
                "unknown scenario `{other}` (expected standard, label-smoothing, temperature, l2)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ScenarioSpec::Standard => "standard",
            ScenarioSpec::LabelSmoothing { .. } => "label_smoothing",
            ScenarioSpec::Temperature { .. } => "temperature",
            ScenarioSpec::L2 { .. } => "l2",
        }
    }

    /// Base config with the scenario's knob applied to both models.
    pub fn apply(&self, base: &ExperimentConfig) -> CliResult<ExperimentConfig> {
        let mut config = base.clone();
        match *self {
            ScenarioSpec::Standard => {}
            ScenarioSpec::LabelSmoothing { alpha } => {
                config.training.label_smoothing = alpha;
            }
            ScenarioSpec::Temperature { t } => {
                config.temperature = TemperatureConfig::new(t)
                    .map_err(|e| CliError::Usage(e.to_string()))?;
            }
            ScenarioSpec::L2 { lambda } => {
                config.training.l2_lambda = lambda;
            }
        }
        config
            .validate()
            .map_err(|e| CliError::Usage(format!("scenario produces invalid config: {e}")))?;
        Ok(config)
    }
}
