use std::path::Path;

use serde::{Deserialize, Serialize};

use hetconv::bench::BenchConfig;
use hetconv::datagen::GenSpec;
use hetconv::training::TrainConfig;

/// Everything a command can be configured with. Sections a command does
/// not use are ignored by it but still validated for unknown keys.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub generate: GenerateConfig,
    pub benchmark: BenchConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerateConfig {
    pub spec: GenSpec,
    /// Percentage of labeled objects in the training split.
    pub train_percent: f64,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        GenerateConfig {
            spec: GenSpec::default(),
            train_percent: 20.0,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<RunConfig> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"train": {"seed": 3}}"#).is_ok());
        assert!(serde_json::from_str::<RunConfig>(r#"{"trian": {}}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(
            r#"{"generate": {"spec": {"noise": 0.1, "bogus": 1}}}"#
        )
        .is_err());
    }
}
