//! Optional JSON run configuration. Every key is optional; unknown keys are
//! rejected, including inside the nested sections.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub quiet: Option<bool>,
    pub classes: Option<Vec<String>>,
    pub per_class: Option<usize>,
    pub distances: Option<Vec<f64>>,
    pub k: Option<usize>,
    pub channel: Option<Value>,
    pub generator: Option<Value>,
    pub dsp: Option<Value>,
    pub tree: Option<Value>,
    pub forest: Option<Value>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }
}

/// Overlays the keys of `patch` on the serialized `base`. The section type's
/// own `deny_unknown_fields` catches misspelled keys.
pub fn overlay<T: Serialize + DeserializeOwned>(base: T, patch: Option<&Value>, section: &str) -> Result<T, CliError> {
    let Some(patch) = patch else {
        return Ok(base);
    };
    let Value::Object(fields) = patch else {
        return Err(CliError::Usage(format!("config section {section:?} must be an object")));
    };
    let mut merged = serde_json::to_value(base).expect("config sections serialize");
    let target = merged.as_object_mut().expect("config sections are objects");
    for (key, value) in fields {
        target.insert(key.clone(), value.clone());
    }
    serde_json::from_value(merged).map_err(|e| CliError::Usage(format!("config section {section:?}: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use breathsim::channel::ChannelConfig;
    use breathsim::ml::TrainConfig;
    use serde_json::json;

    #[test]
    fn overlay_keeps_unset_fields() {
        let c = overlay(ChannelConfig::default(), Some(&json!({"noise_sigma": 0.0})), "channel").unwrap();
        assert_eq!(
            c,
            ChannelConfig {
                noise_sigma: 0.0,
                ..ChannelConfig::default()
            }
        );
        let t = overlay(TrainConfig::forest(), Some(&json!({"n_trees": 7})), "forest").unwrap();
        assert_eq!(
            t,
            TrainConfig {
                n_trees: 7,
                ..TrainConfig::forest()
            }
        );
    }

    #[test]
    fn overlay_rejects_unknown_keys() {
        let err = overlay(ChannelConfig::default(), Some(&json!({"noise": 0.0})), "channel").unwrap_err();
        assert!(matches!(err, CliError::Usage(_)));
        assert!(serde_json::from_value::<FileConfig>(json!({"sead": 1})).is_err());
    }
}
