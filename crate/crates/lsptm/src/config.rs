//! Experiment configuration files and their digest.

use serde_json::Value;
use sha2::{Digest, Sha256};

use lsptm_core::models::BackboneKind;
use lsptm_core::train::ExperimentConfig;

use crate::error::{Error, Result};

/// Recursively overlays `patch` on `base`; objects merge key by key, any
/// other value replaces.
pub fn deep_merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => deep_merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Defaults for `kind` with the user's partial JSON merged on top.
pub fn resolve(kind: BackboneKind, overrides: Option<&str>) -> Result<ExperimentConfig> {
    let mut value = serde_json::to_value(ExperimentConfig::defaults_for(kind)).expect("config serializes");
    if let Some(text) = overrides {
        let patch: Value = serde_json::from_str(text).map_err(Error::json("config"))?;
        if !patch.is_object() {
            return Err(Error::Invalid("config must be a JSON object".into()));
        }
        deep_merge(&mut value, patch);
    }
    let config: ExperimentConfig = serde_json::from_value(value).map_err(Error::json("config"))?;
    if config.model.kind() != kind {
        return Err(Error::Invalid(format!(
            "config describes a `{}` model but --backbone is `{}`",
            config.model.kind().id(),
            kind.id()
        )));
    }
    config.validate()?;
    Ok(config)
}

/// JSON with object keys in sorted order and no insignificant whitespace.
pub fn canonical_json<S: serde::Serialize>(value: &S) -> String {
    let v = serde_json::to_value(value).expect("value serializes");
    serde_json::to_string(&v).expect("JSON value serializes")
}

/// Hex SHA-256 of the canonical JSON form.
pub fn config_digest(config: &ExperimentConfig) -> String {
    hex::encode(Sha256::digest(canonical_json(config).as_bytes()))
}
