//! Loading JSON configs with `key.path=value` overrides.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

use crate::CliError;

/// Reads `path` (or starts from `{}`), applies the overrides in order and
/// deserializes. Errors name the offending key path.
pub fn load<T: DeserializeOwned>(path: Option<&Path>, overrides: &[String]) -> Result<T, CliError> {
    let mut value = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::config(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::config(format!("{}: {e}", p.display())))?
        }
        None => Value::Object(Map::new()),
    };
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        CliError::config(format!("config key `{path}`: {}", e.into_inner()))
    })
}

/// `a.b.c=value`, where the value is parsed as JSON and otherwise taken as a
/// string.
pub fn apply_override(root: &mut Value, text: &str) -> Result<(), CliError> {
    let (key, raw) = text
        .split_once('=')
        .ok_or_else(|| CliError::config(format!("override `{text}` is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(CliError::config(format!("empty key segment in `{key}`")));
        }
        if !node.is_object() {
            *node = Value::Object(Map::new());
        }
        let map = node.as_object_mut().unwrap();
        if i + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        node = map
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Map::new()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Default, Deserialize, PartialEq)]
    #[serde(deny_unknown_fields, default)]
    struct Inner {
        lr: f64,
        name: String,
    }

    #[derive(Debug, Default, Deserialize, PartialEq)]
    #[serde(deny_unknown_fields, default)]
    struct Outer {
        epochs: usize,
        inner: Inner,
    }

    #[test]
    fn nested_overrides() {
        let c: Outer = load(None, &["inner.lr=0.5".into(), "epochs=3".into(), "inner.name=x y".into()]).unwrap();
        assert_eq!(
            c,
            Outer {
                epochs: 3,
                inner: Inner {
                    lr: 0.5,
                    name: "x y".into()
                }
            }
        );
    }

    #[test]
    fn unknown_key_reports_path() {
        let err = load::<Outer>(None, &["inner.rate=1".into()]).unwrap_err();
        assert_eq!(err.code, 2);
        assert!(err.message.contains("inner"), "{}", err.message);
        assert!(err.message.contains("rate"), "{}", err.message);
    }

    #[test]
    fn type_errors_report_path() {
        let err = load::<Outer>(None, &["inner.lr=\"fast\"".into()]).unwrap_err();
        assert!(err.message.contains("inner.lr"), "{}", err.message);
    }
}
