//! Layered command configuration: defaults, then a JSON file, then `--set key=value`.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::CliError;

/// Merges `overlay` into `base`. Every key of the overlay must already exist in
/// the base, except inside a tagged object whose `kind` changes, which is replaced whole.
pub fn merge_strict(base: &mut Value, overlay: Value, path: &str) -> Result<(), CliError> {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            let switches_kind = matches!((b.get("kind"), o.get("kind")), (Some(x), Some(y)) if x != y);
            if switches_kind {
                *b = o;
                return Ok(());
            }
            for (k, v) in o {
                let child = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                let slot = b.get_mut(&k).ok_or_else(|| CliError::Usage(format!("unknown config key `{child}`")))?;
                merge_strict(slot, v, &child)?;
            }
            Ok(())
        }
        (b, o) => {
            *b = o;
            Ok(())
        }
    }
}

/// Applies one `dotted.key=value` override. The value is parsed as JSON when
/// possible and taken as a string otherwise.
pub fn apply_set(config: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("override `{assignment}` is not of the form key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut overlay = value;
    for part in key.rsplit('.') {
        if part.is_empty() {
            return Err(CliError::Usage(format!("empty component in config key `{key}`")));
        }
        let mut m = serde_json::Map::new();
        m.insert(part.to_string(), overlay);
        overlay = Value::Object(m);
    }
    merge_strict(config, overlay, "")
}

/// Resolves a configuration from its defaults, an optional JSON file and overrides.
pub fn resolve<C: Serialize + DeserializeOwned + Default>(file: Option<&Path>, sets: &[String]) -> Result<C, CliError> {
    let mut value = serde_json::to_value(C::default()).expect("configurations serialise");
    if let Some(path) = file {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let overlay: Value =
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        merge_strict(&mut value, overlay, "")?;
    }
    for s in sets {
        apply_set(&mut value, s)?;
    }
    serde_json::from_value(value).map_err(|e| CliError::Usage(format!("invalid configuration: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;
    use serde_json::json;

    #[derive(Debug, Default, PartialEq, Serialize, Deserialize)]
    #[serde(default)]
    struct Inner {
        lr: f64,
        steps: usize,
    }

    #[derive(Debug, Default, PartialEq, Serialize, Deserialize)]
    #[serde(default)]
    struct Outer {
        name: String,
        inner: Inner,
    }

    #[test]
    fn overrides_reach_nested_keys() {
        let c: Outer = resolve(None, &["inner.lr=0.5".into(), "name=abc".into(), "inner.steps=3".into()]).unwrap();
        assert_eq!(c, Outer { name: "abc".into(), inner: Inner { lr: 0.5, steps: 3 } });
    }

    #[test]
    fn unknown_keys_are_usage_errors() {
        let e = resolve::<Outer>(None, &["inner.rate=1".into()]).unwrap_err();
        assert!(matches!(e, CliError::Usage(ref m) if m.contains("inner.rate")), "{e}");
        assert!(matches!(resolve::<Outer>(None, &["novalue".into()]), Err(CliError::Usage(_))));
        assert!(matches!(resolve::<Outer>(None, &["inner.steps=-1".into()]), Err(CliError::Usage(_))));
    }

    #[test]
    fn tagged_objects_switch_variant_whole() {
        let mut base = json!({"opt": {"kind": "adam", "lr": 1.0, "eps": 1e-8}});
        merge_strict(&mut base, json!({"opt": {"kind": "lion", "lr": 2.0}}), "").unwrap();
        assert_eq!(base, json!({"opt": {"kind": "lion", "lr": 2.0}}));
        assert!(merge_strict(&mut base, json!({"opt": {"eps": 1.0}}), "").is_err());
    }
}
