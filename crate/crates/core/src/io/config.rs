//! Configuration loading: defaults, then a JSON file, then `key=value`
//! overrides.
//!
//! Keys are dotted paths into [`ExperimentConfig`] (`scenario.n_tx`). Files may
//! nest objects or use dotted keys directly; both here and on the command line
//! a key may be shortened to any unique dotted suffix (`n_tx`,
//! `codebook.oversampling`, `oversampling`).

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::{Map, Value};

use crate::training::ExperimentConfig;
use crate::{Error, Result};

/// Leaf paths of a JSON object. Arrays and `null` are leaves.
fn flatten(prefix: &str, v: &Value, out: &mut BTreeMap<String, Value>) {
    match v {
        Value::Object(m) if !m.is_empty() || prefix.is_empty() => {
            for (k, child) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, child, out);
            }
        }
        _ => {
            out.insert(prefix.to_string(), v.clone());
        }
    }
}

fn unflatten(flat: &BTreeMap<String, Value>) -> Value {
    let mut root = Map::new();
    for (key, v) in flat {
        let mut node = &mut root;
        let parts: Vec<&str> = key.split('.').collect();
        for p in &parts[..parts.len() - 1] {
            node = node
                .entry(p.to_string())
                .or_insert_with(|| Value::Object(Map::new()))
                .as_object_mut()
                .expect("config paths never pass through a leaf");
        }
        node.insert(parts[parts.len() - 1].to_string(), v.clone());
    }
    Value::Object(root)
}

/// Every settable key, in sorted order.
pub fn valid_keys() -> Vec<String> {
    let mut flat = BTreeMap::new();
    flatten("", &serde_json::to_value(ExperimentConfig::default()).expect("config serializes"), &mut flat);
    flat.into_keys().collect()
}

/// The full key for `key`: an exact match or the only key ending in `.key`.
pub fn resolve_key(key: &str, valid: &[String]) -> Result<String> {
    if valid.iter().any(|k| k == key) {
        return Ok(key.to_string());
    }
    let suffix = format!(".{key}");
    let hits: Vec<&String> = valid.iter().filter(|k| k.ends_with(&suffix)).collect();
    match hits.as_slice() {
        [one] => Ok((*one).clone()),
        [] => Err(Error::UnknownKey {
            key: key.to_string(),
            valid: valid.to_vec(),
        }),
        many => Err(Error::Config(format!(
            "key `{key}` is ambiguous; use one of: {}",
            many.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
        ))),
    }
}

/// Parse JSON config text; errors carry the line and column.
pub fn parse_config_text(text: &str, origin: &str) -> Result<BTreeMap<String, Value>> {
    if text.trim().is_empty() {
        return Ok(BTreeMap::new());
    }
    let v: Value = serde_json::from_str(text)
        .map_err(|e| Error::Config(format!("{origin}:{}:{}: {e}", e.line(), e.column())))?;
    if !v.is_object() {
        return Err(Error::Config(format!("{origin}: top level must be a JSON object")));
    }
    let mut flat = BTreeMap::new();
    flatten("", &v, &mut flat);
    Ok(flat)
}

/// Split `key=value`; the value is JSON when it parses as JSON and a bare
/// string otherwise, so `scheme=E2E` and `n_tx=16` both work.
pub fn parse_override(s: &str) -> Result<(String, Value)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{s}` is not of the form key=value")))?;
    let k = k.trim();
    if k.is_empty() {
        return Err(Error::Config(format!("override `{s}` has an empty key")));
    }
    let v = v.trim();
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
    Ok((k.to_string(), value))
}

/// Merge defaults, the file (if any) and overrides, then validate.
pub fn resolve_config(file: Option<(&str, &str)>, overrides: &[String]) -> Result<ExperimentConfig> {
    let valid = valid_keys();
    let mut flat = BTreeMap::new();
    flatten("", &serde_json::to_value(ExperimentConfig::default())?, &mut flat);
    let mut set = |key: &str, v: Value| -> Result<()> {
        flat.insert(resolve_key(key, &valid)?, v);
        Ok(())
    };
    if let Some((text, origin)) = file {
        for (k, v) in parse_config_text(text, origin)? {
            set(&k, v)?;
        }
    }
    for o in overrides {
        let (k, v) = parse_override(o)?;
        set(&k, v)?;
    }
    let config: ExperimentConfig =
        serde_json::from_value(unflatten(&flat)).map_err(|e| Error::Config(format!("invalid value: {e}")))?;
    config.validate()?;
    Ok(config)
}

/// [`resolve_config`] reading the file at `path`.
pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<ExperimentConfig> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
            resolve_config(Some((&text, &p.display().to_string())), overrides)
        }
        None => resolve_config(None, overrides),
    }
}

/// Write the resolved configuration (reloadable as is) and its hash.
pub fn write_resolved_config(config: &ExperimentConfig, dir: &Path) -> Result<()> {
    std::fs::write(dir.join("config.json"), serde_json::to_string_pretty(config)? + "\n")?;
    std::fs::write(dir.join("config.hash"), config.hash() + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::CodebookKind;
    use crate::training::Scheme;

    #[test]
    fn empty_file_gives_full_scale_defaults() {
        let c = resolve_config(Some(("", "empty.json")), &[]).unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!((c.scenario.n_tx, c.scenario.n_subcarriers), (32, 288));
        assert_eq!(c.scenario.subcarrier_spacing, 30e3);
    }

    #[test]
    fn overrides_beat_the_file_and_the_file_beats_defaults() {
        let file = r#"{"scenario": {"n_tx": 8, "n_subcarriers": 48, "n_taps": 16}, "n_users": 3}"#;
        let c = resolve_config(Some((file, "f.json")), &["n_tx=16".into(), "scheme=E2E".into()]).unwrap();
        assert_eq!(c.scenario.n_tx, 16);
        assert_eq!(c.n_users, 3);
        assert_eq!(c.scheme, Scheme::E2E);
    }

    #[test]
    fn dotted_keys_and_nested_objects_are_equivalent() {
        let a = resolve_config(Some((r#"{"codebook.kind": "TYPE_I", "codebook.oversampling": 2}"#, "a")), &[]);
        let b = resolve_config(Some((r#"{"codebook": {"kind": "TYPE_I", "oversampling": 2}}"#, "b")), &[]);
        let (a, b) = (a.unwrap(), b.unwrap());
        assert_eq!(a, b);
        assert_eq!(a.codebook.kind, CodebookKind::TypeI);
    }

    #[test]
    fn unknown_key_lists_every_valid_key() {
        match resolve_config(None, &["scenario.n_antennas=4".into()]) {
            Err(Error::UnknownKey { key, valid }) => {
                assert_eq!(key, "scenario.n_antennas");
                assert_eq!(valid, valid_keys());
                assert!(valid.contains(&"scenario.n_tx".to_string()));
            }
            other => panic!("expected an unknown-key error, got {other:?}"),
        }
    }

    #[test]
    fn ambiguous_suffix_is_rejected() {
        let err = resolve_config(None, &["rng_seed=3".into()]).unwrap_err();
        assert!(err.to_string().contains("scenario.rng_seed") && err.to_string().contains("twin.rng_seed"), "{err}");
    }

    #[test]
    fn parse_errors_carry_line_and_column() {
        let err = resolve_config(Some(("{\n  \"n_users\": 2,\n  oops\n}", "bad.json")), &[]).unwrap_err();
        assert!(err.to_string().contains("bad.json:3:"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn invalid_oversampling_names_the_allowed_set() {
        let err = resolve_config(None, &["codebook.oversampling=3".into()]).unwrap_err();
        assert!(err.to_string().contains("{1, 2, 4}"), "{err}");
    }

    #[test]
    fn every_violation_is_listed() {
        let err = resolve_config(None, &["n_users=0".into(), "split=2".into()]).unwrap_err();
        match err {
            Error::Invalid(v) => assert!(v.len() >= 2, "{v:?}"),
            other => panic!("expected validation errors, got {other:?}"),
        }
    }

    #[test]
    fn wrong_type_is_a_config_error() {
        let err = resolve_config(None, &["n_users=\"two\"".into()]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn resolved_config_reloads_to_the_same_hash() {
        let dir = tempfile::tempdir().unwrap();
        let c = resolve_config(None, &["n_tx=16".into(), "n_subcarriers=48".into(), "n_taps=16".into()]).unwrap();
        write_resolved_config(&c, dir.path()).unwrap();
        let back = load_config(Some(&dir.path().join("config.json")), &[]).unwrap();
        assert_eq!(back, c);
        let hash = std::fs::read_to_string(dir.path().join("config.hash")).unwrap();
        assert_eq!(hash.trim(), back.hash());
    }
}
