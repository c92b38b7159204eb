//! Layering of config-file values under command-line flags.

use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use payofflab::{Error, Result};

/// Four comma-separated numbers, e.g. `3,0,5,1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vec4(pub [f64; 4]);

impl FromStr for Vec4 {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(format!("expected 4 comma-separated numbers, got {}", parts.len()));
        }
        let mut v = [0.0; 4];
        for (slot, part) in v.iter_mut().zip(parts) {
            *slot = part.parse().map_err(|_| format!("'{part}' is not a number"))?;
        }
        Ok(Vec4(v))
    }
}

/// Any number of comma-separated numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Numbers(pub Vec<f64>);

impl Numbers {
    pub fn exact<const N: usize>(&self, name: &str) -> Result<[f64; N]> {
        <[f64; N]>::try_from(self.0.as_slice())
            .map_err(|_| Error::validation(name, format!("expected {N} numbers, got {}", self.0.len())))
    }
}

impl FromStr for Numbers {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        s.split(',')
            .map(|part| part.trim().parse().map_err(|_| format!("'{}' is not a number", part.trim())))
            .collect::<std::result::Result<Vec<f64>, String>>()
            .map(Numbers)
    }
}

/// Reads a TOML or (by extension) JSON config file.
pub fn load(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let value = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text)?
    } else {
        let table: toml::Table =
            toml::from_str(&text).map_err(|e| Error::validation("config", e.to_string()))?;
        serde_json::to_value(table)?
    };
    if !value.is_object() {
        return Err(Error::validation("config", "top level must be a table"));
    }
    Ok(value)
}

fn strip_nulls(v: Value) -> Value {
    match v {
        Value::Object(map) => Value::Object(
            map.into_iter().filter(|(_, v)| !v.is_null()).map(|(k, v)| (k, strip_nulls(v))).collect(),
        ),
        other => other,
    }
}

fn deep_merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => deep_merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Root keys of the file, then the keys of its `section` table, then the
/// flags that were actually given.
pub fn resolve<T: Serialize + DeserializeOwned>(flags: &T, file: Option<&Value>, section: &[&str]) -> Result<(T, Value)> {
    let mut merged = Value::Object(Map::new());
    if let Some(file) = file {
        if let Value::Object(root) = file {
            let scalars: Map<String, Value> = root.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
            deep_merge(&mut merged, Value::Object(scalars));
        }
        let mut node = Some(file);
        for key in section {
            node = node.and_then(|n| n.get(*key));
        }
        if let Some(sec) = node {
            deep_merge(&mut merged, sec.clone());
        }
    }
    deep_merge(&mut merged, strip_nulls(serde_json::to_value(flags)?));
    let parsed: T = serde_json::from_value(merged.clone()).map_err(|e| Error::validation("config", e.to_string()))?;
    Ok((parsed, merged))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, Default, Serialize, Deserialize, PartialEq)]
    #[serde(default)]
    struct Inner {
        a: Option<f64>,
        b: Option<f64>,
    }

    #[derive(Debug, Default, Serialize, Deserialize, PartialEq)]
    #[serde(default)]
    struct Args {
        game: Option<Vec4>,
        n: Option<u64>,
        inner: Inner,
    }

    #[test]
    fn parses_vectors() {
        assert_eq!("2,-1,7,0".parse::<Vec4>().unwrap(), Vec4([2.0, -1.0, 7.0, 0.0]));
        assert!("1,2,3".parse::<Vec4>().is_err());
        assert!("1,2,x,4".parse::<Vec4>().is_err());
    }

    #[test]
    fn flags_override_file_and_sections_override_root() {
        let file: Value = serde_json::to_value(
            toml::from_str::<toml::Table>(
                "game = [3.0, 0.0, 5.0, 1.0]\nn = 5\n[inner]\na = 1.0\nb = 2.0\n[sweep.endpoints]\nn = 7\n",
            )
            .unwrap(),
        )
        .unwrap();
        let flags = Args { game: None, n: None, inner: Inner { a: Some(9.0), b: None } };
        let (args, _) = resolve(&flags, Some(&file), &["sweep", "endpoints"]).unwrap();
        assert_eq!(args.game, Some(Vec4([3.0, 0.0, 5.0, 1.0])));
        assert_eq!(args.n, Some(7));
        assert_eq!(args.inner, Inner { a: Some(9.0), b: Some(2.0) });
    }
}
