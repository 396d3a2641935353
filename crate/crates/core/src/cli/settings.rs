//! Flag values merged with an optional flat JSON config file.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use serde_json::Value;

use super::CliError;

/// Resolved `key → value` settings; flags take precedence over the config
/// file.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    /// Merges `flags` over the contents of `config` (if any). Config keys may
    /// use `-` or `_`; keys outside `allowed` are rejected.
    pub fn resolve(
        flags: &[(&'static str, Option<String>)],
        config: Option<&Path>,
    ) -> Result<Self, CliError> {
        let allowed: Vec<&str> = flags.iter().map(|(k, _)| *k).collect();
        let mut values = BTreeMap::new();
        if let Some(path) = config {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::config(format!("config: cannot read {}: {e}", path.display()))
            })?;
            let json: Value = serde_json::from_str(&text)
                .map_err(|e| CliError::config(format!("config: invalid JSON: {e}")))?;
            let Value::Object(map) = json else {
                return Err(CliError::config("config: top level must be an object"));
            };
            for (raw_key, v) in map {
                let key = raw_key.replace('_', "-");
                if !allowed.contains(&key.as_str()) {
                    return Err(CliError::config(format!(
                        "config: unknown key '{raw_key}' for this command"
                    )));
                }
                values.insert(key, scalar_to_string(&raw_key, &v)?);
            }
        }
        for (key, v) in flags {
            if let Some(v) = v {
                values.insert((*key).to_string(), v.clone());
            }
        }
        Ok(Self { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str, CliError> {
        self.get(key)
            .ok_or_else(|| CliError::config(format!("missing required setting '{key}'")))
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| {
                v.trim()
                    .parse::<T>()
                    .map_err(|e| CliError::config(format!("invalid value '{v}' for '{key}': {e}")))
            })
            .transpose()
    }

    pub fn parse_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.parse(key)?.unwrap_or(default))
    }
}

fn scalar_to_string(key: &str, v: &Value) -> Result<String, CliError> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        Value::Bool(b) => Ok(b.to_string()),
        Value::Array(items) => items
            .iter()
            .map(|i| match i {
                Value::Array(_) | Value::Object(_) | Value::Null => Err(CliError::config(
                    format!("config: key '{key}' must hold scalars"),
                )),
                other => scalar_to_string(key, other),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(|v| v.join(",")),
        Value::Object(_) | Value::Null => Err(CliError::config(format!(
            "config: key '{key}' must be a string, number, boolean or list"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn flags_override_config() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, r#"{{"reps": 20, "seed": 7, "response_cols": ["a", "b"]}}"#).unwrap();
        let flags = [
            ("reps", Some("5".to_string())),
            ("seed", None),
            ("response-cols", None),
        ];
        let s = Settings::resolve(&flags, Some(f.path())).unwrap();
        assert_eq!(s.parse::<usize>("reps").unwrap(), Some(5));
        assert_eq!(s.parse::<u64>("seed").unwrap(), Some(7));
        assert_eq!(s.get("response-cols"), Some("a,b"));
    }

    #[test]
    fn unknown_and_invalid_keys_name_the_key() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, r#"{{"bogus": 1}}"#).unwrap();
        let err = Settings::resolve(&[("reps", None)], Some(f.path())).unwrap_err();
        assert_eq!(err.code, 2);
        assert!(err.message.contains("bogus"));

        let s = Settings::resolve(&[("reps", Some("many".into()))], None).unwrap();
        let err = s.parse::<usize>("reps").unwrap_err();
        assert!(err.message.contains("'reps'"));
    }
}
