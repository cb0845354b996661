//! Flat `key = value` configuration files.
//!
//! UTF-8 text, one entry per line, `#` starts a comment. Keys are unique.
//! Floats are written with Rust's shortest round-trip representation, so a
//! written file re-parses to bit-identical values.

use std::fmt::{self, Display};
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::params::ParamError;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("key `{key}`: cannot parse {value:?}: {msg}")]
    BadValue {
        key: String,
        value: String,
        msg: String,
    },
    #[error("invalid parameters: {}", join_errors(.0))]
    Invalid(Vec<ParamError>),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn join_errors(errs: &[ParamError]) -> String {
    errs.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigFile {
    entries: Vec<(String, String)>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut file = ConfigFile::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: idx + 1,
                msg: format!("expected `key = value`, got {line:?}"),
            })?;
            let key = key.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(ConfigError::Syntax {
                    line: idx + 1,
                    msg: format!("invalid key {key:?}"),
                });
            }
            if file.get_str(key).is_some() {
                return Err(ConfigError::Syntax {
                    line: idx + 1,
                    msg: format!("duplicate key `{key}`"),
                });
            }
            file.entries
                .push((key.to_string(), value.trim().to_string()));
        }
        Ok(file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn get<T>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.get_str(key)
            .map(|v| {
                v.parse::<T>().map_err(|e| ConfigError::BadValue {
                    key: key.to_string(),
                    value: v.to_string(),
                    msg: e.to_string(),
                })
            })
            .transpose()
    }

    pub fn require<T>(&self, key: &str) -> Result<T, ConfigError>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.get(key)?
            .ok_or_else(|| ConfigError::Missing(key.to_string()))
    }

    pub fn get_or<T>(&self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Comma-separated list, or `start:stop:step` (inclusive of `stop` up to
    /// rounding).
    pub fn get_list(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        let Some(v) = self.get_str(key) else {
            return Ok(None);
        };
        parse_list(v)
            .map(Some)
            .map_err(|msg| ConfigError::BadValue {
                key: key.to_string(),
                value: v.to_string(),
                msg,
            })
    }

    /// Inserts or replaces `key`.
    pub fn set(&mut self, key: &str, value: impl Display) {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _)| k.as_str())
    }

    /// Entries of `other` override entries of `self`.
    pub fn merged(&self, other: &ConfigFile) -> ConfigFile {
        let mut out = self.clone();
        for (k, v) in &other.entries {
            out.set(k, v);
        }
        out
    }
}

impl Display for ConfigFile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

fn parse_list(v: &str) -> Result<Vec<f64>, String> {
    let v = v.trim();
    if v.is_empty() {
        return Ok(Vec::new());
    }
    let parts: Vec<&str> = v.split(':').collect();
    if parts.len() == 3 {
        let nums = parts
            .iter()
            .map(|p| p.trim().parse::<f64>().map_err(|e| e.to_string()))
            .collect::<Result<Vec<_>, _>>()?;
        let (start, stop, step) = (nums[0], nums[1], nums[2]);
        if !(step > 0.0) || stop < start {
            return Err("range needs step > 0 and stop >= start".into());
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        return Ok((0..count).map(|i| start + i as f64 * step).collect());
    }
    v.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| e.to_string()))
        .collect()
}
