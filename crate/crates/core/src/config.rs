//! Flat `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Each consumer takes
//! the keys it understands; [`KvConfig::finish`] then rejects whatever is
//! left so typos do not pass silently.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct KvConfig {
    entries: BTreeMap<String, String>,
}

impl KvConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "line {}: expected `key = value`, got `{line}`",
                    lineno + 1
                ))
            })?;
            let key = k.trim().to_string();
            if entries.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(Error::Config(format!(
                    "line {}: duplicate key `{key}`",
                    lineno + 1
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Sets or replaces a key; used to apply command-line overrides.
    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    fn parse_value<T: FromStr>(key: &str, raw: &str) -> Result<T>
    where
        T::Err: Display,
    {
        raw.parse()
            .map_err(|e| Error::Config(format!("key `{key}`: cannot parse `{raw}`: {e}")))
    }

    /// Removes and parses `key`, falling back to `default` when absent.
    pub fn take_or<T: FromStr>(&mut self, key: &str, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        match self.entries.remove(key) {
            Some(raw) => Self::parse_value(key, &raw),
            None => Ok(default),
        }
    }

    /// Parses `key` without consuming it.
    pub fn peek_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        match self.entries.get(key) {
            Some(raw) => Self::parse_value(key, raw),
            None => Ok(default),
        }
    }

    /// Errors if any key was not consumed.
    pub fn finish(self) -> Result<()> {
        if let Some(k) = self.entries.keys().next() {
            return Err(Error::Config(format!("unknown key `{k}`")));
        }
        Ok(())
    }
}
