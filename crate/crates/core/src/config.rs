//! Line-oriented `key = value` configuration files.
//!
//! Blank lines and everything after `#` are ignored. Consumers pull the keys
//! they understand with the typed `take_*` accessors and then call
//! [`KeyValues::finish`], which rejects anything left over.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct KeyValues {
    entries: BTreeMap<String, (usize, String)>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {lineno}: expected key=value")))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::config(format!("line {lineno}: empty key")));
            }
            if entries
                .insert(key.to_string(), (lineno, value.trim().to_string()))
                .is_some()
            {
                return Err(Error::config(format!("line {lineno}: duplicate key {key:?}")));
            }
        }
        Ok(Self { entries })
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, key: &str, value: impl Display) {
        self.entries.insert(key.to_string(), (0, value.to_string()));
    }

    pub fn take_str(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key).map(|(_, v)| v)
    }

    /// Removes `key` and parses it, leaving `slot` untouched when absent.
    pub fn take<T>(&mut self, key: &str, slot: &mut T) -> Result<()>
    where
        T: FromStr,
        T::Err: Display,
    {
        if let Some((lineno, value)) = self.entries.remove(key) {
            *slot = value.parse().map_err(|e| {
                Error::config(format!("line {lineno}: bad value {value:?} for {key}: {e}"))
            })?;
        }
        Ok(())
    }

    pub fn finish(self) -> Result<()> {
        match self.entries.into_iter().next() {
            None => Ok(()),
            Some((key, (lineno, _))) => Err(Error::config(format!(
                "line {lineno}: unknown key {key:?}"
            ))),
        }
    }
}
