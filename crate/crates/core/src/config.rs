//! Flat `key = value` text files. Blank lines and lines starting with `#`
//! are ignored; a later duplicate key overrides an earlier one.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(Error::UnparseableLine(i + 1))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::UnparseableLine(i + 1));
            }
            entries.insert(key.to_ascii_lowercase(), value.trim().to_string());
        }
        Ok(Self { entries })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn insert(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_ascii_lowercase(), value.into());
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Removes and parses `key` if present.
    pub fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some(value) => value.parse().map(Some).map_err(|_| Error::UnparseableValue {
                key: key.to_string(),
                value,
            }),
        }
    }

    pub fn require<T: FromStr>(&mut self, key: &str) -> Result<T> {
        self.take(key)?.ok_or_else(|| Error::MissingKey(key.to_string()))
    }

    /// Fails on the first key that was never taken.
    pub fn finish(self) -> Result<()> {
        match self.entries.into_keys().next() {
            Some(key) => Err(Error::UnknownKey(key)),
            None => Ok(()),
        }
    }
}

/// Parses `on/off`, `true/false`, `yes/no` and `1/0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Toggle(pub bool);

impl FromStr for Toggle {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "on" | "true" | "yes" | "1" => Ok(Toggle(true)),
            "off" | "false" | "no" | "0" => Ok(Toggle(false)),
            _ => Err(format!("expected on/off, got '{s}'")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_tracks_keys() {
        let mut kv = KeyValues::parse("# comment\n\nalpha = 0.25\n seed=7 \nflag = on\n").unwrap();
        assert_eq!(kv.require::<f64>("alpha").unwrap(), 0.25);
        assert_eq!(kv.require::<u64>("seed").unwrap(), 7);
        assert!(matches!(kv.require::<u64>("seed"), Err(Error::MissingKey(k)) if k == "seed"));
        assert_eq!(kv.take::<Toggle>("flag").unwrap(), Some(Toggle(true)));
        kv.finish().unwrap();
    }

    #[test]
    fn errors() {
        assert!(matches!(KeyValues::parse("a = 1\nnonsense\n"), Err(Error::UnparseableLine(2))));
        let mut kv = KeyValues::parse("x = abc\ny = 1").unwrap();
        assert!(matches!(kv.take::<f64>("x"), Err(Error::UnparseableValue { .. })));
        assert!(matches!(kv.finish(), Err(Error::UnknownKey(k)) if k == "y"));
    }
}
