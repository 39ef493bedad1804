//! Flat `key = value` text files (manifests, configs, snapshots).

use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Ordered key/value pairs. Blank lines and `#` comments are skipped on parse.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KvFile {
    entries: Vec<(String, String)>,
}

impl KvFile {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut kv = Self::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Parse {
                    file: origin.to_string(),
                    detail: format!("line {}: expected key = value", lineno + 1),
                });
            };
            let k = k.trim();
            if kv.get(k).is_some() {
                return Err(Error::Parse {
                    file: origin.to_string(),
                    detail: format!("line {}: duplicate key {k}", lineno + 1),
                });
            }
            kv.entries.push((k.to_string(), v.trim().to_string()));
        }
        Ok(kv)
    }

    pub fn read(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::parse(&fs::read_to_string(path)?, &path.display().to_string())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_string())?;
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _)| k.as_str())
    }

    pub fn require(&self, key: &str, origin: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::Parse {
            file: origin.to_string(),
            detail: format!("missing key {key}"),
        })
    }

    pub fn parse_value<T: FromStr>(&self, key: &str, origin: &str) -> Result<T> {
        let raw = self.require(key, origin)?;
        raw.parse().map_err(|_| Error::Parse {
            file: origin.to_string(),
            detail: format!("bad value for {key}: {raw:?}"),
        })
    }
}

impl std::fmt::Display for KvFile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

/// Hyphen-joined list of counts, e.g. `784-256-128-10`.
pub fn format_sizes(sizes: &[usize]) -> String {
    sizes
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("-")
}

pub fn parse_sizes(raw: &str) -> Option<Vec<usize>> {
    raw.split('-').map(|s| s.trim().parse().ok()).collect()
}
