//! Flat `key = value` experiment files mirroring the command-line flags.
//!
//! Values given on the command line override values from the file. Keys a
//! command does not recognize are rejected, so a typo fails loudly instead
//! of silently running with a default.

use std::collections::HashMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, Default)]
pub struct FileConfig {
    entries: HashMap<String, String>,
}

impl FileConfig {
    /// Reads a config file; `None` yields an empty configuration.
    pub fn load(path: Option<&Path>) -> Result<Self, String> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let mut entries = HashMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(format!(
                    "{}:{}: expected `key = value`, got `{raw}`",
                    path.display(),
                    lineno + 1
                ));
            };
            let key = key.trim().to_string();
            if entries.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(format!("{}:{}: duplicate key `{key}`", path.display(), lineno + 1));
            }
        }
        Ok(FileConfig { entries })
    }

    /// Removes and parses one key, if present.
    pub fn take<T>(&mut self, key: &str) -> Result<Option<T>, String>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.entries.remove(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| format!("config key `{key}`: cannot parse `{raw}`: {e}")),
        }
    }

    /// Fails on any key the command did not consume.
    pub fn finish(self) -> Result<(), String> {
        if self.entries.is_empty() {
            return Ok(());
        }
        let mut keys: Vec<_> = self.entries.into_keys().collect();
        keys.sort();
        Err(format!("unrecognized config keys: {}", keys.join(", ")))
    }
}
