//! Flat `key = value` configuration files and flag resolution.
//!
//! Lines are `key = value`; blank lines and lines starting with `#` are
//! skipped. Keys are the long flag names without dashes. A flag given on the
//! command line always wins over the file, and the file wins over defaults.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use anyhow::Context;

use crate::error::UsageError;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, UsageError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| UsageError(format!("config line {}: expected 'key = value'", i + 1)))?;
            let key = k.trim().replace('_', "-");
            if key.is_empty() {
                return Err(UsageError(format!("config line {}: empty key", i + 1)));
            }
            if entries.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(UsageError(format!("config line {}: duplicate key '{key}'", i + 1)));
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Ok(Self::parse(&text)?)
    }
}

/// Looks up each setting as flag, then config entry, then default.
///
/// Every config key must be consumed by the command; [`Resolver::finish`]
/// reports the ones that were not.
#[derive(Debug)]
pub struct Resolver {
    config: Config,
    used: BTreeSet<String>,
}

impl Resolver {
    pub fn new(config: Config) -> Self {
        Self { config, used: BTreeSet::new() }
    }

    /// Raw text for `key`, if set anywhere.
    pub fn raw(&mut self, key: &str, flag: Option<&str>) -> Option<String> {
        self.used.insert(key.to_string());
        flag.map(str::to_string).or_else(|| self.config.entries.get(key).cloned())
    }

    pub fn get<T>(
        &mut self,
        key: &str,
        flag: Option<&str>,
        parse: impl Fn(&str) -> Result<T, UsageError>,
    ) -> Result<Option<T>, UsageError> {
        self.raw(key, flag)
            .map(|s| parse(&s).map_err(|e| UsageError(format!("--{key}: {e}"))))
            .transpose()
    }

    pub fn get_or<T>(
        &mut self,
        key: &str,
        flag: Option<&str>,
        default: T,
        parse: impl Fn(&str) -> Result<T, UsageError>,
    ) -> Result<T, UsageError> {
        Ok(self.get(key, flag, parse)?.unwrap_or(default))
    }

    pub fn finish(self) -> Result<(), UsageError> {
        let unknown: Vec<&str> = self
            .config
            .entries
            .keys()
            .filter(|k| !self.used.contains(*k))
            .map(String::as_str)
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(UsageError(format!("unknown config key(s) for this command: {}", unknown.join(", "))))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::frequency_mhz;

    #[test]
    fn parses_comments_and_normalises_keys() {
        let c = Config::parse("# comment\n\nrabi = 340kHz\nfixed_rabi=0.2\n").unwrap();
        assert_eq!(c.entries["rabi"], "340kHz");
        assert_eq!(c.entries["fixed-rabi"], "0.2");
        assert!(Config::parse("rabi 3").is_err());
        assert!(Config::parse("a=1\na=2").is_err());
    }

    #[test]
    fn flag_beats_config_beats_default() {
        let c = Config::parse("rabi = 1MHz\ngamma = 0.5").unwrap();
        let mut r = Resolver::new(c);
        assert_eq!(r.get_or("rabi", Some("2"), 9.0, frequency_mhz).unwrap(), 2.0);
        assert_eq!(r.get_or("gamma", None, 9.0, frequency_mhz).unwrap(), 0.5);
        assert_eq!(r.get_or("step", None, 9.0, frequency_mhz).unwrap(), 9.0);
        r.finish().unwrap();
    }

    #[test]
    fn unused_keys_are_reported() {
        let mut r = Resolver::new(Config::parse("rabbi = 1").unwrap());
        r.get("rabi", None, frequency_mhz).unwrap();
        assert!(r.finish().unwrap_err().0.contains("rabbi"));
    }
}
