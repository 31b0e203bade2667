//! Flat `key = value` run configuration: a file provides the base values and
//! command-line flags override them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

const OUTPUT_KEYS: [&str; 4] = ["out", "report", "trace", "positions"];

#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    command: String,
    values: BTreeMap<String, String>,
}

fn normalize(key: &str) -> String {
    key.trim().replace('-', "_")
}

/// Parse `key = value` lines; `#` starts a comment line.
pub fn parse_config(text: &str) -> CliResult<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected `key = value`", i + 1)))?;
        out.insert(normalize(k), v.trim().to_string());
    }
    Ok(out)
}

impl Settings {
    /// Merge the optional config file with the flags in `args`. Keys the
    /// subcommand does not know are rejected.
    pub fn resolve<A: Serialize>(command: &str, file: Option<&Path>, args: &A) -> CliResult<Self> {
        let flags = match serde_json::to_value(args)? {
            serde_json::Value::Object(m) => m,
            _ => unreachable!("argument structs serialize to objects"),
        };
        let known: BTreeSet<&str> = flags.keys().map(String::as_str).collect();
        let mut values = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
                parse_config(&text)?
            }
            None => BTreeMap::new(),
        };
        if let Some(bad) = values.keys().find(|k| !known.contains(k.as_str())) {
            return Err(CliError::Usage(format!("`{command}` has no setting `{bad}`")));
        }
        for (k, v) in &flags {
            let text = match v {
                serde_json::Value::Null | serde_json::Value::Bool(false) => continue,
                serde_json::Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            values.insert(k.clone(), text);
        }
        Ok(Self {
            command: command.to_string(),
            values,
        })
    }

    pub fn get<T>(&self, key: &str) -> CliResult<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.values
            .get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| CliError::Usage(format!("invalid value `{v}` for {key}: {e}")))
            })
            .transpose()
    }

    pub fn or<T>(&self, key: &str, default: T) -> CliResult<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T>(&self, key: &str) -> CliResult<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.get(key)?
            .ok_or_else(|| CliError::Usage(format!("missing required setting --{}", key.replace('_', "-"))))
    }

    /// Comma-separated list.
    pub fn list<T>(&self, key: &str) -> CliResult<Option<Vec<T>>>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.values
            .get(key)
            .map(|v| {
                v.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        s.parse::<T>()
                            .map_err(|e| CliError::Usage(format!("invalid item `{s}` in {key}: {e}")))
                    })
                    .collect()
            })
            .transpose()
    }

    pub fn flag(&self, key: &str) -> CliResult<bool> {
        self.or(key, false)
    }

    pub fn seed(&self) -> CliResult<u64> {
        self.or("seed", 0)
    }

    pub fn values(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    /// SHA-256 over the subcommand, the tool version and the sorted settings.
    /// Destination paths are left out, so the same run written elsewhere
    /// keeps its hash.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!("{} {}\n", self.command, env!("CARGO_PKG_VERSION")));
        for (k, v) in self.values.iter().filter(|(k, _)| !OUTPUT_KEYS.contains(&k.as_str())) {
            h.update(format!("{k}={v}\n"));
        }
        hex::encode(h.finalize())
    }

    /// The comment line heading every CSV artifact.
    pub fn csv_banner(&self) -> CliResult<String> {
        Ok(format!("# config_hash={} seed={}", self.hash(), self.seed()?))
    }
}
