//! Run configuration: `key = value` files plus command-line overrides.

use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use stackparse::config::{parse_key_values, write_key_values, Configurable};

/// Keys read by the commands themselves rather than by a model config.
pub const RUN_KEYS: &[&str] = &[
    "preset",
    "k",
    "include_punct",
    "dev_fraction",
    "order",
    "prune_singletons",
    "min_length",
    "max_length",
    "raw_length",
];

#[derive(Clone, Debug, Default)]
pub struct RunConfig {
    pairs: Vec<(String, String)>,
}

impl RunConfig {
    /// Reads `path` if given, then applies `overrides` in order.
    pub fn load(path: Option<&Path>, overrides: &[(&str, Option<String>)]) -> Result<Self> {
        let mut pairs = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                parse_key_values(&text).with_context(|| format!("config {}", p.display()))?
            }
            None => vec![],
        };
        for (k, v) in overrides {
            if let Some(v) = v {
                pairs.retain(|(existing, _)| existing != k);
                pairs.push((k.to_string(), v.clone()));
            }
        }
        Ok(RunConfig { pairs })
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.pairs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| anyhow!("config key `{key}`: cannot parse {v:?}")),
        }
    }

    pub fn flag(&self, key: &str, default: bool) -> Result<bool> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => Ok(stackparse::config::boolean(key, v)?),
        }
    }

    /// True when the `desk` preset was requested.
    pub fn desk(&self) -> Result<bool> {
        match self.raw("preset").unwrap_or("full") {
            "full" => Ok(false),
            "desk" => Ok(true),
            other => bail!("config key `preset`: expected full or desk, got {other:?}"),
        }
    }

    /// Applies every model key to `config`. Keys that are neither run keys
    /// nor understood by `config` are rejected.
    pub fn model<C: Configurable>(&self, mut config: C) -> Result<C> {
        for (k, v) in &self.pairs {
            if RUN_KEYS.contains(&k.as_str()) {
                continue;
            }
            if !config.set(k, v)? {
                bail!("unknown config key `{k}`");
            }
        }
        Ok(config)
    }

    /// Only run keys (and a seed) are allowed.
    pub fn run_only(&self) -> Result<()> {
        match self.pairs.iter().find(|(k, _)| k != "seed" && !RUN_KEYS.contains(&k.as_str())) {
            Some((k, _)) => bail!("unknown config key `{k}`"),
            None => Ok(()),
        }
    }

    pub fn to_text(&self) -> String {
        write_key_values(&self.pairs)
    }
}
