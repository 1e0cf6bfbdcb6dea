//! `key = value` configuration text with `#` comments.

use std::fmt::Display;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Parses `key = value` lines. Blank lines and `#` comments are skipped;
/// a repeated key keeps its last value.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            msg: format!("expected `key = value`, found {line:?}"),
        })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(Error::Parse {
                line: i + 1,
                msg: "empty key".into(),
            });
        }
        out.retain(|(existing, _)| existing != k);
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

pub fn write_key_values<K: AsRef<str>>(pairs: &[(K, String)]) -> String {
    pairs
        .iter()
        .map(|(k, v)| format!("{} = {v}\n", k.as_ref()))
        .collect()
}

/// A settings struct addressable by key.
pub trait Configurable {
    /// Sets `key`; `Ok(false)` when the key is not recognized.
    fn set(&mut self, key: &str, value: &str) -> Result<bool>;

    /// Current settings, in a stable order.
    fn entries(&self) -> Vec<(&'static str, String)>;

    /// Applies every pair, rejecting unknown keys.
    fn apply(&mut self, pairs: &[(String, String)]) -> Result<()> {
        for (k, v) in pairs {
            if !self.set(k, v)? {
                return Err(Error::InvalidArgument(format!("unknown config key `{k}`")));
            }
        }
        Ok(())
    }

    fn to_text(&self) -> String {
        write_key_values(&self.entries())
    }
}

/// Parses `value` for `key` and checks it lies in `[lo, hi]`.
pub fn ranged<T>(key: &str, value: &str, lo: T, hi: T) -> Result<T>
where
    T: FromStr + PartialOrd + Display + Copy,
{
    let v: T = value
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("`{key}`: cannot parse {value:?}")))?;
    if v < lo || v > hi {
        return Err(Error::InvalidArgument(format!("`{key}` = {v} outside [{lo}, {hi}]")));
    }
    Ok(v)
}

pub fn boolean(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::InvalidArgument(format!("`{key}`: expected true or false, found {value:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_overrides() {
        let kv = parse_key_values("# header\nseed = 3 # trailing\n\nhidden=10\nseed = 4\n").unwrap();
        assert_eq!(kv, vec![("hidden".into(), "10".into()), ("seed".into(), "4".into())]);
        assert!(parse_key_values("novalue\n").is_err());
    }

    #[test]
    fn ranges() {
        assert_eq!(ranged("x", "0.5", 0.0, 1.0).unwrap(), 0.5);
        assert!(ranged("x", "1.5", 0.0, 1.0).is_err());
        assert!(ranged::<usize>("x", "-1", 0, 3).is_err());
        assert!(boolean("b", "maybe").is_err());
    }
}
