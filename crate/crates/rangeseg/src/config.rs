//! Plain-text key=value configuration files: one pair per line, `#` starts
//! a comment, blank lines ignored. Consumers reject unknown keys so typos
//! fail loudly instead of silently falling back to defaults.

use std::fs;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    BadLine { line: usize, msg: String },
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("key {key}: {msg}")]
    BadValue { key: String, msg: String },
}

/// Parses `key = value` pairs in file order. Duplicate keys are allowed;
/// the last occurrence wins for consumers that fold left to right.
pub fn parse_kv(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::BadLine {
            line: i + 1,
            msg: format!("expected key=value, got {line:?}"),
        })?;
        let key = k.trim();
        if key.is_empty() {
            return Err(ConfigError::BadLine { line: i + 1, msg: "empty key".into() });
        }
        pairs.push((key.to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

pub fn load_kv<P: AsRef<Path>>(path: P) -> Result<Vec<(String, String)>, ConfigError> {
    parse_kv(&fs::read_to_string(path)?)
}

pub fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| ConfigError::BadValue { key: key.to_string(), msg: format!("{e}") })
}

/// Comma-separated list, e.g. `channels = 16,32,64,128`.
pub fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.split(',').map(|v| parse_value(key, v.trim())).collect()
}
