use std::path::Path;

use crate::error::{Error, Result};
use crate::room::Point;

/// Ordered `key=value` records, one per line. Keys are non-empty and free
/// of `=`; neither keys nor values may contain a line break.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct KvList(Vec<(String, String)>);

impl KvList {
    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.0.push((key.to_string(), value.to_string()));
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.0
    }

    /// Last value stored under `key`.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn encode(&self) -> Result<String> {
        let mut out = String::new();
        for (k, v) in &self.0 {
            if k.is_empty() || k.contains(['=', '\n', '\r']) || v.contains(['\n', '\r']) {
                return Err(Error::config(format!("metadata entry {k:?}={v:?} cannot be stored")));
            }
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut out = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key=value", i + 1))?;
            if k.is_empty() {
                return Err(format!("line {}: empty key", i + 1));
            }
            out.push((k.to_string(), v.to_string()));
        }
        Ok(KvList(out))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.encode()?).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        KvList::parse(&text).map_err(|msg| Error::format(path, msg))
    }

    /// Typed lookup; missing or malformed values are format errors against `path`.
    pub fn require<T: std::str::FromStr>(&self, key: &str, path: &Path) -> Result<T> {
        let raw = self
            .get(key)
            .ok_or_else(|| Error::format(path, format!("missing key '{key}'")))?;
        raw.parse()
            .map_err(|_| Error::format(path, format!("key '{key}': cannot parse '{raw}'")))
    }

    pub fn require_point(&self, key: &str, path: &Path) -> Result<Point> {
        let list = self.require_list(key, path)?;
        list.try_into()
            .map_err(|v: Vec<f64>| Error::format(path, format!("key '{key}': expected 3 coordinates, got {}", v.len())))
    }

    pub fn require_list(&self, key: &str, path: &Path) -> Result<Vec<f64>> {
        let raw = self
            .get(key)
            .ok_or_else(|| Error::format(path, format!("missing key '{key}'")))?;
        parse_list(raw).map_err(|msg| Error::format(path, format!("key '{key}': {msg}")))
    }
}

/// Comma-separated numbers.
pub(crate) fn parse_list(raw: &str) -> std::result::Result<Vec<f64>, String> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| format!("'{}' is not a number", s.trim()))
        })
        .collect()
}

/// Shortest round-trip formatting, comma separated.
pub fn format_list(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}
