//! Flat `key=value` text files used for manifests, configs and reports.

use std::fmt::Display;
use std::path::Path;

use crate::error::{Error, Result};

/// Ordered key/value lines. `#` starts a comment line; blank lines are skipped.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KeyValues {
    entries: Vec<(String, String)>,
}

impl KeyValues {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Display) -> &mut Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    /// Floats are written with `{:?}` so they round-trip exactly.
    pub fn push_f64(&mut self, key: impl Into<String>, value: f64) -> &mut Self {
        self.entries.push((key.into(), format!("{value:?}")));
        self
    }

    pub fn extend(&mut self, prefix: &str, other: &KeyValues) {
        for (k, v) in &other.entries {
            self.entries.push((format!("{prefix}{k}"), v.clone()));
        }
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    /// Last value for `key`.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::Parse { line: 0, msg: format!("missing key '{key}'") })
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        let v = self.require(key)?;
        v.parse().map_err(|_| Error::Parse { line: 0, msg: format!("'{key}' is not a number: {v}") })
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        let v = self.require(key)?;
        v.parse().map_err(|_| Error::Parse { line: 0, msg: format!("'{key}' is not an integer: {v}") })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            s.push_str(k);
            s.push('=');
            s.push_str(v);
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<KeyValues> {
        let mut kv = KeyValues::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: i + 1, msg: format!("expected key=value, got '{line}'") })?;
            kv.entries.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(kv)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<KeyValues> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        KeyValues::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_print() {
        let kv = KeyValues::parse("# header\na=1\n\n b = two words \n").unwrap();
        assert_eq!(kv.get("a"), Some("1"));
        assert_eq!(kv.get("b"), Some("two words"));
        assert_eq!(kv.to_text(), "a=1\nb=two words\n");
        assert!(KeyValues::parse("novalue\n").is_err());
    }

    #[test]
    fn floats_roundtrip() {
        let mut kv = KeyValues::new();
        kv.push_f64("x", 0.1 + 0.2);
        let back = KeyValues::parse(&kv.to_text()).unwrap();
        assert_eq!(back.f64("x").unwrap(), 0.1 + 0.2);
    }
}
