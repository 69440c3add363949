//! Flat `key = value` documents with optional `[section]` headers.
//!
//! Used for both skeleton schema files and run configurations. Grammar:
//!
//! ```text
//! # comment (also after values)
//! key = value
//! [section]
//! other_key = value with spaces
//! ```
//!
//! Keys inside a section are addressed as `section.key`. Keys must be unique
//! after qualification. Entry order is preserved.

use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct KvDoc {
    entries: Vec<KvEntry>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KvEntry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

impl KvDoc {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut doc = KvDoc::new();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name =
                    rest.strip_suffix(']').ok_or_else(|| Error::parse(line_no, "unterminated section header"))?.trim();
                if name.is_empty() || name.contains(char::is_whitespace) {
                    return Err(Error::parse(line_no, format!("bad section name `{name}`")));
                }
                section = name.to_string();
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::parse(line_no, "expected `key = value`"))?;
            let k = k.trim();
            if k.is_empty() || k.contains(char::is_whitespace) {
                return Err(Error::parse(line_no, format!("bad key `{k}`")));
            }
            let key = if section.is_empty() { k.to_string() } else { format!("{section}.{k}") };
            if doc.get(&key).is_some() {
                return Err(Error::parse(line_no, format!("duplicate key `{key}`")));
            }
            doc.entries.push(KvEntry { key, value: v.trim().to_string(), line: line_no });
        }
        Ok(doc)
    }

    pub fn entries(&self) -> &[KvEntry] {
        &self.entries
    }

    pub fn get(&self, key: &str) -> Option<&KvEntry> {
        self.entries.iter().find(|e| e.key == key)
    }

    pub fn value(&self, key: &str) -> Option<&str> {
        self.get(key).map(|e| e.value.as_str())
    }

    /// Inserts or replaces a value, keeping the original position on replace.
    pub fn set(&mut self, key: impl Into<String>, value: impl Into<String>) {
        let key = key.into();
        let value = value.into();
        match self.entries.iter_mut().find(|e| e.key == key) {
            Some(e) => e.value = value,
            None => self.entries.push(KvEntry { key, value, line: 0 }),
        }
    }

    /// Entries whose key starts with `section.`, with the prefix stripped.
    pub fn section<'a>(&'a self, section: &'a str) -> impl Iterator<Item = (&'a str, &'a KvEntry)> + 'a {
        self.entries
            .iter()
            .filter_map(move |e| e.key.strip_prefix(section).and_then(|rest| rest.strip_prefix('.')).map(|k| (k, e)))
    }

    /// Renders the document back to text, grouping dotted keys into sections.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut current: Option<&str> = None;
        for e in &self.entries {
            let (sec, key) = match e.key.split_once('.') {
                Some((s, k)) => (Some(s), k),
                None => (None, e.key.as_str()),
            };
            if sec != current {
                if let Some(s) = sec {
                    if !out.is_empty() {
                        out.push('\n');
                    }
                    let _ = writeln!(out, "[{s}]");
                }
                current = sec;
            }
            let _ = writeln!(out, "{key} = {}", e.value);
        }
        out
    }

    pub fn parse_value<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<T>()
                .map(Some)
                .map_err(|_| Error::parse(e.line, format!("cannot parse value of `{key}`: `{}`", e.value))),
        }
    }
}
