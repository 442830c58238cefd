use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::{IoError, read_text};

/// `key = value` lines with `#` comments, as used by configs and manifests.
///
/// Values are consumed with [`KeyValues::take`]; whatever is left when
/// [`KeyValues::finish`] is called is reported as unknown.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    path: PathBuf,
    entries: BTreeMap<String, (String, usize)>,
}

impl KeyValues {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn load(path: &Path) -> Result<Self, IoError> {
        Self::parse(&read_text(path)?, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self, IoError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| IoError::parse(path, i + 1, format!("expected key = value, got `{line}`")))?;
            let key = k.trim();
            if key.is_empty() {
                return Err(IoError::parse(path, i + 1, "empty key"));
            }
            if entries.insert(key.to_string(), (v.trim().to_string(), i + 1)).is_some() {
                return Err(IoError::parse(path, i + 1, format!("duplicate key `{key}`")));
            }
        }
        Ok(Self { path: path.to_path_buf(), entries })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        self.entries.insert(key.to_string(), (value.to_string(), 0));
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Removes and parses `key`.
    pub fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, IoError> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((raw, line)) => {
                raw.parse().map(Some).map_err(|_| IoError::parse(&self.path, line, format!("bad value `{raw}` for `{key}`")))
            }
        }
    }

    /// Like [`Self::take`], overwriting `slot` when the key is present.
    pub fn take_into<T: FromStr>(&mut self, key: &str, slot: &mut T) -> Result<(), IoError> {
        if let Some(v) = self.take(key)? {
            *slot = v;
        }
        Ok(())
    }

    /// Whitespace-separated list of numbers.
    pub fn take_list<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>, IoError> {
        let Some((raw, line)) = self.entries.remove(key) else { return Ok(None) };
        raw.split_whitespace()
            .map(|t| t.parse().map_err(|_| IoError::parse(&self.path, line, format!("bad list item `{t}` for `{key}`"))))
            .collect::<Result<Vec<T>, _>>()
            .map(Some)
    }

    pub fn require<T: FromStr>(&mut self, key: &str) -> Result<T, IoError> {
        self.take(key)?.ok_or_else(|| IoError::schema(&self.path, format!("missing key `{key}`")))
    }

    /// Fails on keys nobody consumed.
    pub fn finish(self) -> Result<(), IoError> {
        match self.entries.iter().next() {
            None => Ok(()),
            Some((k, (_, line))) => Err(IoError::parse(&self.path, *line, format!("unknown key `{k}`"))),
        }
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, (v, _))| format!("{k} = {v}\n")).collect()
    }
}
