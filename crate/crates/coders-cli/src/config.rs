//! Flat `key = value` run configuration with command-line overrides.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use coders::data::{Categories, CsvSchema};
use coders::{Error, Result};

/// Resolved settings for one run: file entries overlaid by flags.
///
/// Keys are kept sorted so the manifest echo is stable and diffable.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    entries: BTreeMap<String, String>,
}

impl Settings {
    /// Parses `key = value` lines; `#` starts a comment, blanks are skipped.
    pub fn load(path: Option<&Path>) -> Result<Settings> {
        let mut settings = Settings::default();
        let Some(path) = path else { return Ok(settings) };
        let text = fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read configuration file {}: {e}", path.display()))
        })?;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "{}:{}: expected `key = value`, found {raw:?}",
                    path.display(),
                    i + 1
                )));
            };
            settings.entries.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(settings)
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    /// Command-line override; flags always win over file entries.
    pub fn set_if(&mut self, key: &str, value: Option<impl Display>) {
        if let Some(value) = value {
            self.set(key, value);
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// Rejects keys the subcommand does not understand.
    pub fn check_keys(&self, known: &[&str]) -> Result<()> {
        for key in self.entries.keys() {
            if !known.contains(&key.as_str()) {
                return Err(Error::Config(format!("unknown configuration key {key:?}")));
            }
        }
        Ok(())
    }

    pub fn get<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| Error::Config(format!("key {key}: cannot parse {raw:?}: {e}"))),
        }
    }

    pub fn get_or<T>(&self, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T>(&self, key: &str) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.get(key)?
            .ok_or_else(|| Error::Config(format!("`{key}` is required (flag or configuration file)")))
    }

    /// Comma-separated list.
    pub fn get_list<T>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T: FromStr,
        T::Err: Display,
    {
        let Some(raw) = self.entries.get(key) else { return Ok(None) };
        raw.split(',')
            .map(|part| {
                let part = part.trim();
                part.parse()
                    .map_err(|e| Error::Config(format!("key {key}: cannot parse {part:?}: {e}")))
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }
}

/// CSV schema from the `delimiter` (single character or `tab`) and
/// `header` (bool) keys.
pub fn csv_schema(settings: &Settings) -> Result<CsvSchema> {
    let mut schema = CsvSchema::default();
    if let Some(raw) = settings.raw("delimiter") {
        schema.delimiter = match raw {
            "tab" => b'\t',
            s if s.len() == 1 && s.is_ascii() => s.as_bytes()[0],
            other => {
                return Err(Error::Config(format!(
                    "key delimiter: expected one ascii character or `tab`, found {other:?}"
                )))
            }
        };
    }
    schema.has_header = settings.get_or("header", schema.has_header)?;
    Ok(schema)
}

/// Category count from the `categories` key: an integer applied to every
/// item, or `infer` to use each column's maximum observed code.
pub fn categories(settings: &Settings) -> Result<Categories> {
    match settings.raw("categories") {
        None => Ok(Categories::Uniform(5)),
        Some("infer") => Ok(Categories::Infer),
        Some(raw) => {
            let l: u8 = raw
                .parse()
                .map_err(|e| Error::Config(format!("key categories: cannot parse {raw:?}: {e}")))?;
            Ok(Categories::Uniform(l))
        }
    }
}
