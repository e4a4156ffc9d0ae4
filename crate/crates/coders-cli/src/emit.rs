//! Output-file helpers: stable CSV formatting, atomic writes.
//!
//! Numbers are written with `Display`, i.e. the shortest representation
//! that round-trips, so reruns are byte-comparable with `diff`.

use std::fmt::Display;
use std::fs;
use std::path::Path;

use coders::data::atomic_write;
use coders::{Error, Result};

pub fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes a comma-separated CSV with the given header atomically.
pub fn write_csv<R>(path: &Path, header: &[&str], rows: R) -> Result<()>
where
    R: IntoIterator<Item = Vec<String>>,
{
    let mut out = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    atomic_write(path, &out)
}

/// Empty cell for an absent value.
pub fn cell<T: Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Comma-joined list, matching the configuration-file list syntax.
pub fn list<T: Display>(items: impl IntoIterator<Item = T>) -> String {
    items.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}
