//! JSON-lines reading and writing with line-numbered schema errors.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

use crate::error::{Error, Result};

/// Serialize a float with exactly six decimals, as a JSON number.
pub fn fixed6<S: Serializer>(value: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    fixed(*value, 6, s)
}

pub fn fixed2<S: Serializer>(value: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    fixed(*value, 2, s)
}

fn fixed<S: Serializer>(value: f64, dp: usize, s: S) -> std::result::Result<S::Ok, S::Error> {
    if !value.is_finite() {
        return s.serialize_none();
    }
    let text = format!("{value:.dp$}");
    let raw = RawValue::from_string(text).map_err(serde::ser::Error::custom)?;
    raw.serialize(s)
}

/// Parse JSON-lines text; blank lines are skipped.
pub fn parse_jsonl<T: DeserializeOwned>(text: &str) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(line).map_err(|e| Error::Schema { line: i + 1, message: e.to_string() })?;
        out.push(item);
    }
    Ok(out)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| Error::Schema { line: i + 1, message: e.to_string() })?;
        out.push(item);
    }
    Ok(out)
}

pub fn to_jsonl_line<T: Serialize>(item: &T) -> Result<String> {
    let mut line = serde_json::to_string(item)?;
    line.push('\n');
    Ok(line)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}
