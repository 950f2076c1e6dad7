//! JSON-lines reading and writing.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{de::DeserializeOwned, Serialize};

use crate::error::{Error, Result};

pub fn write_all<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for record in records {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn to_string<T: Serialize>(records: &[T]) -> Result<String> {
    let mut s = String::new();
    for record in records {
        s.push_str(&serde_json::to_string(record)?);
        s.push('\n');
    }
    Ok(s)
}

/// Reads every record, skipping blank lines. Errors carry the line number.
pub fn read_all<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let reader = BufReader::new(File::open(path)?);
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|source| Error::Record {
            path: path.display().to_string(),
            line: i + 1,
            source,
        })?;
        records.push(record);
    }
    Ok(records)
}
