//! Versioned CSV output written atomically.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// First line of every CSV file the harness writes.
pub const CSV_SCHEMA_LINE: &str = "# mirror-bounds v1";

/// Writes `bytes` to `path` through a temporary file in the same directory
/// followed by a rename, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::param(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        e
    })?;
    Ok(())
}

/// A row type of a CSV table, naming its columns so that a table without
/// rows still carries its header.
pub trait CsvRow: Serialize {
    /// Column names in serialization order.
    const COLUMNS: &'static [&'static str];
}

/// Serializes `rows` as CSV below the schema line.
pub fn csv_bytes<T: CsvRow>(rows: &[T]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(CSV_SCHEMA_LINE.as_bytes());
    out.push(b'\n');
    {
        let mut w = csv::Writer::from_writer(&mut out);
        if rows.is_empty() {
            w.write_record(T::COLUMNS)?;
        }
        for row in rows {
            w.serialize(row)?;
        }
        w.flush()?;
    }
    debug_assert!(
        rows.is_empty() || header_of(&out) == T::COLUMNS.join(","),
        "declared columns {:?} differ from the serialized header",
        T::COLUMNS
    );
    Ok(out)
}

fn header_of(bytes: &[u8]) -> &str {
    std::str::from_utf8(bytes).ok().and_then(|t| t.lines().nth(1)).unwrap_or("")
}

/// Writes `rows` as a versioned CSV file, atomically.
pub fn write_csv<T: CsvRow>(path: &Path, rows: &[T]) -> Result<()> {
    write_atomic(path, &csv_bytes(rows)?)
}
