//! Deterministic CSV emission.
//!
//! Fixed column order, one header row, and Rust's shortest round-trip
//! decimal formatting, so identical data produces byte-identical files on
//! any locale.

use anyhow::{Context, Result};
use std::io::Write;
use std::path::Path;

/// Shortest round-trip decimal form of a float.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Writes `rows` under `header` to `path`, creating parent directories.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut buf = String::new();
    buf.push_str(&header.join(","));
    buf.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), header.len(), "row width mismatch");
        buf.push_str(&row.join(","));
        buf.push('\n');
    }
    let mut file = std::fs::File::create(path).with_context(|| format!("create {path:?}"))?;
    file.write_all(buf.as_bytes())?;
    Ok(())
}
