//! Atomic, deterministic output writers. CSV uses `.` decimal, `,`
//! separator, LF line endings, and 17 significant digits (round-trip exact
//! for f64). JSON keys are emitted in sorted order.

use std::io::Write;
use std::path::Path;

use mflab::{MflabError, Result};

/// {:.16e} carries 17 significant digits.
pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write via a temp file in the same directory, then rename over the target.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .ok_or_else(|| MflabError::Config(format!("output path '{}' has no parent", path.display())))?;
    std::fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("out")
    ));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// CSV with a config-hash comment line, a header row, and pre-formatted
/// cells. LF endings throughout.
pub fn write_csv(
    path: &Path,
    config_hash: &str,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("# config_hash = {config_hash}\n"));
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| MflabError::Config(format!("json serialization failed: {e}")))?;
    bytes.push(b'\n');
    atomic_write(path, &bytes)
}
