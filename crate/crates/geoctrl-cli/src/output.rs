//! Deterministic output helpers: CSV at full double precision, pretty JSON
//! with sorted keys.

use std::fs;
use std::path::Path;

use anyhow::Context;

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_csv(
    path: &Path,
    header: &[String],
    rows: impl Iterator<Item = Vec<f64>>,
) -> anyhow::Result<()> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_json(path: Option<&Path>, value: &serde_json::Value) -> anyhow::Result<()> {
    let body = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => fs::write(p, body + "\n").with_context(|| format!("writing {}", p.display()))?,
        None => println!("{body}"),
    }
    Ok(())
}
