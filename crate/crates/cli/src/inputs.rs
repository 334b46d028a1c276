//! Input discovery and session naming.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use chrono::NaiveDate;

/// Expands files, directories (their `*.csv` entries) and glob patterns into a
/// sorted, de-duplicated list.
pub fn expand_inputs(specs: &[String]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for spec in specs {
        let path = Path::new(spec);
        if path.is_dir() {
            for entry in fs::read_dir(path).with_context(|| format!("reading directory {spec}"))? {
                let p = entry?.path();
                if p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
                    out.push(p);
                }
            }
        } else if spec.contains(['*', '?', '[']) {
            let matches = glob::glob(spec).with_context(|| format!("bad glob pattern {spec}"))?;
            let before = out.len();
            for m in matches {
                out.push(m?);
            }
            if out.len() == before {
                log::warn!("pattern {spec} matched nothing");
            }
        } else {
            // Missing files surface later as per-file failures.
            out.push(path.to_path_buf());
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

/// Symbol and session date from a `SYMBOL_YYYYMMDD.csv` or `SYMBOL_YYYY-MM-DD.csv` name.
pub fn session_identity(path: &Path) -> Result<(String, NaiveDate)> {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| anyhow!("file name is not valid UTF-8"))?;
    let (symbol, date) = stem
        .rsplit_once('_')
        .ok_or_else(|| anyhow!("file name `{stem}` is not SYMBOL_YYYYMMDD"))?;
    if symbol.is_empty() {
        bail!("file name `{stem}` has an empty symbol");
    }
    let date = NaiveDate::parse_from_str(date, "%Y%m%d")
        .or_else(|_| NaiveDate::parse_from_str(date, "%Y-%m-%d"))
        .with_context(|| format!("file name `{stem}` has no valid session date"))?;
    Ok((symbol.to_string(), date))
}

/// File-system safe form of a bucket label: `<250` -> `lt250`, `1500+` -> `1500plus`.
pub fn sanitize_label(label: &str) -> String {
    let mut s = String::new();
    for c in label.chars() {
        match c {
            '<' => s.push_str("lt"),
            '>' => s.push_str("gt"),
            '+' => s.push_str("plus"),
            c if c.is_ascii_alphanumeric() || c == '-' || c == '_' => s.push(c),
            _ => s.push('_'),
        }
    }
    s
}
