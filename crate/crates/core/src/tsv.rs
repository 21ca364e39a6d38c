//! Minimal tab-separated reading and writing shared by the loaders and writers.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// One parsed row with its 1-based line number.
#[derive(Debug, Clone)]
pub struct Row {
    pub line: usize,
    pub fields: Vec<String>,
}

pub(crate) fn file_label(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Reads `path` and splits every non-blank line on tabs, requiring exactly
/// `fields` columns.
pub fn read_rows(path: &Path, fields: usize) -> Result<Vec<Row>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let label = file_label(path);
    let mut rows = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<String> = line.split('\t').map(|s| s.trim().to_string()).collect();
        if parts.len() != fields {
            return Err(Error::parse(
                &label,
                idx + 1,
                format!("expected {} tab-separated fields, found {}", fields, parts.len()),
            ));
        }
        if parts.iter().any(|p| p.is_empty()) {
            return Err(Error::parse(&label, idx + 1, "empty field"));
        }
        rows.push(Row {
            line: idx + 1,
            fields: parts,
        });
    }
    Ok(rows)
}

/// Writes `lines` to `path`, one per line, each terminated by `\n`.
pub fn write_lines<I, S>(path: &Path, lines: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for line in lines {
        out.write_all(line.as_ref().as_bytes())
            .and_then(|_| out.write_all(b"\n"))
            .map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}
