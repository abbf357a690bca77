//! File output. CSV files are UTF-8 with LF line ends, a header row and
//! `.` as the decimal point; floats use Rust's shortest round-trip form.

use std::fs;
use std::path::Path;

use crate::error::{io_at, Result};

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_at(dir))?;
    }
    fs::write(path, contents).map_err(io_at(path))
}

pub fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(io_at(path))
}

/// Builds a CSV body from a header and rows of preformatted fields.
pub fn csv<I, R>(header: &str, rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        let fields: Vec<String> = row.into_iter().collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}
