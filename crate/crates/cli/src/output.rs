//! CSV and JSON artifact writers. Floats are written in their shortest
//! round-trip form, so identical runs give identical bytes.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::CliResult;

pub fn write_or_print(path: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(p, bytes)?;
        }
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}

/// `banner` line, header row, then the rows.
pub fn csv_bytes<I>(banner: &str, header: &[&str], rows: I) -> CliResult<Vec<u8>>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut out = Vec::new();
    writeln!(out, "{banner}")?;
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        w.flush()?;
    }
    Ok(out)
}

pub fn write_csv<I>(path: Option<&Path>, banner: &str, header: &[&str], rows: I) -> CliResult<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    write_or_print(path, &csv_bytes(banner, header, rows)?)
}

/// Pretty JSON with keys in sorted order.
pub fn json_bytes<T: Serialize>(value: &T) -> CliResult<Vec<u8>> {
    // a Value round trip sorts object keys
    let v = serde_json::to_value(value)?;
    let mut out = serde_json::to_vec_pretty(&v)?;
    out.push(b'\n');
    Ok(out)
}

pub fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> CliResult<()> {
    write_or_print(path, &json_bytes(value)?)
}

pub fn num(x: f64) -> String {
    x.to_string()
}
