//! Comma-separated PSF and SRF tables.
//!
//! An SRF table has one MSI band per row and one HSI band per column. A PSF
//! table is the `S×S` kernel laid out row by row. Both accept an optional
//! first row starting with `#` as a header.

use std::fs;
use std::path::Path;

use hsifusion_core::{PsfKernel, SrfMatrix};

use crate::error::{Error, Result};

/// Parses a numeric table, skipping a leading `#` header row. Rows must all
/// have the same width.
pub fn read_table(path: &Path) -> Result<Vec<Vec<f64>>> {
    let file = fs::File::open(path).map_err(|e| Error::format(path, format!("cannot open: {e}")))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::format(path, e.to_string()))?;
        if i == 0 && record.get(0).is_some_and(|f| f.starts_with('#')) {
            continue;
        }
        if record.iter().all(str::is_empty) {
            continue;
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(j, field)| {
                field
                    .parse::<f64>()
                    .map_err(|_| Error::format(path, format!("line {}, column {}: not a number: {field:?}", i + 1, j + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::format(
                    path,
                    format!("line {} has {} columns, expected {}", i + 1, row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::format(path, "no data rows"));
    }
    Ok(rows)
}

/// Loads raw response curves and normalizes each row to sum to one.
pub fn load_srf_csv(path: &Path) -> Result<SrfMatrix> {
    let rows = read_table(path)?;
    Ok(SrfMatrix::from_rows(&rows)?)
}

/// Loads an `S×S` kernel and normalizes it to unit sum.
pub fn load_psf_csv(path: &Path) -> Result<PsfKernel> {
    let rows = read_table(path)?;
    let s = rows.len();
    if rows[0].len() != s {
        return Err(Error::format(path, format!("kernel table is {}x{}, expected square", s, rows[0].len())));
    }
    Ok(PsfKernel::normalized(s, rows.concat())?)
}

fn write_table(path: &Path, header: &str, rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    let mut text = String::from(header);
    text.push('\n');
    for row in rows {
        let fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        text.push_str(&fields.join(","));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn save_srf_csv(r: &SrfMatrix, path: &Path) -> Result<()> {
    let header = format!("# srf {}x{}", r.msi_bands(), r.hsi_bands());
    write_table(path, &header, (0..r.msi_bands()).map(|i| r.row(i).to_vec()))
}

pub fn save_psf_csv(k: &PsfKernel, path: &Path) -> Result<()> {
    let s = k.scale();
    let header = format!("# psf {s}x{s}");
    write_table(path, &header, k.weights().chunks(s).map(<[f64]>::to_vec))
}
