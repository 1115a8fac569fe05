//! Plain-text CSV for matrices and vectors: one row per line, decimal
//! floats, optional header line (detected by a non-numeric first field).

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::operators::DenseOperator;
use crate::serde_ext::parse_ext;

fn read_table<R: Read>(input: R) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input);
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let parsed: Option<Vec<f64>> = rec.iter().map(parse_ext).collect();
        match parsed {
            Some(row) => rows.push(row),
            None if line == 0 => continue,
            None => {
                return Err(Error::Parse(format!(
                    "line {}: non-numeric field in {:?}",
                    line + 1,
                    rec.iter().collect::<Vec<_>>()
                )))
            }
        }
    }
    Ok(rows)
}

pub fn read_matrix<R: Read>(input: R) -> Result<DenseOperator> {
    let rows = read_table(input)?;
    if rows.is_empty() {
        return Err(Error::Parse("matrix file has no rows".into()));
    }
    DenseOperator::from_rows(&rows)
}

/// Accepts a single column, a single row, or one value per line.
pub fn read_vector<R: Read>(input: R) -> Result<Vec<f64>> {
    let rows = read_table(input)?;
    if rows.len() == 1 {
        return Ok(rows.into_iter().next().unwrap_or_default());
    }
    if let Some(bad) = rows.iter().position(|r| r.len() != 1) {
        return Err(Error::Parse(format!(
            "vector row {} has {} fields, expected 1",
            bad + 1,
            rows[bad].len()
        )));
    }
    Ok(rows.into_iter().map(|r| r[0]).collect())
}

pub fn write_matrix<W: Write>(op: &DenseOperator, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for i in 0..op.rows() {
        w.write_record(op.row(i).iter().map(f64::to_string))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_vector<W: Write>(v: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for x in v {
        w.write_record([x.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_matrix(path: &Path) -> Result<DenseOperator> {
    read_matrix(File::open(path)?)
}

pub fn load_vector(path: &Path) -> Result<Vec<f64>> {
    read_vector(File::open(path)?)
}
