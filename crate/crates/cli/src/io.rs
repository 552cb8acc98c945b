//! CSV ingestion and export of datasets.
//!
//! Input files carry a header row with exactly one column named `y`; every
//! other column is a covariate, kept in file order. Decimal parsing uses
//! Rust's own float grammar, so it never depends on the process locale.

use std::io::{Read, Write};
use std::path::Path;

use awreg::{Dataset, Error, Result};

fn csv_error(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

pub fn read_csv(path: &Path) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_csv_from(file)
}

pub fn read_csv_from<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let names: Vec<String> = rdr.headers().map_err(csv_error)?.iter().map(str::to_string).collect();
    let y_col = names
        .iter()
        .position(|h| h == "y")
        .ok_or_else(|| Error::MissingColumn("y".into()))?;
    if names.iter().filter(|h| *h == "y").count() > 1 {
        return Err(Error::InvalidData("more than one column named `y`".into()));
    }
    let q = names.len() - 1;
    if q == 0 {
        return Err(Error::InvalidData("no covariate columns besides `y`".into()));
    }

    let mut y = Vec::new();
    let mut x = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(csv_error)?;
        let row = i + 1;
        for (j, cell) in record.iter().enumerate() {
            let value = match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => v,
                _ => {
                    return Err(Error::NonNumeric {
                        row,
                        column: names[j].clone(),
                        value: cell.to_string(),
                    })
                }
            };
            if j == y_col {
                y.push(value);
            } else {
                x.push(value);
            }
        }
    }
    if y.len() < q + 2 {
        return Err(Error::TooFewRows {
            n: y.len(),
            needed: q + 2,
        });
    }
    Dataset::from_row_major(y, x, q)
}

/// 17 significant digits, enough to round-trip any finite `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `y,x1,…,xq`.
pub fn write_csv(path: &Path, data: &Dataset) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    write_csv_to(file, data)
}

pub fn write_csv_to<W: Write>(writer: W, data: &Dataset) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["y".to_string()];
    header.extend((1..=data.q()).map(|j| format!("x{j}")));
    wtr.write_record(&header).map_err(csv_error)?;
    for i in 0..data.n() {
        let mut record = vec![format_f64(data.y()[i])];
        record.extend(data.row(i).iter().map(|v| format_f64(*v)));
        wtr.write_record(&record).map_err(csv_error)?;
    }
    wtr.flush().map_err(|e| Error::Io(e.to_string()))
}
