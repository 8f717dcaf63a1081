use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Raw input samples and the corresponding QoI values.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// `M × N` inputs in physical units.
    pub x: DMatrix<f64>,
    pub q: Vec<f64>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, q: Vec<f64>) -> Result<Self> {
        if x.nrows() != q.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} input rows for {} outputs",
                x.nrows(),
                q.len()
            )));
        }
        if x.iter().chain(&q).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("dataset".into()));
        }
        Ok(Self { x, q })
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }
}

/// Parses a CSV whose header must equal `header`; returns `(line, values)`
/// per record.
pub(crate) fn read_numeric_csv<R: Read>(reader: R, header: &[&str]) -> Result<Vec<(usize, Vec<f64>)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    let mut seen_header = false;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::Parse {
                line,
                message: e.to_string(),
            }
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if !seen_header {
            let got: Vec<&str> = rec.iter().collect();
            if got != header {
                return Err(Error::Schema {
                    line,
                    message: format!("expected header {}, found {}", header.join(","), got.join(",")),
                });
            }
            seen_header = true;
            continue;
        }
        if rec.len() != header.len() {
            return Err(Error::Schema {
                line,
                message: format!("expected {} columns, found {}", header.len(), rec.len()),
            });
        }
        let values = rec
            .iter()
            .enumerate()
            .map(|(col, s)| {
                let v: f64 = s.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("column {} ('{}'): cannot parse '{s}'", col + 1, header[col]),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        line,
                        message: format!("column {} ('{}') is not finite", col + 1, header[col]),
                    });
                }
                Ok(v)
            })
            .collect::<Result<Vec<f64>>>()?;
        out.push((line, values));
    }
    if !seen_header {
        return Err(Error::Schema {
            line: 1,
            message: "missing header".into(),
        });
    }
    Ok(out)
}

fn dataset_header(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("x{i}")).chain(["Q".to_string()]).collect()
}

/// Reads an `x1,…,xN,Q` dataset with `n` input columns.
pub fn read_dataset<R: Read>(reader: R, n: usize) -> Result<Dataset> {
    let header = dataset_header(n);
    let names: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = read_numeric_csv(reader, &names)?;
    let m = rows.len();
    let x = DMatrix::from_fn(m, n, |r, c| rows[r].1[c]);
    let q = rows.iter().map(|(_, v)| v[n]).collect();
    Dataset::new(x, q)
}

/// Reads a five-input dataset from disk.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_dataset(std::io::BufReader::new(f), 5)
}

/// Writes shortest round-trip decimal floats.
pub fn write_dataset<W: Write>(writer: W, data: &Dataset) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(dataset_header(data.dim())).map_err(io)?;
    for (r, q) in data.q.iter().enumerate() {
        let row: Vec<String> = data.x.row(r).iter().chain([q]).map(|v| v.to_string()).collect();
        w.write_record(&row).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}
