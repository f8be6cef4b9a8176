//! Dataset exchange format.
//!
//! A dataset file is CSV with a version comment on the first line, a header
//! `y,x1,…,xp`, and one observation per row:
//!
//! ```text
//! # hdrisk-dataset v1
//! y,x1,x2
//! 0.5,1.0,-2.0
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::data::Dataset;
use crate::error::{Error, Result};

pub const DATASET_VERSION_LINE: &str = "# hdrisk-dataset v1";

pub fn write_dataset<W: Write>(data: &Dataset, out: W) -> Result<()> {
    let mut out = out;
    writeln!(out, "{DATASET_VERSION_LINE}")?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let mut header = vec!["y".to_string()];
    header.extend((1..=data.p()).map(|j| format!("x{j}")));
    w.write_record(&header)?;
    for i in 0..data.n() {
        let mut rec = Vec::with_capacity(data.p() + 1);
        rec.push(data.y[i].to_string());
        rec.extend(data.x.row(i).iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset<R: Read>(input: R) -> Result<Dataset> {
    let mut reader = BufReader::new(input);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    if first.trim_end() != DATASET_VERSION_LINE {
        return Err(Error::config(
            "dataset",
            format!("first line must be `{DATASET_VERSION_LINE}`"),
        ));
    }
    let mut r = csv::ReaderBuilder::new().from_reader(reader);
    let header = r.headers()?.clone();
    if header.get(0) != Some("y") || header.len() < 2 {
        return Err(Error::config("dataset", "header must be `y,x1,...,xp` with p ≥ 1"));
    }
    let p = header.len() - 1;
    let mut y = Vec::new();
    let mut xs = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let parse = |s: &str| {
            s.trim().parse::<f64>().map_err(|_| {
                Error::config("dataset", format!("row {}: `{s}` is not a number", line + 1))
            })
        };
        y.push(parse(&rec[0])?);
        for field in rec.iter().skip(1) {
            xs.push(parse(field)?);
        }
    }
    let n = y.len();
    if n == 0 {
        return Err(Error::config("dataset", "no observations"));
    }
    let x = DMatrix::from_row_slice(n, p, &xs);
    Dataset::new(x, DVector::from_vec(y))
}

pub fn save_dataset(data: &Dataset, path: &Path) -> Result<()> {
    write_dataset(data, std::io::BufWriter::new(File::create(path)?))
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    read_dataset(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let x = DMatrix::from_fn(5, 3, |i, j| (i as f64 + 0.1) / (j as f64 + 3.0));
        let y = DVector::from_fn(5, |i, _| 1.0 / (i as f64 + 7.0));
        let data = Dataset::new(x, y).unwrap();
        let mut buf = Vec::new();
        write_dataset(&data, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# hdrisk-dataset v1\ny,x1,x2,x3\n"));
        assert!(!text.contains('\r'));
        let back = read_dataset(buf.as_slice()).unwrap();
        assert_eq!(back, data);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(read_dataset("y,x1\n1,2\n".as_bytes()).is_err());
        assert!(read_dataset("# hdrisk-dataset v1\ny,x1\n1,abc\n".as_bytes()).is_err());
        assert!(read_dataset("# hdrisk-dataset v1\ny,x1\n1,2,3\n".as_bytes()).is_err());
        assert!(read_dataset("# hdrisk-dataset v1\ny,x1\n".as_bytes()).is_err());
    }
}
