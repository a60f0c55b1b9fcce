//! Reading and writing single datasets as two-column `y,x` CSV.

use crate::error::{Error, Result};
use crate::fit::CountDataset;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

pub fn read_dataset(path: impl AsRef<Path>) -> Result<CountDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(file, path)
}

/// Parses `y,x` CSV from any reader; `label` is used in error messages.
///
/// The header is required, columns may come in either order and extra
/// columns are ignored. Counts may be written as `3` or `3.0`.
pub fn parse_dataset(reader: impl Read, label: impl AsRef<Path>) -> Result<CountDataset> {
    let label = label.as_ref();
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: label.to_path_buf(),
        line,
        msg,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    let col = |name: &str| header.iter().position(|h| h.eq_ignore_ascii_case(name));
    let (Some(iy), Some(ix)) = (col("y"), col("x")) else {
        return Err(parse_err(1, format!("header must name columns `y` and `x`, found `{}`", header.iter().collect::<Vec<_>>().join(","))));
    };

    let (mut y, mut x) = (Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        y.push(parse_count(&rec[iy]).map_err(|m| parse_err(line, m))?);
        let xv: f64 = rec[ix]
            .parse()
            .map_err(|_| parse_err(line, format!("x value `{}` is not a number", &rec[ix])))?;
        if !xv.is_finite() {
            return Err(parse_err(line, format!("x value `{}` is not finite", &rec[ix])));
        }
        x.push(xv);
    }
    if y.is_empty() {
        return Err(parse_err(1, "no data rows".into()));
    }
    CountDataset::new(y, x)
}

fn parse_count(s: &str) -> std::result::Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    match s.parse::<f64>() {
        Ok(v) if v < 0.0 => Err(format!("count `{s}` is negative")),
        Ok(v) if v.fract() == 0.0 && v < 2f64.powi(53) => Ok(v as u64),
        Ok(_) => Err(format!("count `{s}` is not an integer")),
        Err(_) => Err(format!("count `{s}` is not a number")),
    }
}

/// Writes `data` so that [`read_dataset`] returns it exactly.
pub fn write_dataset(path: impl AsRef<Path>, data: &CountDataset) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_dataset_to(&mut w, data).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_dataset_to(w: &mut impl Write, data: &CountDataset) -> std::io::Result<()> {
    writeln!(w, "y,x")?;
    for (y, x) in data.y().iter().zip(data.x()) {
        // `{:?}` prints the shortest representation that parses back exactly
        writeln!(w, "{y},{x:?}")?;
    }
    Ok(())
}
