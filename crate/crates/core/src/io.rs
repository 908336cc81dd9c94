//! CSV file formats.
//!
//! * Edge lists: header `i,j,weight`, 0-based node ids with `i < j`, one row
//!   per strictly positive weight, in slot order.
//! * Signals: no header, one signal per row, `n` columns.
//!
//! Floats are written with 17 significant digits so they read back exactly.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::EdgeVector;
use crate::padmm::TraceRow;

/// Formats a float with 17 significant digits (round-trips bit-exactly).
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

pub fn write_edge_list<W: Write>(w: &EdgeVector, out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["i", "j", "weight"])?;
    for (i, j, x) in w.edges() {
        wtr.write_record([i.to_string(), j.to_string(), fmt_f64(x)])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads an edge list. With `n = None` the node count is one past the largest id.
pub fn read_edge_list<R: Read>(input: R, n: Option<usize>) -> Result<EdgeVector> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers()?.clone();
    if headers.len() != 3 || &headers[0] != "i" || &headers[1] != "j" || &headers[2] != "weight" {
        return Err(Error::Parse(format!(
            "edge list header must be `i,j,weight`, got {:?}",
            headers.iter().collect::<Vec<_>>()
        )));
    }
    let mut edges = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = || Error::Parse(format!("bad edge list row {}", line + 2));
        if rec.len() != 3 {
            return Err(bad());
        }
        let i: usize = rec[0].parse().map_err(|_| bad())?;
        let j: usize = rec[1].parse().map_err(|_| bad())?;
        let x: f64 = rec[2].parse().map_err(|_| bad())?;
        if i >= j {
            return Err(Error::InvalidPair {
                i,
                j,
                n: n.unwrap_or(0),
            });
        }
        edges.push((i, j, x));
    }
    let n = match n {
        Some(n) => n,
        None => edges.iter().map(|e| e.1 + 1).max().unwrap_or(0),
    };
    EdgeVector::from_edges(n, edges)
}

pub fn write_signals<W: Write>(signals: &[Vec<f64>], out: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for x in signals {
        wtr.write_record(x.iter().map(|v| fmt_f64(*v)))?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads a signal matrix; every row must have the same number of columns (at least 2).
pub fn read_signals<R: Read>(input: R) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut out: Vec<Vec<f64>> = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::Parse(format!("bad signal row {}", line + 1)))?;
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse(format!("non-finite value in signal row {}", line + 1)));
        }
        if let Some(first) = out.first() {
            if first.len() != row.len() {
                return Err(Error::DimensionMismatch {
                    what: "signal row",
                    expected: first.len(),
                    got: row.len(),
                });
            }
        }
        out.push(row);
    }
    match out.first() {
        None => Err(Error::Degenerate("signal file has no rows".into())),
        Some(r) if r.len() < 2 => Err(Error::Degenerate("signals need at least 2 nodes".into())),
        _ => Ok(out),
    }
}

/// Writes a batch convergence trace with header `iter,w_change,primal_residual,objective`.
pub fn write_trace<W: Write>(trace: &[TraceRow], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["iter", "w_change", "primal_residual", "objective"])?;
    for row in trace {
        wtr.write_record([
            row.iter.to_string(),
            fmt_f64(row.w_change),
            fmt_f64(row.primal_residual),
            fmt_f64(row.objective),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn create(path: &Path) -> Result<File> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    Ok(File::create(path)?)
}

pub fn open(path: &Path) -> Result<File> {
    Ok(File::open(path)?)
}
