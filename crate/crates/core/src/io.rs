//! CSV artifacts. Numbers are written with 17 significant digits.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::regulator::{FeedforwardGain, SylvesterSolution};
use crate::simulator::SimulationResult;

pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_path(path)?)
}

fn finish(mut w: csv::Writer<File>) -> Result<()> {
    w.flush()?;
    Ok(())
}

pub const TRAJECTORY_HEADER: [&str; 11] = ["t", "y_re", "y_im", "y_r_re", "y_r_im", "u_re", "u_im", "e_re", "e_im", "e_abs", "state_dev_norm"];

pub fn write_trajectory(path: &Path, result: &SimulationResult) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(TRAJECTORY_HEADER)?;
    for i in 0..result.len() {
        let (y, yr, u, e) = (result.y[i], result.y_r[i], result.u[i], result.e[i]);
        w.write_record([
            fmt_num(result.t[i]),
            fmt_num(y.re),
            fmt_num(y.im),
            fmt_num(yr.re),
            fmt_num(yr.im),
            fmt_num(u.re),
            fmt_num(u.im),
            fmt_num(e.re),
            fmt_num(e.im),
            fmt_num(e.norm()),
            fmt_num(result.state_dev[i]),
        ])?;
    }
    finish(w)
}

/// Rows `(index, re, im)` under the given header for the index column.
pub fn write_indexed_complex(path: &Path, index: &str, rows: impl IntoIterator<Item = (i64, Complex64)>) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([index, "re", "im"])?;
    for (k, v) in rows {
        w.write_record([k.to_string(), fmt_num(v.re), fmt_num(v.im)])?;
    }
    finish(w)
}

pub fn write_gain(path: &Path, gain: &FeedforwardGain) -> Result<()> {
    write_indexed_complex(path, "k", gain.iter())
}

pub fn write_pi(path: &Path, pi: &SylvesterSolution) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["n", "k", "re", "im"])?;
    for (n, k, v) in pi.entries() {
        w.write_record([n.to_string(), k.to_string(), fmt_num(v.re), fmt_num(v.im)])?;
    }
    finish(w)
}

/// A header row followed by rows of real numbers.
pub fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(header)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::InvalidParameter(format!("row has {} fields, header {}", row.len(), header.len())));
        }
        w.write_record(row.into_iter().map(fmt_num))?;
    }
    finish(w)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

/// Reads `(k, re, im)` rows with a header line.
pub fn read_indexed_complex(path: &Path) -> Result<Vec<(i64, Complex64)>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let mut out = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record?;
        if record.len() != 3 {
            return Err(Error::Config(format!("{}: row {} has {} fields, expected 3", path.display(), line + 2, record.len())));
        }
        let parse_err = |what: &str| Error::Config(format!("{}: row {}: cannot parse {what}", path.display(), line + 2));
        let k: i64 = record[0].parse().map_err(|_| parse_err("index"))?;
        let re: f64 = record[1].parse().map_err(|_| parse_err("real part"))?;
        let im: f64 = record[2].parse().map_err(|_| parse_err("imaginary part"))?;
        out.push((k, Complex64::new(re, im)));
    }
    Ok(out)
}
