//! Flat-file emission. Every number leaves the crate with 12 significant digits.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::pde::{Grid, Snapshot};

pub const SIGNIFICANT_DIGITS: usize = 12;

/// `%.12g`-style decimal rendering.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    if (-5..SIGNIFICANT_DIGITS as i32).contains(&exp) {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x))
    } else {
        format!("{}e{}", trim_zeros(mantissa), exp)
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

pub fn round_num(x: f64) -> f64 {
    if x.is_finite() {
        fmt_num(x).parse().unwrap_or(x)
    } else {
        x
    }
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) => {
            if n.is_f64() {
                if let Some(x) = n.as_f64() {
                    if let Some(r) = serde_json::Number::from_f64(round_num(x)) {
                        *n = r;
                    }
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Pretty JSON with every float rounded to 12 significant digits.
pub fn to_json<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let mut v = serde_json::to_value(value)?;
    round_value(&mut v);
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let s = to_json(value).map_err(std::io::Error::other)?;
    std::fs::write(path, s)
}

pub fn write_snapshots_csv(path: &Path, snapshots: &[Snapshot]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(["t", "x", "u", "ux", "uxx"])?;
    for s in snapshots {
        let t = fmt_num(s.t);
        for i in 0..s.grid.n {
            w.write_record([
                t.as_str(),
                &fmt_num(s.grid.x(i)),
                &fmt_num(s.u[i]),
                &fmt_num(s.ux[i]),
                &fmt_num(s.uxx[i]),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_trajectories_csv(path: &Path, snapshots: &[&Snapshot]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(["t", "x", "u", "ux"])?;
    for s in snapshots {
        let t = fmt_num(s.t);
        for i in 0..s.grid.n {
            w.write_record([t.as_str(), &fmt_num(s.grid.x(i)), &fmt_num(s.u[i]), &fmt_num(s.ux[i])])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroCountRow {
    pub functional_id: String,
    pub t: f64,
    pub interval: (f64, f64),
    /// `None` when the functional was inside the deadband everywhere.
    pub count: Option<usize>,
    pub n_multiples: usize,
}

pub fn write_zerocounts_csv(path: &Path, rows: &[ZeroCountRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(["functional_id", "t", "interval", "count", "n_multiples"])?;
    for r in rows {
        w.write_record([
            r.functional_id.clone(),
            fmt_num(r.t),
            format!("[{};{}]", fmt_num(r.interval.0), fmt_num(r.interval.1)),
            r.count.map(|c| c.to_string()).unwrap_or_else(|| "undefined".into()),
            r.n_multiples.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, thiserror::Error)]
pub enum SnapshotReadError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("snapshots file: {0}")]
    Format(String),
}

/// Reads `snapshots.csv` back into snapshots (grid inferred from the first time block).
pub fn read_snapshots_csv(path: &Path) -> Result<Vec<Snapshot>, SnapshotReadError> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| SnapshotReadError::Format(format!("missing column {name}")))
    };
    let (ct, cx, cu, cux, cuxx) = (col("t")?, col("x")?, col("u")?, col("ux")?, col("uxx")?);
    let parse = |s: &str| {
        s.parse::<f64>()
            .map_err(|e| SnapshotReadError::Format(format!("bad number {s:?}: {e}")))
    };
    let mut blocks: Vec<(f64, Vec<[f64; 4]>)> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let t = parse(&rec[ct])?;
        let row = [parse(&rec[cx])?, parse(&rec[cu])?, parse(&rec[cux])?, parse(&rec[cuxx])?];
        match blocks.last_mut() {
            Some((bt, rows)) if *bt == t => rows.push(row),
            _ => blocks.push((t, vec![row])),
        }
    }
    let first = blocks
        .first()
        .ok_or_else(|| SnapshotReadError::Format("no rows".into()))?;
    if first.1.len() < 4 {
        return Err(SnapshotReadError::Format("need at least four nodes".into()));
    }
    let grid = Grid {
        half_width: -first.1[0][0],
        dx: (first.1[first.1.len() - 1][0] - first.1[0][0]) / (first.1.len() - 1) as f64,
        n: first.1.len(),
    };
    blocks
        .into_iter()
        .map(|(t, rows)| {
            if rows.len() != grid.n {
                return Err(SnapshotReadError::Format(format!(
                    "snapshot at t = {t} has {} nodes, expected {}",
                    rows.len(),
                    grid.n
                )));
            }
            Ok(Snapshot {
                t,
                grid,
                u: rows.iter().map(|r| r[1]).collect(),
                ux: rows.iter().map(|r| r[2]).collect(),
                uxx: rows.iter().map(|r| r[3]).collect(),
            })
        })
        .collect()
}

pub fn write_text(path: &Path, text: &str) -> std::io::Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(text.as_bytes())?;
    f.flush()
}
