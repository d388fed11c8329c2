//! Plain-text dataset cache.
//!
//! ```text
//! # robust-sysid dataset v1
//! # d=2 horizon=3 n=2 corrupted=1
//! trajectory,t,x0,x1,w0,w1
//! 0,0,0,0,0.31,-1.2
//! ...
//! 0,4,0.7,0.02,,
//! ```
//!
//! One row per `(trajectory, t)` for `t = 0..=T+1`. The `x*` columns hold the
//! state and the `w*` columns the noise draw `w_t` that produced `x_{t+1}`;
//! the final row of each trajectory leaves the noise columns empty.
//! `corrupted` is a `;`-separated index list (empty when clean). Numbers are
//! written in shortest round-trip form, so a read-back is bit-exact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::{Dataset, Trajectory};
use crate::matlib::Vector;

const MAGIC: &str = "# robust-sysid dataset v1";

#[derive(Debug, Error)]
pub enum DatasetIoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("dataset format error on line {line}: {msg}")]
    Format { line: usize, msg: String },
}

fn format_err(line: usize, msg: impl Into<String>) -> DatasetIoError {
    DatasetIoError::Format {
        line,
        msg: msg.into(),
    }
}

pub(crate) fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn write_dataset_to<W: Write>(data: &Dataset, out: W) -> std::io::Result<()> {
    let mut out = BufWriter::new(out);
    let d = data.system_dim();
    writeln!(out, "{MAGIC}")?;
    let corrupted: Vec<String> = data.corrupted_indices().iter().map(usize::to_string).collect();
    writeln!(
        out,
        "# d={d} horizon={} n={} corrupted={}",
        data.horizon(),
        data.len(),
        corrupted.join(";")
    )?;
    let mut header = vec!["trajectory".to_string(), "t".to_string()];
    header.extend((0..d).map(|i| format!("x{i}")));
    header.extend((0..d).map(|i| format!("w{i}")));
    writeln!(out, "{}", header.join(","))?;

    for (i, traj) in data.trajectories().iter().enumerate() {
        for (t, x) in traj.states().iter().enumerate() {
            let mut row = vec![i.to_string(), t.to_string()];
            row.extend(x.as_slice().iter().map(|v| fmt_f64(*v)));
            match traj.noise().get(t) {
                Some(w) => row.extend(w.as_slice().iter().map(|v| fmt_f64(*v))),
                None => row.extend(std::iter::repeat_n(String::new(), d)),
            }
            writeln!(out, "{}", row.join(","))?;
        }
    }
    out.flush()
}

pub fn write_dataset(data: &Dataset, path: &Path) -> std::io::Result<()> {
    write_dataset_to(data, File::create(path)?)
}

fn parse_meta(line: &str, lineno: usize) -> Result<(usize, usize, usize, Vec<usize>), DatasetIoError> {
    let body = line
        .strip_prefix('#')
        .ok_or_else(|| format_err(lineno, "expected metadata comment"))?;
    let (mut d, mut horizon, mut n, mut corrupted) = (None, None, None, Vec::new());
    for field in body.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| format_err(lineno, format!("malformed field `{field}`")))?;
        let num = |v: &str| {
            v.parse::<usize>()
                .map_err(|_| format_err(lineno, format!("bad integer `{v}`")))
        };
        match key {
            "d" => d = Some(num(value)?),
            "horizon" => horizon = Some(num(value)?),
            "n" => n = Some(num(value)?),
            "corrupted" if value.is_empty() => {}
            "corrupted" => {
                corrupted = value.split(';').map(num).collect::<Result<_, _>>()?;
            }
            other => return Err(format_err(lineno, format!("unknown field `{other}`"))),
        }
    }
    match (d, horizon, n) {
        (Some(d), Some(h), Some(n)) if d > 0 && h > 0 && n > 0 => Ok((d, h, n, corrupted)),
        _ => Err(format_err(lineno, "metadata needs positive d, horizon and n")),
    }
}

pub fn read_dataset_from<R: Read>(input: R) -> Result<Dataset, DatasetIoError> {
    let reader = BufReader::new(input);
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));

    let mut next_line = |what: &str| -> Result<(usize, String), DatasetIoError> {
        match lines.next() {
            Some((no, Ok(l))) => Ok((no, l)),
            Some((_, Err(e))) => Err(e.into()),
            None => Err(format_err(0, format!("unexpected end of file, expected {what}"))),
        }
    };

    let (no, magic) = next_line("version header")?;
    if magic.trim_end() != MAGIC {
        return Err(format_err(no, format!("expected `{MAGIC}`")));
    }
    let (no, meta) = next_line("metadata")?;
    let (d, horizon, n, corrupted) = parse_meta(meta.trim_end(), no)?;
    let (no, header) = next_line("column header")?;
    let columns = header.trim_end().split(',').count();
    if columns != 2 + 2 * d {
        return Err(format_err(no, format!("expected {} columns", 2 + 2 * d)));
    }

    let mut trajectories = Vec::with_capacity(n);
    for i in 0..n {
        let mut states = Vec::with_capacity(horizon + 2);
        let mut noise = Vec::with_capacity(horizon + 1);
        for t in 0..horizon + 2 {
            let (no, line) = next_line("data row")?;
            let fields: Vec<&str> = line.trim_end().split(',').collect();
            if fields.len() != columns {
                return Err(format_err(no, format!("expected {columns} fields")));
            }
            if fields[0] != i.to_string() || fields[1] != t.to_string() {
                return Err(format_err(no, format!("expected row for trajectory {i}, t {t}")));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| format_err(no, format!("bad number `{s}`")))
            };
            let x: Vec<f64> = fields[2..2 + d].iter().map(|s| parse(s)).collect::<Result<_, _>>()?;
            states.push(Vector::new(x).map_err(|e| format_err(no, e.to_string()))?);
            let w = &fields[2 + d..];
            if t <= horizon {
                let w: Vec<f64> = w.iter().map(|s| parse(s)).collect::<Result<_, _>>()?;
                noise.push(Vector::new(w).map_err(|e| format_err(no, e.to_string()))?);
            } else if w.iter().any(|s| !s.is_empty()) {
                return Err(format_err(no, "final row must leave noise columns empty"));
            }
        }
        trajectories.push(Trajectory::from_parts(states, noise));
    }
    if let Some((no, Ok(extra))) = lines.next() {
        if !extra.trim().is_empty() {
            return Err(format_err(no, "trailing data after the last trajectory"));
        }
    }
    if corrupted.iter().any(|&c| c >= n) {
        return Err(format_err(2, "corrupted index out of range"));
    }
    Ok(Dataset::from_parts(trajectories, d, horizon, corrupted))
}

pub fn read_dataset(path: &Path) -> Result<Dataset, DatasetIoError> {
    read_dataset_from(File::open(path)?)
}
