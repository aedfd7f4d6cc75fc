//! CSV readers and writers for pellet frames, palate traces and
//! tract-variable matrices. Floats are written in shortest round-trip form.

use std::io::{Read, Write};

use crate::kinematics::{KinematicsError, PalateTrace, PelletFrame, Point};
use crate::tv::{Channel, TractVariableMatrix};

pub const PELLET_HEADER: &str =
    "time_s,UL_x,UL_y,LL_x,LL_y,T1_x,T1_y,T2_x,T2_y,T3_x,T3_y,T4_x,T4_y";
pub const PALATE_HEADER: &str = "x_mm,y_mm";
pub const TV_HEADER: &str = "time_s,LA,LP,TTCL,TTCD,TBCL,TBCD";
pub const TV_SOURCE_HEADER: &str = "time_s,LA,LP,TTCL,TTCD,TBCL,TBCD,PER,APER,F0";

/// Column order of the tract-variable CSV after `time_s`.
const TV_COLUMNS: [Channel; 9] = [
    Channel::La,
    Channel::Lp,
    Channel::Ttcl,
    Channel::Ttcd,
    Channel::Tbcl,
    Channel::Tbcd,
    Channel::Per,
    Channel::Aper,
    Channel::F0,
];

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("expected header `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("line {line}: {msg}")]
    Row { line: usize, msg: String },
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, FormatError>;

/// Shortest text that parses back to the same `f64`; exponent notation for
/// very small or large magnitudes.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn read_table<R: Read>(reader: R, headers: &[&str]) -> Result<(usize, Vec<Vec<f64>>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let found = rdr.headers()?.iter().collect::<Vec<_>>().join(",");
    let which = headers
        .iter()
        .position(|h| *h == found)
        .ok_or_else(|| FormatError::Header {
            expected: headers.join("` or `"),
            found: found.clone(),
        })?;
    let width = headers[which].split(',').count();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() != width {
            return Err(FormatError::Row {
                line,
                msg: format!("{} fields, expected {width}", rec.len()),
            });
        }
        let vals = rec
            .iter()
            .map(|f| {
                let v: f64 = f.parse().map_err(|_| FormatError::Row {
                    line,
                    msg: format!("`{f}` is not a number"),
                })?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(FormatError::Row {
                        line,
                        msg: format!("non-finite value `{f}`"),
                    })
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(vals);
    }
    Ok((which, rows))
}

fn write_rows<W: Write>(
    writer: W,
    header: &str,
    rows: impl Iterator<Item = Vec<f64>>,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(header.split(','))?;
    for row in rows {
        wtr.write_record(row.iter().map(|v| fmt_f64(*v)))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_pellets<W: Write>(writer: W, frames: &[PelletFrame]) -> Result<()> {
    write_rows(
        writer,
        PELLET_HEADER,
        frames.iter().map(|f| {
            let mut v = vec![f.time];
            for p in f.pellets() {
                v.push(p.x);
                v.push(p.y);
            }
            v
        }),
    )
}

pub fn read_pellets<R: Read>(reader: R) -> Result<Vec<PelletFrame>> {
    let (_, rows) = read_table(reader, &[PELLET_HEADER])?;
    Ok(rows
        .into_iter()
        .map(|r| {
            let p = |i: usize| Point {
                x: r[1 + 2 * i],
                y: r[2 + 2 * i],
            };
            PelletFrame {
                time: r[0],
                ul: p(0),
                ll: p(1),
                t1: p(2),
                t2: p(3),
                t3: p(4),
                t4: p(5),
            }
        })
        .collect())
}

pub fn write_palate<W: Write>(writer: W, trace: &PalateTrace) -> Result<()> {
    write_rows(
        writer,
        PALATE_HEADER,
        trace.points().iter().map(|p| vec![p.x, p.y]),
    )
}

pub fn read_palate<R: Read>(reader: R) -> Result<PalateTrace> {
    let (_, rows) = read_table(reader, &[PALATE_HEADER])?;
    Ok(PalateTrace::new(
        rows.into_iter()
            .map(|r| Point { x: r[0], y: r[1] })
            .collect(),
    )?)
}

/// Writes 100 Hz rows; the source columns are included when `with_source`.
pub fn write_tv<W: Write>(writer: W, m: &TractVariableMatrix, with_source: bool) -> Result<()> {
    let (header, n) = if with_source {
        (TV_SOURCE_HEADER, 9)
    } else {
        (TV_HEADER, 6)
    };
    write_rows(
        writer,
        header,
        (0..m.len()).map(|t| {
            let mut v = vec![TractVariableMatrix::time_of(t)];
            v.extend(TV_COLUMNS[..n].iter().map(|&c| m.get(c, t)));
            v
        }),
    )
}

/// Reads a tract-variable CSV. Returns the matrix (source channels zero
/// when absent) and whether source columns were present.
pub fn read_tv<R: Read>(reader: R) -> Result<(TractVariableMatrix, bool)> {
    let (which, rows) = read_table(reader, &[TV_HEADER, TV_SOURCE_HEADER])?;
    let n = if which == 1 { 9 } else { 6 };
    let mut m = TractVariableMatrix::zeros(rows.len());
    for (t, r) in rows.iter().enumerate() {
        for (k, &c) in TV_COLUMNS[..n].iter().enumerate() {
            m.set(c, t, r[1 + k]);
        }
    }
    Ok((m, which == 1))
}
