//! CSV and JSON artifacts.
//!
//! Numbers are written in Rust's shortest round-trip form, so every file parses
//! back to bit-identical values.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::equilibria::{RegionCell, RegionClass};
use crate::error::{Error, Result};
use crate::integrator::Trajectory;
use crate::model::{ControlInput, SystemParams};

pub const TRAJECTORY_HEADER: [&str; 8] = ["t", "I", "SI", "II", "SS", "n", "u1", "u2"];
pub const REGION_HEADER: [&str; 3] = ["u1", "u2", "class"];

fn num(x: f64) -> String {
    format!("{x}")
}

/// One row per recorded time; the control columns hold the control acting from that time on.
pub fn write_trajectory<W: Write>(w: W, traj: &Trajectory, params: &SystemParams) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TRAJECTORY_HEADER)?;
    for (k, (t, x)) in traj.times.iter().zip(&traj.states).enumerate() {
        let u = traj.control_at(k);
        let row = [*t, x.i, x.si, x.ii, x.ss, x.mean_degree(params), u.u1, u.u2];
        out.write_record(row.iter().map(|v| num(*v)))?;
    }
    out.flush()?;
    Ok(())
}

/// Numeric rows of a file written by [`write_trajectory`].
pub fn read_trajectory<R: Read>(r: R) -> Result<Vec<[f64; 8]>> {
    let mut rows = Vec::new();
    let mut input = csv::Reader::from_reader(r);
    check_header(input.headers()?, &TRAJECTORY_HEADER)?;
    for record in input.records() {
        let record = record?;
        let mut row = [0.0; 8];
        for (slot, field) in row.iter_mut().zip(record.iter()) {
            *slot = parse_f64(field)?;
        }
        if record.len() != 8 {
            return Err(Error::Io(format!("expected 8 fields, found {}", record.len())));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Controls listed one interval per row under a `u1,u2` header.
pub fn read_schedule<R: Read>(r: R) -> Result<Vec<ControlInput>> {
    let mut input = csv::Reader::from_reader(r);
    check_header(input.headers()?, &["u1", "u2"])?;
    input
        .records()
        .map(|record| {
            let record = record?;
            let u = ControlInput::new(
                parse_f64(record.get(0).unwrap_or_default())?,
                parse_f64(record.get(1).unwrap_or_default())?,
            );
            u.validate()?;
            Ok(u)
        })
        .collect()
}

pub fn write_regions<W: Write>(w: W, cells: &[RegionCell]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(REGION_HEADER)?;
    for c in cells {
        out.write_record([num(c.u1), num(c.u2), c.class.as_str().to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_regions<R: Read>(r: R) -> Result<Vec<RegionCell>> {
    let mut input = csv::Reader::from_reader(r);
    check_header(input.headers()?, &REGION_HEADER)?;
    input
        .records()
        .map(|record| {
            let record = record?;
            let class: RegionClass = record.get(2).unwrap_or_default().parse()?;
            Ok(RegionCell {
                u1: parse_f64(record.get(0).unwrap_or_default())?,
                u2: parse_f64(record.get(1).unwrap_or_default())?,
                class,
            })
        })
        .collect()
}

/// A header row followed by rows of plain cells.
pub fn write_table<W: Write>(w: W, header: &[&str], rows: &[Vec<Cell>]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header)?;
    for row in rows {
        out.write_record(row.iter().map(Cell::render))?;
    }
    out.flush()?;
    Ok(())
}

/// A table entry: a number, a word, or nothing.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => num(*x),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Text(b.to_string())
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// Creates `path` (and `dir` if needed) and hands the writer to `body`.
pub fn create_in<F>(dir: &Path, name: &str, body: F) -> Result<()>
where
    F: FnOnce(fs::File) -> Result<()>,
{
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let file = fs::File::create(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    body(file)
}

fn parse_f64(field: &str) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Io(format!("`{field}` is not a number")))
}

fn check_header(found: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    if found.iter().eq(expected.iter().copied()) {
        Ok(())
    } else {
        Err(Error::Io(format!("unexpected header {found:?}, expected {expected:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::{simulate, ControlSchedule, StepConfig};
    use crate::model::{Dynamics, System};

    #[test]
    fn trajectory_round_trips_exactly() {
        let p = SystemParams::default();
        let schedule = ControlSchedule::constant(0.1, 30, ControlInput::new(3.0, 0.01)).unwrap();
        let traj = simulate(&Dynamics::new(p, System::Constant), &schedule, &StepConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_trajectory(&mut buf, &traj, &p).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,I,SI,II,SS,n,u1,u2\n"));
        let rows = read_trajectory(&buf[..]).unwrap();
        assert_eq!(rows.len(), 31);
        for (row, (t, x)) in rows.iter().zip(traj.times.iter().zip(&traj.states)) {
            assert_eq!(row[0].to_bits(), t.to_bits());
            assert_eq!(row[1..5], x.to_array());
            assert_eq!(row[5], x.mean_degree(&p));
        }
        assert_eq!((rows[30][6], rows[30][7]), (3.0, 0.01));
    }

    #[test]
    fn regions_round_trip() {
        let cells = vec![
            RegionCell { u1: 0.1 + 0.2, u2: 1e-4, class: RegionClass::Oscillatory },
            RegionCell { u1: 120.0, u2: 10.0, class: RegionClass::DiseaseFreeStable },
        ];
        let mut buf = Vec::new();
        write_regions(&mut buf, &cells).unwrap();
        assert_eq!(read_regions(&buf[..]).unwrap(), cells);
    }

    #[test]
    fn bad_files_are_rejected() {
        assert!(read_trajectory("t,I\n0,1\n".as_bytes()).is_err());
        assert!(read_regions("u1,u2,class\n1,2,spiral\n".as_bytes()).is_err());
        assert!(read_regions("u1,u2,class\n1,x,oscillatory\n".as_bytes()).is_err());
    }

    #[test]
    fn schedules() {
        let u = read_schedule("u1,u2\n1,0.5\n0,-0.25\n".as_bytes()).unwrap();
        assert_eq!(u, vec![ControlInput::new(1.0, 0.5), ControlInput::new(0.0, -0.25)]);
        assert!(read_schedule("u1,u2\n-1,0\n".as_bytes()).is_err());
        assert!(read_schedule("a,b\n1,0\n".as_bytes()).is_err());
    }

    #[test]
    fn table_cells() {
        let mut buf = Vec::new();
        let rows = vec![vec![Cell::from(7.8), Cell::from(None), Cell::from(true)]];
        write_table(&mut buf, &["M1", "n_star", "ok"], &rows).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "M1,n_star,ok\n7.8,,true\n");
    }
}
