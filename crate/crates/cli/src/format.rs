//! On-disk artifact formats: the binary transition table and the plain-text
//! controller file. Both are written canonically so identical runs produce
//! byte-identical files.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use symcon_core::grid::UniformGridCover;
use symcon_core::synthesis::Controller;
use symcon_core::{FiniteSystem, SpecKind};

const TRANS_MAGIC: &[u8; 8] = b"SYTRANS1";
const CTRL_MAGIC: &str = "symcon controller v1";

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("artifact is malformed: {0}")]
    Malformed(String),
}

fn malformed(msg: impl Into<String>) -> FormatError {
    FormatError::Malformed(msg.into())
}

/// Sampling and input data stored next to the table, so mismatched
/// problem/artifact combinations are detected instead of silently misused.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionsMeta {
    pub tau: f64,
    pub substeps: u32,
    pub w: Vec<f64>,
    pub inputs: Vec<Vec<f64>>,
}

struct Cursor<'a, R: Read> {
    r: &'a mut R,
}

impl<'a, R: Read> Cursor<'a, R> {
    fn u32(&mut self) -> Result<u32, FormatError> {
        let mut b = [0u8; 4];
        self.r.read_exact(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }
    fn f64(&mut self) -> Result<f64, FormatError> {
        let mut b = [0u8; 8];
        self.r.read_exact(&mut b)?;
        Ok(f64::from_le_bytes(b))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, FormatError> {
        (0..n).map(|_| self.f64()).collect()
    }
    fn u32s(&mut self, n: usize) -> Result<Vec<u32>, FormatError> {
        (0..n).map(|_| self.u32()).collect()
    }
    fn u16s(&mut self, n: usize) -> Result<Vec<u16>, FormatError> {
        let mut out = vec![0u16; n];
        let mut b = [0u8; 2];
        for v in out.iter_mut() {
            self.r.read_exact(&mut b)?;
            *v = u16::from_le_bytes(b);
        }
        Ok(out)
    }
}

/// Writes the transition artifact.
pub fn write_transitions(
    path: &Path,
    sys: &FiniteSystem,
    meta: &TransitionsMeta,
) -> Result<(), FormatError> {
    let grid = sys
        .grid()
        .ok_or_else(|| malformed("only grid abstractions serialize as transition artifacts"))?;
    let (status, corners) = sys.boxed_parts().expect("grid system is box-stored");
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(TRANS_MAGIC)?;
    let dim = grid.dim() as u32;
    let input_dim = meta.inputs.first().map(|u| u.len()).unwrap_or(0) as u32;
    for v in [dim, sys.n_inputs(), grid.n_cells(), input_dim, meta.substeps] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&meta.tau.to_le_bytes())?;
    for d in 0..grid.dim() {
        w.write_all(&grid.first_center()[d].to_le_bytes())?;
    }
    for d in 0..grid.dim() {
        w.write_all(&grid.eta()[d].to_le_bytes())?;
    }
    for d in 0..grid.dim() {
        w.write_all(&grid.inflation()[d].to_le_bytes())?;
    }
    for d in 0..grid.dim() {
        w.write_all(&grid.counts()[d].to_le_bytes())?;
    }
    for d in 0..grid.dim() {
        w.write_all(&[grid.periodic()[d] as u8])?;
    }
    for v in &meta.w {
        w.write_all(&v.to_le_bytes())?;
    }
    for u in &meta.inputs {
        for v in u {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.write_all(status)?;
    for c in corners {
        w.write_all(&c.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a transition artifact back.
pub fn read_transitions(path: &Path) -> Result<(FiniteSystem, TransitionsMeta), FormatError> {
    let mut f = BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 8];
    f.read_exact(&mut magic)?;
    if &magic != TRANS_MAGIC {
        return Err(malformed("bad magic: not a transition artifact"));
    }
    let mut c = Cursor { r: &mut f };
    let dim = c.u32()? as usize;
    let n_inputs = c.u32()?;
    let n_cells = c.u32()?;
    let input_dim = c.u32()? as usize;
    let substeps = c.u32()?;
    let tau = c.f64()?;
    let first_center = c.f64s(dim)?;
    let eta = c.f64s(dim)?;
    let inflation = c.f64s(dim)?;
    let counts = c.u32s(dim)?;
    let mut periodic = Vec::with_capacity(dim);
    for _ in 0..dim {
        let mut b = [0u8; 1];
        c.r.read_exact(&mut b)?;
        periodic.push(b[0] != 0);
    }
    let w = c.f64s(dim)?;
    let mut inputs = Vec::with_capacity(n_inputs as usize);
    for _ in 0..n_inputs {
        inputs.push(c.f64s(input_dim)?);
    }
    let grid = UniformGridCover::new(first_center, eta, counts, periodic, inflation)
        .map_err(|e| malformed(format!("grid: {e}")))?;
    if grid.n_cells() != n_cells {
        return Err(malformed("cell count does not match the grid"));
    }
    let pairs = n_cells as usize * n_inputs as usize;
    let mut status = vec![0u8; pairs];
    f.read_exact(&mut status)?;
    let mut c = Cursor { r: &mut f };
    let corners = c.u16s(pairs * 2 * dim)?;
    let mut rest = Vec::new();
    f.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(malformed("trailing bytes after the corner table"));
    }
    let sys = FiniteSystem::from_boxed_parts(grid, n_inputs, status, corners)
        .map_err(|e| malformed(format!("table: {e}")))?;
    Ok((
        sys,
        TransitionsMeta {
            tau,
            substeps,
            w,
            inputs,
        },
    ))
}

fn kind_name(kind: SpecKind) -> &'static str {
    match kind {
        SpecKind::Safety => "safety",
        SpecKind::ReachAvoid => "reach-avoid",
        SpecKind::Recurrence => "recurrence",
    }
}

fn kind_of(name: &str) -> Option<SpecKind> {
    match name {
        "safety" => Some(SpecKind::Safety),
        "reach-avoid" => Some(SpecKind::ReachAvoid),
        "recurrence" => Some(SpecKind::Recurrence),
        _ => None,
    }
}

/// Serializes a controller: a header with the quantizer parameters, the
/// input list, spec kind and table count, then one record per domain cell
/// and table (`cell target: sorted input ids`).
pub fn write_controller(
    path: &Path,
    ctrl: &Controller,
    inputs: &[Vec<f64>],
) -> Result<(), FormatError> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    let grid = ctrl.grid();
    writeln!(w, "{CTRL_MAGIC}")?;
    writeln!(w, "kind {}", kind_name(ctrl.kind()))?;
    writeln!(w, "tables {}", ctrl.n_tables())?;
    writeln!(w, "grid {}", grid.dim())?;
    let line = |w: &mut BufWriter<std::fs::File>, name: &str, vals: &[f64]| -> std::io::Result<()> {
        write!(w, "{name}")?;
        for v in vals {
            write!(w, " {v}")?;
        }
        writeln!(w)
    };
    line(&mut w, "first_center", grid.first_center())?;
    line(&mut w, "eta", grid.eta())?;
    write!(w, "counts")?;
    for v in grid.counts() {
        write!(w, " {v}")?;
    }
    writeln!(w)?;
    write!(w, "periodic")?;
    for &p in grid.periodic() {
        write!(w, " {}", p as u8)?;
    }
    writeln!(w)?;
    line(&mut w, "inflation", grid.inflation())?;
    let input_dim = inputs.first().map(|u| u.len()).unwrap_or(0);
    writeln!(w, "inputs {} {}", inputs.len(), input_dim)?;
    for (i, u) in inputs.iter().enumerate() {
        write!(w, "input {i}")?;
        for v in u {
            write!(w, " {v}")?;
        }
        writeln!(w)?;
    }
    writeln!(w, "records")?;
    for cell in 0..grid.n_cells() {
        for t in 0..ctrl.n_tables() {
            let l = ctrl.inputs(t, symcon_core::CellId(cell));
            if l.is_empty() {
                continue;
            }
            write!(w, "{cell} {t}:")?;
            for u in l {
                write!(w, " {u}")?;
            }
            writeln!(w)?;
        }
    }
    writeln!(w, "end")?;
    w.flush()?;
    Ok(())
}

/// Reads a controller file back into a [`Controller`] plus its input list.
pub fn read_controller(path: &Path) -> Result<(Controller, Vec<Vec<f64>>), FormatError> {
    let f = BufReader::new(std::fs::File::open(path)?);
    let mut lines = f.lines();
    let mut next = || -> Result<String, FormatError> {
        lines
            .next()
            .ok_or_else(|| malformed("unexpected end of controller file"))?
            .map_err(FormatError::from)
    };
    if next()? != CTRL_MAGIC {
        return Err(malformed("bad header: not a controller file"));
    }
    let take = |line: String, key: &str| -> Result<String, FormatError> {
        line.strip_prefix(key)
            .map(|r| r.trim().to_string())
            .ok_or_else(|| malformed(format!("expected `{key}` line")))
    };
    let kind = kind_of(&take(next()?, "kind")?)
        .ok_or_else(|| malformed("unknown spec kind"))?;
    let n_tables: usize = take(next()?, "tables")?
        .parse()
        .map_err(|_| malformed("bad table count"))?;
    let dim: usize = take(next()?, "grid")?
        .parse()
        .map_err(|_| malformed("bad grid dimension"))?;
    let floats = |s: String, n: usize| -> Result<Vec<f64>, FormatError> {
        let vals: Result<Vec<f64>, _> = s.split_whitespace().map(str::parse).collect();
        let vals = vals.map_err(|_| malformed("bad float"))?;
        if vals.len() != n {
            return Err(malformed("wrong vector length"));
        }
        Ok(vals)
    };
    let first_center = floats(take(next()?, "first_center")?, dim)?;
    let eta = floats(take(next()?, "eta")?, dim)?;
    let counts: Vec<u32> = take(next()?, "counts")?
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| malformed("bad count")))
        .collect::<Result<_, _>>()?;
    let periodic: Vec<bool> = take(next()?, "periodic")?
        .split_whitespace()
        .map(|t| match t {
            "0" => Ok(false),
            "1" => Ok(true),
            _ => Err(malformed("bad periodic flag")),
        })
        .collect::<Result<_, _>>()?;
    let inflation = floats(take(next()?, "inflation")?, dim)?;
    if counts.len() != dim || periodic.len() != dim {
        return Err(malformed("grid vector length mismatch"));
    }
    let grid = UniformGridCover::new(first_center, eta, counts, periodic, inflation)
        .map_err(|e| malformed(format!("grid: {e}")))?;
    let header = take(next()?, "inputs")?;
    let mut it = header.split_whitespace();
    let n_inputs: u32 = it
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| malformed("bad input count"))?;
    let input_dim: usize = it
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| malformed("bad input dimension"))?;
    let mut inputs = Vec::with_capacity(n_inputs as usize);
    for i in 0..n_inputs {
        let l = take(next()?, "input")?;
        let mut it = l.split_whitespace();
        let idx: u32 = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| malformed("bad input id"))?;
        if idx != i {
            return Err(malformed("input ids must be consecutive"));
        }
        let vals: Result<Vec<f64>, _> = it.map(str::parse).collect();
        let vals = vals.map_err(|_| malformed("bad input value"))?;
        if vals.len() != input_dim {
            return Err(malformed("input vector length mismatch"));
        }
        inputs.push(vals);
    }
    if next()? != "records" {
        return Err(malformed("expected `records`"));
    }
    let mut tables: Vec<Vec<(u32, Vec<u32>)>> = vec![Vec::new(); n_tables];
    loop {
        let line = next()?;
        if line == "end" {
            break;
        }
        let (head, tail) = line
            .split_once(':')
            .ok_or_else(|| malformed("bad record line"))?;
        let mut it = head.split_whitespace();
        let cell: u32 = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| malformed("bad record cell"))?;
        let table: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| malformed("bad record table"))?;
        if table >= n_tables {
            return Err(malformed("record table out of range"));
        }
        let ids: Result<Vec<u32>, _> = tail.split_whitespace().map(str::parse).collect();
        let ids = ids.map_err(|_| malformed("bad record input id"))?;
        tables[table].push((cell, ids));
    }
    let ctrl = Controller::from_records(kind, grid, n_inputs, tables)
        .map_err(|e| malformed(format!("records: {e}")))?;
    Ok((ctrl, inputs))
}
