//! Field snapshots: a lossless text format (mesh block followed by one row
//! per P2 node) and a legacy ASCII VTK file with quadratic triangles.
//!
//! ```text
//! # boussinesq snapshot v1
//! step <n>
//! time <t>
//! <mesh block as written by Mesh::write_text>
//! nodes <N>
//! <x> <y> <ux> <uy> <p> <T> <tau> <theta>     (N lines, P2 node order)
//! ```
//!
//! Pressure is P1; its values at edge midpoints are the linear interpolant and
//! are ignored on reading.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::fem::space::P2DofMap;
use crate::fem::{FeSystem, FieldVector, Space};
use crate::hopf::HopfExtension;
use crate::mesh::{Mesh, MeshError};
use crate::scheme::SchemeState;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: io::Error },
    #[error("malformed snapshot ({context}): {message}")]
    Parse { context: String, message: String },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub mesh: Mesh,
    pub u: FieldVector,
    pub p: FieldVector,
    pub t: FieldVector,
    pub tau: FieldVector,
    pub theta: FieldVector,
}

/// Nodal pressure on all P2 nodes, midpoints by linear interpolation.
fn nodal_pressure(system: &FeSystem, p: &FieldVector) -> Vec<f64> {
    let dofs = system.dofs();
    let mut out = p.coeffs().to_vec();
    out.extend(dofs.edges.iter().map(|[a, b]| 0.5 * (p.coeffs()[*a] + p.coeffs()[*b])));
    out
}

pub fn write_snapshot_text(mut w: impl Write, state: &SchemeState, system: &FeSystem, hopf: &HopfExtension) -> io::Result<()> {
    writeln!(w, "# boussinesq snapshot v1")?;
    writeln!(w, "step {}", state.n)?;
    writeln!(w, "time {:?}", state.time)?;
    system.mesh().write_text(&mut w)?;
    let n = system.n_p2();
    let u = state.u.coeffs();
    let p = nodal_pressure(system, &state.p);
    let t = state.t.coeffs();
    let tau = hopf.coefficients.coeffs();
    writeln!(w, "nodes {n}")?;
    writeln!(w, "# x y ux uy p T tau theta")?;
    for (i, x) in system.dofs().coords.iter().enumerate() {
        writeln!(w, "{:?} {:?} {:?} {:?} {:?} {:?} {:?} {:?}", x[0], x[1], u[i], u[n + i], p[i], t[i], tau[i], t[i] - tau[i])?;
    }
    Ok(())
}

/// Legacy VTK (ASCII, unstructured grid, cell type 22) with point data.
pub fn write_vtk(mut w: impl Write, state: &SchemeState, system: &FeSystem, hopf: &HopfExtension) -> io::Result<()> {
    let n = system.n_p2();
    let cells = &system.dofs().cells;
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "boussinesq step {} time {:?}", state.n, state.time)?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {n} double")?;
    for x in &system.dofs().coords {
        writeln!(w, "{:?} {:?} 0", x[0], x[1])?;
    }
    writeln!(w, "CELLS {} {}", cells.len(), 7 * cells.len())?;
    for c in cells {
        writeln!(w, "6 {} {} {} {} {} {}", c[0], c[1], c[2], c[3], c[4], c[5])?;
    }
    writeln!(w, "CELL_TYPES {}", cells.len())?;
    for _ in cells {
        writeln!(w, "22")?;
    }
    writeln!(w, "POINT_DATA {n}")?;
    let u = state.u.coeffs();
    writeln!(w, "VECTORS velocity double")?;
    for i in 0..n {
        writeln!(w, "{:?} {:?} 0", u[i], u[n + i])?;
    }
    let tau = hopf.coefficients.coeffs();
    let theta: Vec<f64> = state.t.coeffs().iter().zip(tau).map(|(a, b)| a - b).collect();
    let columns: [(&str, &[f64]); 4] =
        [("pressure", &nodal_pressure(system, &state.p)), ("temperature", state.t.coeffs()), ("tau", tau), ("theta", &theta)];
    for (name, values) in columns {
        writeln!(w, "SCALARS {name} double 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for v in values {
            writeln!(w, "{v:?}")?;
        }
    }
    Ok(())
}

/// Writes `snap_NNNNNN.txt` and `snap_NNNNNN.vtk` into `dir`; returns both paths.
pub fn write_snapshot(dir: &Path, state: &SchemeState, system: &FeSystem, hopf: &HopfExtension) -> Result<(PathBuf, PathBuf), SnapshotError> {
    let txt = dir.join(format!("snap_{:06}.txt", state.n));
    let vtk = dir.join(format!("snap_{:06}.vtk", state.n));
    let write = |path: &Path, f: &dyn Fn(&mut BufWriter<File>) -> io::Result<()>| -> Result<(), SnapshotError> {
        let wrap = |source| SnapshotError::Write { path: path.to_path_buf(), source };
        let mut out = BufWriter::new(File::create(path).map_err(wrap)?);
        f(&mut out).and_then(|_| out.flush()).map_err(wrap)
    };
    write(&txt, &|w| write_snapshot_text(w, state, system, hopf))?;
    write(&vtk, &|w| write_vtk(w, state, system, hopf))?;
    Ok((txt, vtk))
}

pub fn read_snapshot(reader: &mut impl BufRead) -> Result<Snapshot, SnapshotError> {
    let mut buf = String::new();
    let mut next = |reader: &mut dyn BufRead, context: &str| -> Result<Vec<String>, SnapshotError> {
        loop {
            buf.clear();
            if reader.read_line(&mut buf)? == 0 {
                return Err(bad(context, "unexpected end of file".into()));
            }
            let s = buf.trim();
            if !s.is_empty() && !s.starts_with('#') {
                return Ok(s.split_whitespace().map(str::to_owned).collect());
            }
        }
    };
    let mut keyed = |reader: &mut dyn BufRead, key: &str| -> Result<String, SnapshotError> {
        match next(reader, key)?.as_slice() {
            [k, v] if k == key => Ok(v.clone()),
            _ => Err(bad(key, format!("expected `{key} <value>`"))),
        }
    };
    let step: usize = keyed(reader, "step")?.parse().map_err(|_| bad("step", "not an integer".into()))?;
    let time: f64 = keyed(reader, "time")?.parse().map_err(|_| bad("time", "not a number".into()))?;
    let mesh = Mesh::read_text(reader)?;
    let dofs = P2DofMap::new(&mesh);
    let n: usize = keyed(reader, "nodes")?.parse().map_err(|_| bad("nodes", "not an integer".into()))?;
    if n != dofs.n_nodes() {
        return Err(bad("nodes", format!("{n} nodes, mesh has {} P2 nodes", dofs.n_nodes())));
    }
    let mut cols = vec![Vec::with_capacity(n); 8];
    for i in 0..n {
        let context = format!("node row {i}");
        let f = next(reader, &context)?;
        if f.len() != 8 {
            return Err(bad(&context, format!("{} columns, expected 8", f.len())));
        }
        for (c, s) in cols.iter_mut().zip(&f) {
            c.push(s.parse::<f64>().map_err(|_| bad(&context, format!("cannot parse `{s}`")))?);
        }
        if [cols[0][i], cols[1][i]] != dofs.coords[i] {
            return Err(bad(&context, format!("not at P2 node {:?}", dofs.coords[i])));
        }
    }
    let mut u = cols[2].clone();
    u.extend_from_slice(&cols[3]);
    let p = cols[4][..mesh.n_vertices()].to_vec();
    Ok(Snapshot {
        step,
        time,
        u: FieldVector::new(Space::Velocity, u),
        p: FieldVector::new(Space::Pressure, p),
        t: FieldVector::new(Space::Temperature, cols[5].clone()),
        tau: FieldVector::new(Space::Temperature, cols[6].clone()),
        theta: FieldVector::new(Space::Temperature, cols[7].clone()),
        mesh,
    })
}

fn bad(context: &str, message: String) -> SnapshotError {
    SnapshotError::Parse { context: context.to_owned(), message }
}

pub fn read_snapshot_file(path: &Path) -> Result<Snapshot, SnapshotError> {
    read_snapshot(&mut BufReader::new(File::open(path)?))
}
