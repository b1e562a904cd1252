//! CSV and legacy VTK writers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::scheme::{State, StepRecord};

/// Streams step records to a CSV file, flushing after every row so a
/// crashed run leaves everything up to the failure on disk.
pub struct RunCsv {
    path: PathBuf,
    writer: csv::Writer<BufWriter<File>>,
}

impl RunCsv {
    pub fn create(path: &Path) -> Result<RunCsv> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = RunCsv { path: path.to_path_buf(), writer: csv::Writer::from_writer(BufWriter::new(file)) };
        out.row(StepRecord::CSV_HEADER.iter().map(|s| s.to_string()).collect())?;
        Ok(out)
    }

    pub fn push(&mut self, rec: &StepRecord) -> Result<()> {
        self.row(rec.csv_fields())
    }

    fn row(&mut self, fields: Vec<String>) -> Result<()> {
        self.writer.write_record(&fields).map_err(|e| csv_error(&self.path, e))?;
        self.writer.flush().map_err(|e| Error::io(&self.path, e))
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::InvalidArgument(format!("{}: {other:?}", path.display())),
    }
}

fn write_geometry(w: &mut impl Write, mesh: &Mesh, title: &str) -> std::io::Result<()> {
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{title}")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", mesh.num_vertices())?;
    for v in mesh.vertices() {
        writeln!(w, "{:.17e} {:.17e} 0", v[0], v[1])?;
    }
    let nt = mesh.num_triangles();
    writeln!(w, "CELLS {nt} {}", 4 * nt)?;
    for t in mesh.triangles() {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(w, "CELL_TYPES {nt}")?;
    for _ in 0..nt {
        // VTK_TRIANGLE
        writeln!(w, "5")?;
    }
    Ok(())
}

fn with_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

/// The mesh alone as a legacy ASCII unstructured grid.
pub fn write_mesh_vtk(path: &Path, mesh: &Mesh) -> Result<()> {
    with_file(path, |w| write_geometry(w, mesh, "chds mesh"))
}

/// A state as point data on the mesh vertices: scalars `phi`, `mu`, `xi`,
/// `p`, and the vertex values of the quadratic velocity as vector `u`.
pub fn write_state_vtk(path: &Path, state: &State) -> Result<()> {
    let mesh = state.phi.space().mesh();
    let nv = mesh.num_vertices();
    with_file(path, |w| {
        write_geometry(w, mesh, &format!("chds step {} time {:.17e}", state.step, state.time))?;
        writeln!(w, "POINT_DATA {nv}")?;
        for (name, f) in [("phi", &state.phi), ("mu", &state.mu), ("xi", &state.xi), ("p", &state.p)] {
            writeln!(w, "SCALARS {name} double 1")?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for c in &f.coeffs()[..nv] {
                writeln!(w, "{c:.17e}")?;
            }
        }
        // P2 numbering puts the vertex dofs first in each component block
        let stride = state.u.space().scalar_dof_count();
        let u = state.u.coeffs();
        writeln!(w, "VECTORS u double")?;
        for v in 0..nv {
            writeln!(w, "{:.17e} {:.17e} 0", u[v], u[stride + v])?;
        }
        Ok(())
    })
}
