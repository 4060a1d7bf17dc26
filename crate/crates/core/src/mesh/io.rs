//! Plain-text mesh format and legacy VTK export.
//!
//! ASCII layout: a header line `dim nv ne`, then `nv` lines of coordinates,
//! then `ne` lines of 0-based vertex indices.

use std::io::{BufRead, Write};

use super::Mesh;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub fn write_ascii<T: Real, W: Write>(mesh: &Mesh<T>, mut out: W) -> Result<()> {
    writeln!(out, "{} {} {}", mesh.dim(), mesh.num_vertices(), mesh.num_elements())?;
    for v in 0..mesh.num_vertices() {
        let line: Vec<String> = mesh.vertex(v).iter().map(|x| format!("{x}")).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    for e in 0..mesh.num_elements() {
        let line: Vec<String> = mesh.element(e).iter().map(|i| i.to_string()).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn read_ascii<T: Real, R: BufRead>(input: R) -> Result<Mesh<T>> {
    let mut lines = input
        .lines()
        .map(|l| l.map_err(Error::from))
        .filter(|l| !matches!(l, Ok(s) if s.trim().is_empty()));
    let header = lines.next().ok_or_else(|| Error::Parse("missing header".into()))??;
    let h: Vec<usize> = parse_all(&header)?;
    if h.len() != 3 {
        return Err(Error::Parse(format!("header must be `dim nv ne`, got `{header}`")));
    }
    let (dim, nv, ne) = (h[0], h[1], h[2]);
    let mut coords = Vec::with_capacity(nv * dim);
    for i in 0..nv {
        let line = lines
            .next()
            .ok_or_else(|| Error::Parse(format!("missing vertex line {i}")))??;
        let xs: Vec<f64> = parse_all(&line)?;
        if xs.len() != dim {
            return Err(Error::Parse(format!("vertex {i}: expected {dim} coordinates")));
        }
        coords.extend(xs.into_iter().map(T::lit));
    }
    let mut cells = Vec::with_capacity(ne * (dim + 1));
    for e in 0..ne {
        let line = lines
            .next()
            .ok_or_else(|| Error::Parse(format!("missing element line {e}")))??;
        let vs: Vec<usize> = parse_all(&line)?;
        if vs.len() != dim + 1 {
            return Err(Error::Parse(format!("element {e}: expected {} indices", dim + 1)));
        }
        cells.extend(vs);
    }
    Mesh::new(dim, coords, cells)
}

fn parse_all<V: std::str::FromStr>(line: &str) -> Result<Vec<V>> {
    line.split_whitespace()
        .map(|t| t.parse::<V>().map_err(|_| Error::Parse(format!("bad token `{t}`"))))
        .collect()
}

/// A named field attached to a VTK export.
pub enum VtkField<'a, T> {
    Point(&'a str, &'a [T]),
    Cell(&'a str, &'a [T]),
}

/// Legacy VTK unstructured grid (triangles: cell type 5, tetrahedra: 10).
pub fn write_vtk<T: Real, W: Write>(mesh: &Mesh<T>, fields: &[VtkField<'_, T>], mut out: W) -> Result<()> {
    let dim = mesh.dim();
    let np = dim + 1;
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "ocp-afem mesh")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", mesh.num_vertices())?;
    for v in 0..mesh.num_vertices() {
        let x = mesh.vertex(v);
        let z = if dim == 3 { x[2] } else { T::zero() };
        writeln!(out, "{} {} {}", x[0], x[1], z)?;
    }
    let ne = mesh.num_elements();
    writeln!(out, "CELLS {} {}", ne, ne * (np + 1))?;
    for e in 0..ne {
        let ids: Vec<String> = mesh.element(e).iter().map(|i| i.to_string()).collect();
        writeln!(out, "{} {}", np, ids.join(" "))?;
    }
    writeln!(out, "CELL_TYPES {ne}")?;
    let ty = if dim == 2 { 5 } else { 10 };
    for _ in 0..ne {
        writeln!(out, "{ty}")?;
    }

    let points: Vec<_> = fields
        .iter()
        .filter_map(|f| match f {
            VtkField::Point(n, v) => Some((n, v)),
            _ => None,
        })
        .collect();
    let cells: Vec<_> = fields
        .iter()
        .filter_map(|f| match f {
            VtkField::Cell(n, v) => Some((n, v)),
            _ => None,
        })
        .collect();
    if !points.is_empty() {
        writeln!(out, "POINT_DATA {}", mesh.num_vertices())?;
        for (name, vals) in points {
            write_scalars(&mut out, name, vals, mesh.num_vertices())?;
        }
    }
    if !cells.is_empty() {
        writeln!(out, "CELL_DATA {ne}")?;
        for (name, vals) in cells {
            write_scalars(&mut out, name, vals, ne)?;
        }
    }
    Ok(())
}

fn write_scalars<T: Real, W: Write>(out: &mut W, name: &str, vals: &[T], n: usize) -> Result<()> {
    if vals.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "field `{name}` has {} values, expected {n}",
            vals.len()
        )));
    }
    writeln!(out, "SCALARS {name} double 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for v in vals {
        writeln!(out, "{v}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_cube, build_lshape};

    #[test]
    fn ascii_round_trip() {
        let m: Mesh<f64> = build_lshape(1).unwrap();
        let mut buf = Vec::new();
        write_ascii(&m, &mut buf).unwrap();
        let back: Mesh<f64> = read_ascii(&buf[..]).unwrap();
        assert_eq!(back.coords(), m.coords());
        assert_eq!(back.cells(), m.cells());
        assert!(String::from_utf8(buf).unwrap().starts_with("2 21 24\n"));
    }

    #[test]
    fn ascii_rejects_short_element_line() {
        let text = "2 3 1\n0 0\n1 0\n0 1\n0 1\n";
        assert!(read_ascii::<f64, _>(text.as_bytes()).is_err());
    }

    #[test]
    fn vtk_has_cell_types_and_fields() {
        let m: Mesh<f64> = build_cube(0).unwrap();
        let cell = vec![1.0; 6];
        let mut buf = Vec::new();
        write_vtk(&m, &[VtkField::Cell("u", &cell)], &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.contains("CELL_TYPES 6\n10\n"));
        assert!(s.contains("SCALARS u double 1"));
    }
}
