//! Solution state files and legacy VTK export.
//!
//! A state file is the mesh serialization followed by a `fields 3` block
//! holding `p ux uy` per node, so one file reproduces a full snapshot.
//! The VTK writer emits the legacy ASCII unstructured-grid dialect with a
//! `pressure` scalar array and a `displacement` vector array, which is
//! what desktop viewers expect.

use crate::mesh::TriMesh;
use crate::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

/// Serializes one solution snapshot together with its mesh.
pub fn format_state(mesh: &TriMesh, p: &[f64], u: &[f64]) -> String {
    assert_eq!(p.len(), mesh.n_nodes(), "pressure length");
    assert_eq!(u.len(), 2 * mesh.n_nodes(), "displacement length");
    let mut s = mesh.format();
    let _ = writeln!(s, "fields 3");
    for i in 0..mesh.n_nodes() {
        let _ = writeln!(s, "{:.17e} {:.17e} {:.17e}", p[i], u[2 * i], u[2 * i + 1]);
    }
    s
}

/// Parses a state file back into mesh, pressure and displacement.
pub fn parse_state(text: &str) -> Result<(TriMesh, Vec<f64>, Vec<f64>)> {
    let header = text
        .lines()
        .next()
        .ok_or_else(|| Error::Mesh("empty state file".into()))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 6 || h[0] != "nodes" {
        return Err(Error::Mesh(format!(
            "line 1: expected a mesh header, got '{header}'"
        )));
    }
    let count = |s: &str| -> Result<usize> {
        s.parse()
            .map_err(|_| Error::Mesh(format!("line 1: bad count '{s}'")))
    };
    let nn = count(h[1])?;
    let mesh_lines = 1 + nn + count(h[3])? + count(h[5])?;
    let mut lines = text.lines();
    let mesh_text: String = lines
        .by_ref()
        .take(mesh_lines)
        .flat_map(|l| [l, "\n"])
        .collect();
    let mesh = TriMesh::parse(&mesh_text)?;
    let tag_line = mesh_lines + 1;
    match lines.next() {
        Some(l) if l.trim() == "fields 3" => {}
        Some(l) => {
            return Err(Error::Mesh(format!(
                "line {tag_line}: expected 'fields 3', got '{l}'"
            )))
        }
        None => return Err(Error::Mesh("state file has no fields block".into())),
    }
    let mut p = Vec::with_capacity(nn);
    let mut u = Vec::with_capacity(2 * nn);
    for k in 0..nn {
        let line_no = tag_line + 1 + k;
        let line = lines.next().ok_or_else(|| {
            Error::Mesh(format!("line {line_no}: missing field values for node {k}"))
        })?;
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(Error::Mesh(format!(
                "line {line_no}: expected 'p ux uy', got '{line}'"
            )));
        }
        let mut vals = [0.0; 3];
        for (slot, tok) in vals.iter_mut().zip(&f) {
            *slot = tok
                .parse()
                .map_err(|_| Error::Mesh(format!("line {line_no}: bad number '{tok}'")))?;
        }
        p.push(vals[0]);
        u.push(vals[1]);
        u.push(vals[2]);
    }
    if lines.any(|l| !l.trim().is_empty()) {
        return Err(Error::Mesh("trailing content after the fields block".into()));
    }
    Ok((mesh, p, u))
}

pub fn write_state(mesh: &TriMesh, p: &[f64], u: &[f64], path: &Path) -> Result<()> {
    std::fs::write(path, format_state(mesh, p, u))?;
    Ok(())
}

pub fn read_state(path: &Path) -> Result<(TriMesh, Vec<f64>, Vec<f64>)> {
    parse_state(&std::fs::read_to_string(path)?)
}

/// Legacy ASCII unstructured-grid text for one snapshot.
pub fn format_vtk(mesh: &TriMesh, p: &[f64], u: &[f64]) -> String {
    assert_eq!(p.len(), mesh.n_nodes(), "pressure length");
    assert_eq!(u.len(), 2 * mesh.n_nodes(), "displacement length");
    let n = mesh.n_nodes();
    let m = mesh.n_cells();
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\n");
    s.push_str("poromulti state\n");
    s.push_str("ASCII\n");
    s.push_str("DATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {n} double");
    for pnt in &mesh.nodes {
        let _ = writeln!(s, "{:.12e} {:.12e} 0.0", pnt[0], pnt[1]);
    }
    let _ = writeln!(s, "CELLS {m} {}", 4 * m);
    for c in &mesh.cells {
        let _ = writeln!(s, "3 {} {} {}", c[0], c[1], c[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {m}");
    for _ in 0..m {
        s.push_str("5\n");
    }
    let _ = writeln!(s, "POINT_DATA {n}");
    s.push_str("SCALARS pressure double 1\n");
    s.push_str("LOOKUP_TABLE default\n");
    for v in p {
        let _ = writeln!(s, "{v:.12e}");
    }
    s.push_str("VECTORS displacement double\n");
    for i in 0..n {
        let _ = writeln!(s, "{:.12e} {:.12e} 0.0", u[2 * i], u[2 * i + 1]);
    }
    s
}

pub fn export_vtk(mesh: &TriMesh, p: &[f64], u: &[f64], path: &Path) -> Result<()> {
    std::fs::write(path, format_vtk(mesh, p, u))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> (TriMesh, Vec<f64>, Vec<f64>) {
        let mesh = TriMesh::structured(4).unwrap();
        let p: Vec<f64> = mesh.nodes.iter().map(|n| n[0] + 2.0 * n[1]).collect();
        let u: Vec<f64> = mesh
            .nodes
            .iter()
            .flat_map(|n| [n[0] * n[1], n[0] - n[1]])
            .collect();
        (mesh, p, u)
    }

    #[test]
    fn state_round_trip_is_exact() {
        let (mesh, p, u) = sample();
        let text = format_state(&mesh, &p, &u);
        let (m2, p2, u2) = parse_state(&text).unwrap();
        assert_eq!(m2.nodes, mesh.nodes);
        assert_eq!(m2.cells, mesh.cells);
        assert_eq!(m2.boundary_edges, mesh.boundary_edges);
        // %.17e prints f64 exactly, so the round trip is bitwise.
        assert_eq!(p2, p);
        assert_eq!(u2, u);
    }

    #[test]
    fn state_parser_rejects_malformed_input() {
        let (mesh, p, u) = sample();
        let text = format_state(&mesh, &p, &u);

        let broken = text.replace("fields 3", "fields 2");
        let err = parse_state(&broken).unwrap_err();
        assert!(err.to_string().contains("fields 3"), "{err}");

        let mut truncated: Vec<&str> = text.lines().collect();
        truncated.pop();
        let err = parse_state(&truncated.join("\n")).unwrap_err();
        assert!(err.to_string().contains("missing field values"), "{err}");

        let trailing = format!("{text}1.0 2.0\n");
        let err = parse_state(&trailing).unwrap_err();
        assert!(err.to_string().contains("trailing"), "{err}");
    }

    /// Minimal independent reader for the legacy VTK dialect: returns
    /// (points, cells, pressure, displacement) parsed purely from the text.
    fn read_vtk(
        text: &str,
    ) -> (
        Vec<[f64; 3]>,
        Vec<Vec<usize>>,
        Vec<f64>,
        Vec<[f64; 3]>,
    ) {
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("# vtk DataFile"));
        lines.next();
        assert_eq!(lines.next().unwrap(), "ASCII");
        assert_eq!(lines.next().unwrap(), "DATASET UNSTRUCTURED_GRID");

        let head: Vec<String> = lines
            .next()
            .unwrap()
            .split_whitespace()
            .map(str::to_string)
            .collect();
        assert_eq!(head[0], "POINTS");
        let n: usize = head[1].parse().unwrap();
        let mut points = Vec::new();
        for _ in 0..n {
            let c: Vec<f64> = lines
                .next()
                .unwrap()
                .split_whitespace()
                .map(|t| t.parse().unwrap())
                .collect();
            points.push([c[0], c[1], c[2]]);
        }

        let head: Vec<String> = lines
            .next()
            .unwrap()
            .split_whitespace()
            .map(str::to_string)
            .collect();
        assert_eq!(head[0], "CELLS");
        let m: usize = head[1].parse().unwrap();
        let total: usize = head[2].parse().unwrap();
        let mut cells = Vec::new();
        let mut consumed = 0;
        for _ in 0..m {
            let ix: Vec<usize> = lines
                .next()
                .unwrap()
                .split_whitespace()
                .map(|t| t.parse().unwrap())
                .collect();
            assert_eq!(ix[0], ix.len() - 1);
            consumed += ix.len();
            cells.push(ix[1..].to_vec());
        }
        assert_eq!(consumed, total);

        assert_eq!(lines.next().unwrap(), format!("CELL_TYPES {m}"));
        for _ in 0..m {
            assert_eq!(lines.next().unwrap(), "5");
        }

        assert_eq!(lines.next().unwrap(), format!("POINT_DATA {n}"));
        assert_eq!(lines.next().unwrap(), "SCALARS pressure double 1");
        assert_eq!(lines.next().unwrap(), "LOOKUP_TABLE default");
        let pressure: Vec<f64> = (0..n)
            .map(|_| lines.next().unwrap().trim().parse().unwrap())
            .collect();

        assert_eq!(lines.next().unwrap(), "VECTORS displacement double");
        let disp: Vec<[f64; 3]> = (0..n)
            .map(|_| {
                let c: Vec<f64> = lines
                    .next()
                    .unwrap()
                    .split_whitespace()
                    .map(|t| t.parse().unwrap())
                    .collect();
                [c[0], c[1], c[2]]
            })
            .collect();
        (points, cells, pressure, disp)
    }

    #[test]
    fn two_cell_mesh_exports_four_points_two_cells() {
        let mesh = TriMesh::structured(1).unwrap();
        let p = vec![0.0, 1.0, 2.0, 3.0];
        let u: Vec<f64> = (0..8).map(|i| i as f64 / 10.0).collect();
        let (points, cells, pressure, _) = read_vtk(&format_vtk(&mesh, &p, &u));
        assert_eq!(points.len(), 4);
        assert_eq!(cells.len(), 2);
        assert_eq!(pressure.len(), mesh.n_nodes());
        assert!(cells.iter().all(|c| c.len() == 3));
    }

    #[test]
    fn vtk_round_trip_preserves_values_to_text_precision() {
        let (mesh, p, u) = sample();
        let (points, cells, pressure, disp) = read_vtk(&format_vtk(&mesh, &p, &u));
        for (got, want) in points.iter().zip(&mesh.nodes) {
            assert!((got[0] - want[0]).abs() <= 1e-12);
            assert!((got[1] - want[1]).abs() <= 1e-12);
            assert_eq!(got[2], 0.0);
        }
        for (got, want) in cells.iter().zip(&mesh.cells) {
            assert_eq!(got.as_slice(), want.as_slice());
        }
        for (got, want) in pressure.iter().zip(&p) {
            assert!((got - want).abs() <= 1e-12 * (1.0 + want.abs()));
        }
        for (i, got) in disp.iter().enumerate() {
            assert!((got[0] - u[2 * i]).abs() <= 1e-12);
            assert!((got[1] - u[2 * i + 1]).abs() <= 1e-12);
            assert_eq!(got[2], 0.0);
        }
    }
}
