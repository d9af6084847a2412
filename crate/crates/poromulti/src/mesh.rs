//! Triangular meshes on the unit square, coarse-node neighborhoods, and the
//! partition of unity used by the multiscale basis.
//!
//! Structured meshes split each grid square along the diagonal from its
//! lower-left to its upper-right corner, so every cell is a right triangle
//! and a mesh with resolution `n` has `(n+1)^2` nodes and `2 n^2` cells.

use crate::{Error, Result};
use std::fmt::Write as _;

/// Side of the unit square a boundary edge lies on.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum BoundaryTag {
    Left,
    Right,
    Top,
    Bottom,
}

impl BoundaryTag {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryTag::Left => "LEFT",
            BoundaryTag::Right => "RIGHT",
            BoundaryTag::Top => "TOP",
            BoundaryTag::Bottom => "BOTTOM",
        }
    }

    pub fn parse(s: &str) -> Option<BoundaryTag> {
        match s {
            "LEFT" => Some(BoundaryTag::Left),
            "RIGHT" => Some(BoundaryTag::Right),
            "TOP" => Some(BoundaryTag::Top),
            "BOTTOM" => Some(BoundaryTag::Bottom),
            _ => None,
        }
    }
}

/// Conforming triangle mesh. Cells are counter-clockwise node triples and
/// boundary edges carry a side tag.
#[derive(Clone, Debug)]
pub struct TriMesh {
    pub nodes: Vec<[f64; 2]>,
    pub cells: Vec<[usize; 3]>,
    pub boundary_edges: Vec<(usize, usize, BoundaryTag)>,
}

impl TriMesh {
    /// Uniform structured mesh of the unit square with `n` subdivisions per
    /// side. Rejects `n = 0`.
    pub fn structured(n: usize) -> Result<TriMesh> {
        if n == 0 {
            return Err(Error::Mesh("structured mesh needs n >= 1".into()));
        }
        let m = n + 1;
        let h = 1.0 / n as f64;
        let mut nodes = Vec::with_capacity(m * m);
        for iy in 0..m {
            for ix in 0..m {
                nodes.push([ix as f64 * h, iy as f64 * h]);
            }
        }
        let id = |ix: usize, iy: usize| iy * m + ix;
        let mut cells = Vec::with_capacity(2 * n * n);
        for iy in 0..n {
            for ix in 0..n {
                let v00 = id(ix, iy);
                let v10 = id(ix + 1, iy);
                let v01 = id(ix, iy + 1);
                let v11 = id(ix + 1, iy + 1);
                // diagonal v00-v11, both triangles counter-clockwise
                cells.push([v00, v10, v11]);
                cells.push([v00, v11, v01]);
            }
        }
        let mut boundary_edges = Vec::with_capacity(4 * n);
        for ix in 0..n {
            boundary_edges.push((id(ix, 0), id(ix + 1, 0), BoundaryTag::Bottom));
            boundary_edges.push((id(ix, n), id(ix + 1, n), BoundaryTag::Top));
        }
        for iy in 0..n {
            boundary_edges.push((id(0, iy), id(0, iy + 1), BoundaryTag::Left));
            boundary_edges.push((id(n, iy), id(n, iy + 1), BoundaryTag::Right));
        }
        Ok(TriMesh {
            nodes,
            cells,
            boundary_edges,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    /// Signed area is positive for counter-clockwise cells.
    pub fn cell_area(&self, c: usize) -> f64 {
        let [a, b, d] = self.cells[c];
        let pa = self.nodes[a];
        let pb = self.nodes[b];
        let pd = self.nodes[d];
        0.5 * ((pb[0] - pa[0]) * (pd[1] - pa[1]) - (pd[0] - pa[0]) * (pb[1] - pa[1]))
    }

    pub fn cell_centroid(&self, c: usize) -> [f64; 2] {
        let [a, b, d] = self.cells[c];
        [
            (self.nodes[a][0] + self.nodes[b][0] + self.nodes[d][0]) / 3.0,
            (self.nodes[a][1] + self.nodes[b][1] + self.nodes[d][1]) / 3.0,
        ]
    }

    /// Barycentric coordinates of `p` with respect to cell `c`.
    pub fn barycentric(&self, c: usize, p: [f64; 2]) -> [f64; 3] {
        let [a, b, d] = self.cells[c];
        let pa = self.nodes[a];
        let pb = self.nodes[b];
        let pd = self.nodes[d];
        let det = (pb[0] - pa[0]) * (pd[1] - pa[1]) - (pd[0] - pa[0]) * (pb[1] - pa[1]);
        let l1 = ((p[0] - pa[0]) * (pd[1] - pa[1]) - (pd[0] - pa[0]) * (p[1] - pa[1])) / det;
        let l2 = ((pb[0] - pa[0]) * (p[1] - pa[1]) - (p[0] - pa[0]) * (pb[1] - pa[1])) / det;
        [1.0 - l1 - l2, l1, l2]
    }

    /// First cell whose closure contains `p`, within `tol` in barycentric
    /// coordinates.
    pub fn locate(&self, p: [f64; 2], tol: f64) -> Option<usize> {
        (0..self.cells.len()).find(|&c| {
            let l = self.barycentric(c, p);
            l.iter().all(|&x| x >= -tol)
        })
    }

    /// Nodes lying on boundary edges with the given tag, sorted.
    pub fn boundary_nodes(&self, tag: BoundaryTag) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .boundary_edges
            .iter()
            .filter(|e| e.2 == tag)
            .flat_map(|e| [e.0, e.1])
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// All boundary nodes regardless of tag, sorted.
    pub fn all_boundary_nodes(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .boundary_edges
            .iter()
            .flat_map(|e| [e.0, e.1])
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Structural checks: index ranges, positive (counter-clockwise) areas,
    /// and boundary edges that are real edges of exactly one cell.
    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        for (c, cell) in self.cells.iter().enumerate() {
            if cell.iter().any(|&v| v >= n) {
                return Err(Error::Mesh(format!("cell {c} references a missing node")));
            }
            if self.cell_area(c) <= 0.0 {
                return Err(Error::Mesh(format!(
                    "cell {c} is degenerate or clockwise (area {})",
                    self.cell_area(c)
                )));
            }
        }
        let mut edge_count: std::collections::HashMap<(usize, usize), usize> =
            std::collections::HashMap::new();
        for cell in &self.cells {
            for k in 0..3 {
                let a = cell[k];
                let b = cell[(k + 1) % 3];
                let key = (a.min(b), a.max(b));
                *edge_count.entry(key).or_insert(0) += 1;
            }
        }
        for &(a, b, tag) in &self.boundary_edges {
            if a >= n || b >= n {
                return Err(Error::Mesh("boundary edge references a missing node".into()));
            }
            match edge_count.get(&(a.min(b), a.max(b))) {
                Some(1) => {}
                Some(_) => {
                    return Err(Error::Mesh(format!(
                        "boundary edge ({a},{b},{}) is interior",
                        tag.as_str()
                    )))
                }
                None => {
                    return Err(Error::Mesh(format!(
                        "boundary edge ({a},{b},{}) is not a mesh edge",
                        tag.as_str()
                    )))
                }
            }
        }
        Ok(())
    }

    /// Plain-text serialization; see [`TriMesh::parse`] for the format.
    pub fn format(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "nodes {} cells {} bedges {}",
            self.nodes.len(),
            self.cells.len(),
            self.boundary_edges.len()
        );
        for p in &self.nodes {
            let _ = writeln!(s, "{:.17e} {:.17e}", p[0], p[1]);
        }
        for c in &self.cells {
            let _ = writeln!(s, "{} {} {}", c[0], c[1], c[2]);
        }
        for &(a, b, tag) in &self.boundary_edges {
            let _ = writeln!(s, "{} {} {}", a, b, tag.as_str());
        }
        s
    }

    /// Parses the plain-text mesh format: a header line
    /// `nodes <N> cells <M> bedges <K>`, then N lines `x y`, M lines
    /// `i j k` (0-based, counter-clockwise), K lines `i j TAG` with TAG one
    /// of LEFT RIGHT TOP BOTTOM. Errors carry 1-based line numbers.
    pub fn parse(text: &str) -> Result<TriMesh> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::Mesh("empty mesh file".into()))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 6 || h[0] != "nodes" || h[2] != "cells" || h[4] != "bedges" {
            return Err(Error::Mesh(format!(
                "line 1: expected header 'nodes <N> cells <M> bedges <K>', got '{header}'"
            )));
        }
        let bad_count = |line: usize, what: &str| Error::Mesh(format!("line {line}: bad {what}"));
        let nn: usize = h[1].parse().map_err(|_| bad_count(1, "node count"))?;
        let nc: usize = h[3].parse().map_err(|_| bad_count(1, "cell count"))?;
        let nb: usize = h[5].parse().map_err(|_| bad_count(1, "edge count"))?;
        let mut nodes = Vec::with_capacity(nn);
        let mut cells = Vec::with_capacity(nc);
        let mut boundary_edges = Vec::with_capacity(nb);
        for _ in 0..nn {
            let (i, line) = lines
                .next()
                .ok_or_else(|| Error::Mesh("unexpected end of file in node block".into()))?;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 2 {
                return Err(bad_count(i + 1, "node line (want 'x y')"));
            }
            let x: f64 = f[0].parse().map_err(|_| bad_count(i + 1, "x coordinate"))?;
            let y: f64 = f[1].parse().map_err(|_| bad_count(i + 1, "y coordinate"))?;
            nodes.push([x, y]);
        }
        for _ in 0..nc {
            let (i, line) = lines
                .next()
                .ok_or_else(|| Error::Mesh("unexpected end of file in cell block".into()))?;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(bad_count(i + 1, "cell line (want 'i j k')"));
            }
            let mut c = [0usize; 3];
            for (k, t) in f.iter().enumerate() {
                c[k] = t.parse().map_err(|_| bad_count(i + 1, "cell index"))?;
            }
            cells.push(c);
        }
        for _ in 0..nb {
            let (i, line) = lines
                .next()
                .ok_or_else(|| Error::Mesh("unexpected end of file in edge block".into()))?;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(bad_count(i + 1, "edge line (want 'i j TAG')"));
            }
            let a: usize = f[0].parse().map_err(|_| bad_count(i + 1, "edge index"))?;
            let b: usize = f[1].parse().map_err(|_| bad_count(i + 1, "edge index"))?;
            let tag = BoundaryTag::parse(f[2])
                .ok_or_else(|| bad_count(i + 1, "edge tag (want LEFT RIGHT TOP BOTTOM)"))?;
            boundary_edges.push((a, b, tag));
        }
        let mesh = TriMesh {
            nodes,
            cells,
            boundary_edges,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn read(path: &std::path::Path) -> Result<TriMesh> {
        TriMesh::parse(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.format())?;
        Ok(())
    }
}

/// Neighborhood of one coarse node: the union of coarse cells sharing it,
/// with the fine entities it contains.
#[derive(Clone, Debug)]
pub struct Neighborhood {
    pub coarse_node: usize,
    pub coarse_cells: Vec<usize>,
    pub fine_cells: Vec<usize>,
    /// All fine nodes of the closure, sorted; the local index of a fine node
    /// is its position here.
    pub fine_nodes: Vec<usize>,
    /// Fine nodes on the neighborhood boundary, sorted.
    pub boundary_nodes: Vec<usize>,
    /// Fine nodes interior to the neighborhood, sorted.
    pub interior_nodes: Vec<usize>,
}

/// Nesting map between a coarse and a fine mesh.
#[derive(Clone, Debug)]
pub struct NeighborhoodMap {
    pub neighborhoods: Vec<Neighborhood>,
    /// Containing coarse cell per fine cell.
    pub fine_cell_to_coarse: Vec<usize>,
}

const NEST_TOL: f64 = 1e-12;

/// Builds neighborhoods for every coarse node. The fine mesh must be nested
/// in the coarse one: every fine cell must be contained in a single coarse
/// cell, checked in barycentric coordinates to 1e-12.
pub fn build_neighborhoods(coarse: &TriMesh, fine: &TriMesh) -> Result<NeighborhoodMap> {
    let mut fine_cell_to_coarse = Vec::with_capacity(fine.n_cells());
    for fc in 0..fine.n_cells() {
        let centroid = fine.cell_centroid(fc);
        let host = coarse.locate(centroid, NEST_TOL).ok_or_else(|| {
            Error::Mesh(format!(
                "containment failure: fine cell {fc} centroid ({:.6}, {:.6}) lies in no coarse cell",
                centroid[0], centroid[1]
            ))
        })?;
        for &v in &fine.cells[fc] {
            let l = fine_node_bary(coarse, host, fine.nodes[v]);
            if l.iter().any(|&x| !(-NEST_TOL..=1.0 + NEST_TOL).contains(&x)) {
                return Err(Error::Mesh(format!(
                    "containment failure: fine cell {fc} straddles coarse cell {host} \
                     (node {v} barycentric {:?})",
                    l
                )));
            }
        }
        fine_cell_to_coarse.push(host);
    }

    let mut cells_of_coarse_node: Vec<Vec<usize>> = vec![Vec::new(); coarse.n_nodes()];
    for (cc, cell) in coarse.cells.iter().enumerate() {
        for &v in cell {
            cells_of_coarse_node[v].push(cc);
        }
    }
    let mut fine_cells_of_coarse_cell: Vec<Vec<usize>> = vec![Vec::new(); coarse.n_cells()];
    for (fc, &cc) in fine_cell_to_coarse.iter().enumerate() {
        fine_cells_of_coarse_cell[cc].push(fc);
    }

    let mut neighborhoods = Vec::with_capacity(coarse.n_nodes());
    for i in 0..coarse.n_nodes() {
        let coarse_cells = cells_of_coarse_node[i].clone();
        let mut fine_cells: Vec<usize> = coarse_cells
            .iter()
            .flat_map(|&cc| fine_cells_of_coarse_cell[cc].iter().copied())
            .collect();
        fine_cells.sort_unstable();
        if fine_cells.is_empty() {
            return Err(Error::Mesh(format!(
                "coarse node {i} has an empty neighborhood"
            )));
        }

        let mut fine_nodes: Vec<usize> = fine_cells
            .iter()
            .flat_map(|&fc| fine.cells[fc])
            .collect();
        fine_nodes.sort_unstable();
        fine_nodes.dedup();

        // Edges used by exactly one neighborhood cell form its boundary.
        let mut edge_count: std::collections::HashMap<(usize, usize), usize> =
            std::collections::HashMap::new();
        for &fc in &fine_cells {
            let cell = fine.cells[fc];
            for k in 0..3 {
                let a = cell[k];
                let b = cell[(k + 1) % 3];
                *edge_count.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        let mut boundary_nodes: Vec<usize> = edge_count
            .iter()
            .filter(|&(_, &c)| c == 1)
            .flat_map(|(&(a, b), _)| [a, b])
            .collect();
        boundary_nodes.sort_unstable();
        boundary_nodes.dedup();
        let interior_nodes: Vec<usize> = fine_nodes
            .iter()
            .copied()
            .filter(|v| boundary_nodes.binary_search(v).is_err())
            .collect();

        neighborhoods.push(Neighborhood {
            coarse_node: i,
            coarse_cells,
            fine_cells,
            fine_nodes,
            boundary_nodes,
            interior_nodes,
        });
    }

    // Every fine cell sits in exactly the 3 neighborhoods of its coarse
    // cell's vertices.
    let total: usize = neighborhoods.iter().map(|n| n.fine_cells.len()).sum();
    debug_assert_eq!(total, 3 * fine.n_cells());

    Ok(NeighborhoodMap {
        neighborhoods,
        fine_cell_to_coarse,
    })
}

fn fine_node_bary(coarse: &TriMesh, cell: usize, p: [f64; 2]) -> [f64; 3] {
    coarse.barycentric(cell, p)
}

impl Neighborhood {
    /// Local index of a global fine node, if it belongs to the closure.
    pub fn local_of(&self, fine_node: usize) -> Option<usize> {
        self.fine_nodes.binary_search(&fine_node).ok()
    }
}

/// Values of the coarse hat functions at the fine nodes of each
/// neighborhood. `values[i]` is aligned with `neighborhoods[i].fine_nodes`.
#[derive(Clone, Debug)]
pub struct PoUTable {
    pub values: Vec<Vec<f64>>,
}

/// Evaluates the coarse P1 hat of every coarse node at the fine nodes of its
/// neighborhood. The hats form a partition of unity over the fine nodes.
pub fn build_pou(coarse: &TriMesh, fine: &TriMesh, map: &NeighborhoodMap) -> Result<PoUTable> {
    let mut values = Vec::with_capacity(map.neighborhoods.len());
    for nbh in &map.neighborhoods {
        let i = nbh.coarse_node;
        let mut vals = vec![0.0; nbh.fine_nodes.len()];
        for (l, &g) in nbh.fine_nodes.iter().enumerate() {
            let p = fine.nodes[g];
            let mut found = None;
            for &cc in &nbh.coarse_cells {
                let lam = coarse.barycentric(cc, p);
                if lam.iter().all(|&x| x >= -NEST_TOL) {
                    let k = coarse.cells[cc]
                        .iter()
                        .position(|&v| v == i)
                        .expect("neighborhood cell must contain its coarse node");
                    found = Some(lam[k].clamp(0.0, 1.0));
                    break;
                }
            }
            vals[l] = found.ok_or_else(|| {
                Error::Mesh(format!(
                    "fine node {g} of neighborhood {i} lies in none of its coarse cells"
                ))
            })?;
        }
        values.push(vals);
    }
    Ok(PoUTable { values })
}

impl PoUTable {
    /// Sum of all hats at every fine node; equals 1 for a valid partition.
    pub fn sums(&self, map: &NeighborhoodMap, n_fine_nodes: usize) -> Vec<f64> {
        let mut s = vec![0.0; n_fine_nodes];
        for (nbh, vals) in map.neighborhoods.iter().zip(&self.values) {
            for (&g, &v) in nbh.fine_nodes.iter().zip(vals) {
                s[g] += v;
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn structured_counts() {
        let m1 = TriMesh::structured(1).unwrap();
        assert_eq!(m1.n_nodes(), 4);
        assert_eq!(m1.n_cells(), 2);
        let m5 = TriMesh::structured(5).unwrap();
        assert_eq!(m5.n_nodes(), 36);
        assert_eq!(m5.n_cells(), 50);
        let m10 = TriMesh::structured(10).unwrap();
        assert_eq!(m10.n_nodes(), 121);
        assert_eq!(m10.n_cells(), 200);
        let m60 = TriMesh::structured(60).unwrap();
        assert_eq!(m60.n_nodes(), 3721);
        assert_eq!(m60.n_cells(), 7200);
    }

    #[test]
    fn structured_rejects_zero() {
        assert!(TriMesh::structured(0).is_err());
    }

    #[test]
    fn areas_positive_and_sum_to_one() {
        for n in [1usize, 3, 7, 12] {
            let m = TriMesh::structured(n).unwrap();
            let mut total = 0.0;
            for c in 0..m.n_cells() {
                let a = m.cell_area(c);
                assert!(a > 0.0, "cell {c} of n={n} not counter-clockwise");
                total += a;
            }
            assert!((total - 1.0).abs() < 1e-12, "area sum {total} for n={n}");
        }
    }

    #[test]
    fn structured_validates() {
        for n in [1usize, 4, 9] {
            TriMesh::structured(n).unwrap().validate().unwrap();
        }
    }

    #[test]
    fn boundary_edges_tagged_per_side() {
        let m = TriMesh::structured(4).unwrap();
        assert_eq!(m.boundary_edges.len(), 16);
        for tag in [
            BoundaryTag::Left,
            BoundaryTag::Right,
            BoundaryTag::Top,
            BoundaryTag::Bottom,
        ] {
            let nodes = m.boundary_nodes(tag);
            assert_eq!(nodes.len(), 5, "{} node count", tag.as_str());
        }
        // corner membership: (0,0) is both LEFT and BOTTOM
        assert!(m.boundary_nodes(BoundaryTag::Left).contains(&0));
        assert!(m.boundary_nodes(BoundaryTag::Bottom).contains(&0));
    }

    #[test]
    fn neighborhood_cell_counts_by_node_kind() {
        let coarse = TriMesh::structured(5).unwrap();
        let fine = TriMesh::structured(10).unwrap();
        let map = build_neighborhoods(&coarse, &fine).unwrap();
        // interior node of the 6x6 node grid touches 6 triangles
        let interior = 2 * 6 + 2; // node (2,2) in row-major order
        assert_eq!(map.neighborhoods[interior].coarse_cells.len(), 6);
        // corners: 2 on the diagonal ends, 1 off-diagonal
        assert_eq!(map.neighborhoods[0].coarse_cells.len(), 2); // (0,0)
        assert_eq!(map.neighborhoods[35].coarse_cells.len(), 2); // (5,5)
        assert_eq!(map.neighborhoods[5].coarse_cells.len(), 1); // (5,0)
        assert_eq!(map.neighborhoods[30].coarse_cells.len(), 1); // (0,5)
        // edge (non-corner) boundary node touches 3 triangles
        assert_eq!(map.neighborhoods[2].coarse_cells.len(), 3);
    }

    #[test]
    fn every_fine_cell_in_three_neighborhoods() {
        let coarse = TriMesh::structured(3).unwrap();
        let fine = TriMesh::structured(9).unwrap();
        let map = build_neighborhoods(&coarse, &fine).unwrap();
        let mut count = vec![0usize; fine.n_cells()];
        for nbh in &map.neighborhoods {
            for &fc in &nbh.fine_cells {
                count[fc] += 1;
            }
        }
        assert!(count.iter().all(|&c| c == 3));
    }

    #[test]
    fn neighborhood_node_partition() {
        let coarse = TriMesh::structured(5).unwrap();
        let fine = TriMesh::structured(10).unwrap();
        let map = build_neighborhoods(&coarse, &fine).unwrap();
        for nbh in &map.neighborhoods {
            assert_eq!(
                nbh.interior_nodes.len() + nbh.boundary_nodes.len(),
                nbh.fine_nodes.len()
            );
            for &b in &nbh.boundary_nodes {
                assert!(nbh.fine_nodes.binary_search(&b).is_ok());
            }
        }
        // interior coarse node, refinement ratio 2: hexagon with 6 coarse
        // triangles, each split into 4 fine cells
        let interior = 2 * 6 + 2;
        let nbh = &map.neighborhoods[interior];
        assert_eq!(nbh.fine_cells.len(), 24);
        assert_eq!(nbh.boundary_nodes.len(), 12);
        assert_eq!(nbh.fine_nodes.len(), 19);
        assert_eq!(nbh.interior_nodes.len(), 7);
    }

    #[test]
    fn non_nested_pair_rejected() {
        let coarse = TriMesh::structured(3).unwrap();
        let fine = TriMesh::structured(10).unwrap();
        let err = build_neighborhoods(&coarse, &fine).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("containment failure"), "got: {msg}");
    }

    #[test]
    fn pou_sums_to_one() {
        let coarse = TriMesh::structured(5).unwrap();
        let fine = TriMesh::structured(20).unwrap();
        let map = build_neighborhoods(&coarse, &fine).unwrap();
        let pou = build_pou(&coarse, &fine, &map).unwrap();
        let sums = pou.sums(&map, fine.n_nodes());
        for (g, s) in sums.iter().enumerate() {
            assert!((s - 1.0).abs() < 1e-12, "node {g}: sum {s}");
        }
    }

    #[test]
    fn pou_hat_values() {
        let coarse = TriMesh::structured(2).unwrap();
        let fine = TriMesh::structured(4).unwrap();
        let map = build_neighborhoods(&coarse, &fine).unwrap();
        let pou = build_pou(&coarse, &fine, &map).unwrap();
        // center coarse node (0.5, 0.5) is fine node 12 in the 5x5 grid
        let center = 4; // coarse node id in the 3x3 coarse grid
        let nbh = &map.neighborhoods[center];
        let l = nbh.local_of(12).unwrap();
        assert!((pou.values[center][l] - 1.0).abs() < 1e-15);
        // midpoint of the coarse edge from (0.5,0.5) to (1,0.5) is fine
        // node (3, 2) = 13: hat value 0.5
        let l = nbh.local_of(13).unwrap();
        assert!((pou.values[center][l] - 0.5).abs() < 1e-15);
        // hat vanishes on the neighborhood boundary
        for &b in &nbh.boundary_nodes {
            let l = nbh.local_of(b).unwrap();
            assert!(pou.values[center][l].abs() < 1e-15);
        }
    }

    #[test]
    fn mesh_text_roundtrip() {
        let m = TriMesh::structured(3).unwrap();
        let text = m.format();
        let back = TriMesh::parse(&text).unwrap();
        assert_eq!(m.nodes.len(), back.nodes.len());
        assert_eq!(m.cells, back.cells);
        assert_eq!(m.boundary_edges.len(), back.boundary_edges.len());
        for (a, b) in m.nodes.iter().zip(&back.nodes) {
            assert_eq!(a, b, "node coordinates must round-trip exactly");
        }
    }

    #[test]
    fn malformed_mesh_reports_line() {
        let m = TriMesh::structured(2).unwrap();
        let mut lines: Vec<String> = m.format().lines().map(|s| s.to_string()).collect();
        lines[3] = "0.5 oops".into();
        let err = TriMesh::parse(&lines.join("\n")).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("line 4"), "got: {msg}");
    }

    #[test]
    fn locate_finds_containing_cell() {
        let m = TriMesh::structured(4).unwrap();
        let c = m.locate([0.13, 0.72], 1e-12).unwrap();
        let l = m.barycentric(c, [0.13, 0.72]);
        assert!(l.iter().all(|&x| x >= -1e-12));
        assert!(m.locate([1.5, 0.5], 1e-12).is_none());
    }
}
