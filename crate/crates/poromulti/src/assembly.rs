//! P1 finite-element assembly on triangle meshes: sparse matrix container,
//! scalar and vector element matrices with per-cell coefficients, the
//! pressure-displacement coupling blocks, and Dirichlet elimination.
//!
//! All element integrals use quadrature that is exact for the P1 forms.

use crate::mesh::{BoundaryTag, TriMesh};
use crate::{Error, Result};

/// Compressed-row sparse matrix. Column indices are sorted within each row
/// and entries that cancel to exactly zero are not stored.
#[derive(Clone, Debug)]
pub struct SparseMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
    /// Set by constructors that guarantee symmetry of the assembled form.
    pub symmetric: bool,
}

impl SparseMatrix {
    /// Builds from unordered triplets; duplicate entries are summed and
    /// exact zeros dropped.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &mut Vec<(usize, usize, f64)>,
        symmetric: bool,
    ) -> SparseMatrix {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut it = triplets.iter().peekable();
        while let Some(&(r, c, v)) = it.next() {
            debug_assert!(r < n_rows && c < n_cols);
            let mut sum = v;
            while let Some(&&(r2, c2, v2)) = it.peek() {
                if r2 == r && c2 == c {
                    sum += v2;
                    it.next();
                } else {
                    break;
                }
            }
            if sum != 0.0 {
                row_ptr[r + 1] += 1;
                col_idx.push(c);
                values.push(sum);
            }
        }
        for r in 0..n_rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        SparseMatrix {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
            symmetric,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let lo = self.row_ptr[r];
        let hi = self.row_ptr[r + 1];
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(y.len(), self.n_rows);
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            let mut s = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                s += v * x[*c];
            }
            y[r] = s;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows];
        self.matvec(x, &mut y);
        y
    }

    /// Quadratic form x' A y.
    pub fn quad_form(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut s = 0.0;
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            let mut row = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                row += v * y[*c];
            }
            s += x[r] * row;
        }
        s
    }

    /// Largest |A[i][j] - A[j][i]|; zero for a symmetric matrix.
    pub fn max_asymmetry(&self) -> f64 {
        let mut m: f64 = 0.0;
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                m = m.max((v - self.get(*c, r)).abs());
            }
        }
        m
    }

    /// a*self + b*other, merging sparsity patterns.
    pub fn add_scaled(&self, a: f64, other: &SparseMatrix, b: f64) -> SparseMatrix {
        assert_eq!(self.n_rows, other.n_rows);
        assert_eq!(self.n_cols, other.n_cols);
        let mut trip = Vec::with_capacity(self.nnz() + other.nnz());
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                trip.push((r, *c, a * v));
            }
            let (cols, vals) = other.row(r);
            for (c, v) in cols.iter().zip(vals) {
                trip.push((r, *c, b * v));
            }
        }
        SparseMatrix::from_triplets(
            self.n_rows,
            self.n_cols,
            &mut trip,
            self.symmetric && other.symmetric,
        )
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut d = nalgebra::DMatrix::zeros(self.n_rows, self.n_cols);
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                d[(r, *c)] = *v;
            }
        }
        d
    }
}

/// Degrees of freedom on one fine mesh: pressure dof = node index,
/// displacement dofs interleaved x then y per node. The coupled system
/// stacks the displacement block before the pressure block.
#[derive(Clone, Copy, Debug)]
pub struct DofMap {
    pub n_nodes: usize,
}

impl DofMap {
    pub fn new(mesh: &TriMesh) -> DofMap {
        DofMap {
            n_nodes: mesh.n_nodes(),
        }
    }

    pub fn n_pressure(&self) -> usize {
        self.n_nodes
    }

    pub fn n_displacement(&self) -> usize {
        2 * self.n_nodes
    }

    pub fn n_coupled(&self) -> usize {
        3 * self.n_nodes
    }

    /// x-displacement dof of a node within the displacement block.
    pub fn ux(&self, node: usize) -> usize {
        2 * node
    }

    pub fn uy(&self, node: usize) -> usize {
        2 * node + 1
    }

    /// Coupled index of a displacement dof.
    pub fn coupled_u(&self, udof: usize) -> usize {
        udof
    }

    /// Coupled index of a pressure dof.
    pub fn coupled_p(&self, node: usize) -> usize {
        2 * self.n_nodes + node
    }
}

/// P1 gradients and area of a triangle: returns (area, dphi/dx, dphi/dy).
pub fn cell_gradients(pts: [[f64; 2]; 3]) -> (f64, [f64; 3], [f64; 3]) {
    let [a, b, c] = pts;
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    let area = 0.5 * det;
    let gx = [(b[1] - c[1]) / det, (c[1] - a[1]) / det, (a[1] - b[1]) / det];
    let gy = [(c[0] - b[0]) / det, (a[0] - c[0]) / det, (b[0] - a[0]) / det];
    (area, gx, gy)
}

/// Local diffusion stiffness with unit coefficient.
pub fn local_stiffness(pts: [[f64; 2]; 3]) -> [[f64; 3]; 3] {
    let (area, gx, gy) = cell_gradients(pts);
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = area * (gx[i] * gx[j] + gy[i] * gy[j]);
        }
    }
    k
}

/// Local mass matrix area/12 * [[2,1,1],[1,2,1],[1,1,2]].
pub fn local_mass(area: f64) -> [[f64; 3]; 3] {
    let d = area / 6.0;
    let o = area / 12.0;
    [[d, o, o], [o, d, o], [o, o, d]]
}

/// Scalar stiffness with per-cell coefficient: integral k grad p . grad q.
pub fn pressure_stiffness(mesh: &TriMesh, k_cell: &[f64]) -> SparseMatrix {
    let n = mesh.n_nodes();
    let mut trip = Vec::with_capacity(9 * mesh.n_cells());
    for (c, cell) in mesh.cells.iter().enumerate() {
        let pts = cell.map(|v| mesh.nodes[v]);
        let k = local_stiffness(pts);
        for i in 0..3 {
            for j in 0..3 {
                trip.push((cell[i], cell[j], k_cell[c] * k[i][j]));
            }
        }
    }
    SparseMatrix::from_triplets(n, n, &mut trip, true)
}

/// Scalar mass with per-cell weight: integral w p q.
pub fn weighted_mass(mesh: &TriMesh, w_cell: &[f64]) -> SparseMatrix {
    let n = mesh.n_nodes();
    let mut trip = Vec::with_capacity(9 * mesh.n_cells());
    for (c, cell) in mesh.cells.iter().enumerate() {
        let m = local_mass(mesh.cell_area(c));
        for i in 0..3 {
            for j in 0..3 {
                trip.push((cell[i], cell[j], w_cell[c] * m[i][j]));
            }
        }
    }
    SparseMatrix::from_triplets(n, n, &mut trip, true)
}

/// Vector mass with per-cell weight: integral w u . v on the interleaved
/// displacement dofs.
pub fn vector_mass(mesh: &TriMesh, w_cell: &[f64]) -> SparseMatrix {
    let n = 2 * mesh.n_nodes();
    let mut trip = Vec::with_capacity(18 * mesh.n_cells());
    for (c, cell) in mesh.cells.iter().enumerate() {
        let m = local_mass(mesh.cell_area(c));
        for i in 0..3 {
            for j in 0..3 {
                let v = w_cell[c] * m[i][j];
                trip.push((2 * cell[i], 2 * cell[j], v));
                trip.push((2 * cell[i] + 1, 2 * cell[j] + 1, v));
            }
        }
    }
    SparseMatrix::from_triplets(n, n, &mut trip, true)
}

/// Local plane-strain elasticity block on interleaved vertex dofs
/// (2i, 2i+1): integral (2 mu eps(u):eps(v) + lambda div u div v).
pub fn local_elasticity(pts: [[f64; 2]; 3], la: f64, mu: f64) -> [[f64; 6]; 6] {
    let (area, gx, gy) = cell_gradients(pts);
    let mut k = [[0.0; 6]; 6];
    // Voigt elasticity matrix [[la+2mu, la, 0], [la, la+2mu, 0], [0, 0, mu]]
    for i in 0..3 {
        for j in 0..3 {
            let bxi = gx[i];
            let byi = gy[i];
            let bxj = gx[j];
            let byj = gy[j];
            k[2 * i][2 * j] = area * ((la + 2.0 * mu) * bxi * bxj + mu * byi * byj);
            k[2 * i + 1][2 * j + 1] = area * ((la + 2.0 * mu) * byi * byj + mu * bxi * bxj);
            k[2 * i][2 * j + 1] = area * (la * bxi * byj + mu * byi * bxj);
            k[2 * i + 1][2 * j] = area * (la * byi * bxj + mu * bxi * byj);
        }
    }
    k
}

/// Plane-strain elasticity stiffness with per-cell Lame coefficients.
pub fn elasticity_stiffness(mesh: &TriMesh, lambda_cell: &[f64], mu_cell: &[f64]) -> SparseMatrix {
    let n = 2 * mesh.n_nodes();
    let mut trip = Vec::with_capacity(36 * mesh.n_cells());
    for (c, cell) in mesh.cells.iter().enumerate() {
        let pts = cell.map(|v| mesh.nodes[v]);
        let k = local_elasticity(pts, lambda_cell[c], mu_cell[c]);
        for i in 0..3 {
            for j in 0..3 {
                for (cx, cy) in [(0, 0), (1, 1), (0, 1), (1, 0)] {
                    trip.push((2 * cell[i] + cx, 2 * cell[j] + cy, k[2 * i + cx][2 * j + cy]));
                }
            }
        }
    }
    SparseMatrix::from_triplets(n, n, &mut trip, true)
}

/// Coupling blocks: G[(v), p] = alpha integral v . grad p (2N x N) and
/// D[q, (u)] = alpha integral q div u (N x 2N).
pub fn coupling_matrices(mesh: &TriMesh, alpha: f64) -> (SparseMatrix, SparseMatrix) {
    let n = mesh.n_nodes();
    let mut gt = Vec::with_capacity(18 * mesh.n_cells());
    let mut dt = Vec::with_capacity(18 * mesh.n_cells());
    for cell in &mesh.cells {
        let pts = cell.map(|v| mesh.nodes[v]);
        let (area, gx, gy) = cell_gradients(pts);
        // integral_T phi_i d_c phi_j = |T|/3 (grad phi_j)_c
        let w = alpha * area / 3.0;
        for i in 0..3 {
            for j in 0..3 {
                gt.push((2 * cell[i], cell[j], w * gx[j]));
                gt.push((2 * cell[i] + 1, cell[j], w * gy[j]));
                dt.push((cell[i], 2 * cell[j], w * gx[j]));
                dt.push((cell[i], 2 * cell[j] + 1, w * gy[j]));
            }
        }
    }
    let g = SparseMatrix::from_triplets(2 * n, n, &mut gt, false);
    let d = SparseMatrix::from_triplets(n, 2 * n, &mut dt, false);
    (g, d)
}

/// Load vector integral f q via the edge-midpoint rule (exact to degree 2).
pub fn load_vector(mesh: &TriMesh, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
    let mut b = vec![0.0; mesh.n_nodes()];
    for (c, cell) in mesh.cells.iter().enumerate() {
        let pts = cell.map(|v| mesh.nodes[v]);
        let area = mesh.cell_area(c);
        let mids = [
            [(pts[0][0] + pts[1][0]) / 2.0, (pts[0][1] + pts[1][1]) / 2.0],
            [(pts[1][0] + pts[2][0]) / 2.0, (pts[1][1] + pts[2][1]) / 2.0],
            [(pts[2][0] + pts[0][0]) / 2.0, (pts[2][1] + pts[0][1]) / 2.0],
        ];
        let fv = mids.map(&f);
        // basis i is 1/2 on the two midpoints of its adjacent edges
        for i in 0..3 {
            let s = 0.5 * (fv[i] + fv[(i + 2) % 3]);
            b[cell[i]] += area / 3.0 * s;
        }
    }
    b
}

/// Standard boundary conditions of the flow problem: pressure Dirichlet on
/// TOP and BOTTOM, normal displacement fixed on LEFT (u_x = 0) and BOTTOM
/// (u_y = 0), natural elsewhere.
#[derive(Clone, Copy, Debug)]
pub struct BCSpec {
    pub p_top: f64,
    pub p_bottom: f64,
}

impl BCSpec {
    /// Constrained pressure nodes with their values, sorted by node.
    pub fn pressure_constraints(&self, mesh: &TriMesh) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64)> = mesh
            .boundary_nodes(BoundaryTag::Top)
            .into_iter()
            .map(|n| (n, self.p_top))
            .chain(
                mesh.boundary_nodes(BoundaryTag::Bottom)
                    .into_iter()
                    .map(|n| (n, self.p_bottom)),
            )
            .collect();
        out.sort_unstable_by_key(|&(n, _)| n);
        out
    }

    /// Constrained displacement dofs (indices in the displacement block),
    /// all homogeneous.
    pub fn displacement_constraints(&self, mesh: &TriMesh) -> Vec<(usize, f64)> {
        let dof = DofMap::new(mesh);
        let mut out: Vec<(usize, f64)> = mesh
            .boundary_nodes(BoundaryTag::Left)
            .into_iter()
            .map(|n| (dof.ux(n), 0.0))
            .chain(
                mesh.boundary_nodes(BoundaryTag::Bottom)
                    .into_iter()
                    .map(|n| (dof.uy(n), 0.0)),
            )
            .collect();
        out.sort_unstable_by_key(|&(d, _)| d);
        out
    }

    /// All constraints in coupled indexing.
    pub fn coupled_constraints(&self, mesh: &TriMesh) -> Vec<(usize, f64)> {
        let dof = DofMap::new(mesh);
        let mut out: Vec<(usize, f64)> = self
            .displacement_constraints(mesh)
            .into_iter()
            .map(|(d, v)| (dof.coupled_u(d), v))
            .chain(
                self.pressure_constraints(mesh)
                    .into_iter()
                    .map(|(n, v)| (dof.coupled_p(n), v)),
            )
            .collect();
        out.sort_unstable_by_key(|&(d, _)| d);
        out
    }

    /// Nodal pressure lift: boundary data on constrained nodes, zero
    /// elsewhere.
    pub fn pressure_lift(&self, mesh: &TriMesh) -> Vec<f64> {
        let mut g = vec![0.0; mesh.n_nodes()];
        for (n, v) in self.pressure_constraints(mesh) {
            g[n] = v;
        }
        g
    }
}

/// Eliminates Dirichlet dofs symmetrically: constrained rows and columns
/// are cleared, the diagonal set to 1, and column values lifted into the
/// right-hand side. `rhs` is modified in place.
pub fn apply_dirichlet(
    a: &SparseMatrix,
    rhs: &mut [f64],
    constraints: &[(usize, f64)],
) -> Result<SparseMatrix> {
    assert_eq!(a.n_rows, a.n_cols, "Dirichlet elimination needs a square system");
    assert_eq!(rhs.len(), a.n_rows);
    let mut value = vec![f64::NAN; a.n_rows];
    for &(d, v) in constraints {
        if d >= a.n_rows {
            return Err(Error::Numerical(format!(
                "constraint on missing dof {d} (system size {})",
                a.n_rows
            )));
        }
        if !value[d].is_nan() && value[d] != v {
            return Err(Error::Numerical(format!(
                "conflicting constraints on dof {d}: {} vs {v}",
                value[d]
            )));
        }
        value[d] = v;
    }
    let constrained = |d: usize| !value[d].is_nan();
    let mut trip = Vec::with_capacity(a.nnz());
    for r in 0..a.n_rows {
        if constrained(r) {
            continue;
        }
        let (cols, vals) = a.row(r);
        for (c, v) in cols.iter().zip(vals) {
            if constrained(*c) {
                rhs[r] -= v * value[*c];
            } else {
                trip.push((r, *c, *v));
            }
        }
    }
    for &(d, v) in constraints {
        trip.push((d, d, 1.0));
        rhs[d] = v;
    }
    Ok(SparseMatrix::from_triplets(
        a.n_rows,
        a.n_cols,
        &mut trip,
        a.symmetric,
    ))
}

/// Right-hand-side half of the Dirichlet elimination: subtracts the lifted
/// columns of the original (unconstrained) matrix and pins constrained
/// entries. Pairs with a matrix already eliminated by [`apply_dirichlet`],
/// so one factorization serves many right-hand sides.
pub fn dirichlet_rhs(a: &SparseMatrix, rhs: &mut [f64], constraints: &[(usize, f64)]) {
    assert_eq!(rhs.len(), a.n_rows);
    let mut value = vec![f64::NAN; a.n_rows];
    for &(d, v) in constraints {
        value[d] = v;
    }
    for r in 0..a.n_rows {
        if !value[r].is_nan() {
            continue;
        }
        let (cols, vals) = a.row(r);
        for (c, v) in cols.iter().zip(vals) {
            if !value[*c].is_nan() {
                rhs[r] -= v * value[*c];
            }
        }
    }
    for &(d, v) in constraints {
        rhs[d] = v;
    }
}

/// Assembles the coupled block system [[A, cs*G], [cs*D, SPB]] over
/// displacement-then-pressure dofs. `cs` is the coupling sign toggle and
/// the blocks already carry the physical alpha scaling.
pub fn compose_block(
    a: &SparseMatrix,
    g: &SparseMatrix,
    d: &SparseMatrix,
    spb: &SparseMatrix,
    cs: f64,
) -> SparseMatrix {
    let nu = a.n_rows;
    let np = spb.n_rows;
    assert_eq!(g.n_rows, nu);
    assert_eq!(g.n_cols, np);
    assert_eq!(d.n_rows, np);
    assert_eq!(d.n_cols, nu);
    let mut trip = Vec::with_capacity(a.nnz() + g.nnz() + d.nnz() + spb.nnz());
    for r in 0..nu {
        let (cols, vals) = a.row(r);
        for (c, v) in cols.iter().zip(vals) {
            trip.push((r, *c, *v));
        }
        let (cols, vals) = g.row(r);
        for (c, v) in cols.iter().zip(vals) {
            trip.push((r, nu + c, cs * v));
        }
    }
    for r in 0..np {
        let (cols, vals) = d.row(r);
        for (c, v) in cols.iter().zip(vals) {
            trip.push((nu + r, *c, cs * v));
        }
        let (cols, vals) = spb.row(r);
        for (c, v) in cols.iter().zip(vals) {
            trip.push((nu + r, nu + c, *v));
        }
    }
    SparseMatrix::from_triplets(nu + np, nu + np, &mut trip, false)
}
