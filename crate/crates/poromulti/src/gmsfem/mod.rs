//! Multiscale basis construction on coarse-node neighborhoods.
//!
//! Both fields follow the same offline/online pipeline:
//!   snapshots on each neighborhood -> orthonormal span (rank-filtered) ->
//!   spectral problem averaged over the parameter range (offline) ->
//!   spectral problem at the current parameter (online) -> multiplication
//!   by the partition of unity and assembly into a restriction matrix.
//!
//! `pressure` builds scalar spaces weighted by the permeability; `mech`
//! mirrors the construction for displacements with the (lambda + 2 mu)
//! weight. Everything here works on dense local matrices indexed by a
//! neighborhood's own node numbering.

pub mod mech;
pub mod pressure;

use crate::assembly::{cell_gradients, local_elasticity, local_mass, local_stiffness};
use crate::mesh::{Neighborhood, TriMesh};
use crate::numerics::smallest_eigs;
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Which snapshot family seeds the offline space.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SnapshotFamily {
    /// Harmonic extensions of nodal boundary data on the neighborhood.
    Harmonic,
    /// Smallest eigenpairs of the local spectral problem with natural
    /// boundary conditions.
    Spectral,
}

impl SnapshotFamily {
    pub fn parse(s: &str) -> Option<SnapshotFamily> {
        match s.to_ascii_lowercase().as_str() {
            "harmonic" => Some(SnapshotFamily::Harmonic),
            "spectral" => Some(SnapshotFamily::Spectral),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SnapshotFamily::Harmonic => "harmonic",
            SnapshotFamily::Spectral => "spectral",
        }
    }
}

/// Snapshot columns for one neighborhood, one block per parameter value.
/// Parameter-independent problems still carry all blocks (bit-identical)
/// so shapes stay uniform.
#[derive(Clone, Debug)]
pub struct SnapshotSet {
    pub matrix: DMatrix<f64>,
    pub block_cols: usize,
    pub n_blocks: usize,
}

/// Basis columns on a neighborhood's local dofs, with the eigenvalues of
/// the spectral problem that produced them (ascending).
#[derive(Clone, Debug, PartialEq)]
pub struct LocalBasis {
    pub columns: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
}

impl LocalBasis {
    pub fn truncate(mut self, n: usize) -> LocalBasis {
        let keep = n.min(self.columns.ncols());
        self.columns = self.columns.columns(0, keep).into_owned();
        self.eigenvalues.truncate(keep);
        self
    }
}

/// Orthonormal basis of the column span with small directions removed:
/// a two-pass Gram-Schmidt prefilter (relative tolerance 1e-13) followed
/// by an SVD of the coefficient matrix that drops singular values below
/// 1e-10 of the largest. Deterministic for fixed input.
pub fn orthonormal_span(s: &DMatrix<f64>) -> DMatrix<f64> {
    let n = s.nrows();
    let mut q: Vec<DVector<f64>> = Vec::new();
    for j in 0..s.ncols() {
        let mut v = s.column(j).into_owned();
        let orig = v.norm();
        if orig == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for u in &q {
                let c = u.dot(&v);
                v.axpy(-c, u, 1.0);
            }
        }
        if v.norm() > 1e-13 * orig {
            let nv = v.norm();
            q.push(v / nv);
        }
    }
    if q.is_empty() {
        return DMatrix::zeros(n, 0);
    }
    let qm = DMatrix::from_columns(&q);
    let t = qm.transpose() * s;
    let svd = t.svd(true, false);
    let smax = svd.singular_values.max();
    if !(smax > 0.0) {
        return DMatrix::zeros(n, 0);
    }
    let kept: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > 1e-10 * smax)
        .collect();
    let u = svd.u.expect("requested in svd call");
    let mut out = DMatrix::zeros(n, kept.len());
    for (c, &i) in kept.iter().enumerate() {
        out.set_column(c, &(&qm * u.column(i)));
    }
    out
}

/// Dense neighborhood stiffness and mass, both weighted by the per-cell
/// coefficient (indexed by global cell id), on local node numbering.
pub(crate) fn local_scalar_matrices(
    mesh: &TriMesh,
    nb: &Neighborhood,
    k_cell: &[f64],
) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = nb.fine_nodes.len();
    let mut stiff = DMatrix::zeros(n, n);
    let mut mass = DMatrix::zeros(n, n);
    for &c in &nb.fine_cells {
        let cell = mesh.cells[c];
        let pts = cell.map(|v| mesh.nodes[v]);
        let ks = local_stiffness(pts);
        let (area, _, _) = cell_gradients(pts);
        let km = local_mass(area);
        let k = k_cell[c];
        let loc = cell.map(|g| nb.local_of(g).expect("cell vertex outside neighborhood"));
        for i in 0..3 {
            for j in 0..3 {
                stiff[(loc[i], loc[j])] += k * ks[i][j];
                mass[(loc[i], loc[j])] += k * km[i][j];
            }
        }
    }
    (stiff, mass)
}

/// Dense neighborhood elasticity and weighted vector mass on local
/// interleaved displacement dofs.
pub(crate) fn local_vector_matrices(
    mesh: &TriMesh,
    nb: &Neighborhood,
    lambda_cell: &[f64],
    mu_cell: &[f64],
    w_cell: &[f64],
) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = 2 * nb.fine_nodes.len();
    let mut stiff = DMatrix::zeros(n, n);
    let mut mass = DMatrix::zeros(n, n);
    for &c in &nb.fine_cells {
        let cell = mesh.cells[c];
        let pts = cell.map(|v| mesh.nodes[v]);
        let ke = local_elasticity(pts, lambda_cell[c], mu_cell[c]);
        let (area, _, _) = cell_gradients(pts);
        let km = local_mass(area);
        let w = w_cell[c];
        let loc = cell.map(|g| nb.local_of(g).expect("cell vertex outside neighborhood"));
        for i in 0..3 {
            for j in 0..3 {
                for (cx, cy) in [(0, 0), (1, 1), (0, 1), (1, 0)] {
                    stiff[(2 * loc[i] + cx, 2 * loc[j] + cy)] += ke[2 * i + cx][2 * j + cy];
                }
                mass[(2 * loc[i], 2 * loc[j])] += w * km[i][j];
                mass[(2 * loc[i] + 1, 2 * loc[j] + 1)] += w * km[i][j];
            }
        }
    }
    (stiff, mass)
}

/// Energy-harmonic extensions of Kronecker data: column b solves
/// stiff[I,I] x = -stiff[I,b] with a unit value at boundary dof b and zero
/// at the other boundary dofs. `interior` and `boundary` partition the
/// local dof range.
pub(crate) fn harmonic_extensions(
    stiff: &DMatrix<f64>,
    interior: &[usize],
    boundary: &[usize],
) -> Result<DMatrix<f64>> {
    let n = stiff.nrows();
    let (ni, nb) = (interior.len(), boundary.len());
    assert_eq!(ni + nb, n, "interior/boundary must partition the dofs");
    let mut aii = DMatrix::zeros(ni, ni);
    for (i, &gi) in interior.iter().enumerate() {
        for (j, &gj) in interior.iter().enumerate() {
            aii[(i, j)] = stiff[(gi, gj)];
        }
    }
    let mut aib = DMatrix::zeros(ni, nb);
    for (i, &gi) in interior.iter().enumerate() {
        for (b, &gb) in boundary.iter().enumerate() {
            aib[(i, b)] = -stiff[(gi, gb)];
        }
    }
    let chol = aii
        .cholesky()
        .ok_or_else(|| Error::Numerical("interior stiffness is not positive definite".into()))?;
    let x = chol.solve(&aib);
    let mut out = DMatrix::zeros(n, nb);
    for (b, &gb) in boundary.iter().enumerate() {
        out[(gb, b)] = 1.0;
        for (i, &gi) in interior.iter().enumerate() {
            out[(gi, b)] = x[(i, b)];
        }
    }
    Ok(out)
}

/// Solves the spectral problem restricted to a span: the pencil is
/// projected onto the columns of `span` and all eigenpairs come back in
/// ascending order, prolonged to local dofs.
pub(crate) fn projected_pencil(
    stiff: &DMatrix<f64>,
    mass: &DMatrix<f64>,
    span: &DMatrix<f64>,
) -> Result<LocalBasis> {
    if span.ncols() == 0 {
        return Err(Error::Numerical("empty span for spectral projection".into()));
    }
    let a = span.transpose() * stiff * span;
    let m = span.transpose() * mass * span;
    let a = 0.5 * (&a + a.transpose());
    let m = 0.5 * (&m + m.transpose());
    let e = smallest_eigs(&a, &m, a.nrows())?;
    Ok(LocalBasis {
        columns: span * &e.vectors,
        eigenvalues: e.values,
    })
}
