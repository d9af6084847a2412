//! Parametric multiscale pressure spaces.
//!
//! The permeability enters every local operator, so snapshot blocks are
//! taken at each value of the parameter grid. For pressure-independent
//! laws the first block is computed once and replicated, which keeps the
//! snapshot shape identical to the parametric case at no extra solves.

use super::{
    harmonic_extensions, local_scalar_matrices, orthonormal_span, projected_pencil, LocalBasis,
    SnapshotFamily, SnapshotSet,
};
use crate::assembly::SparseMatrix;
use crate::fields::CoefficientModel;
use crate::mesh::{Neighborhood, NeighborhoodMap, PoUTable, TriMesh};
use crate::numerics::smallest_eigs;
use crate::{Error, Result};
use nalgebra::DMatrix;

fn k_cells(model: &CoefficientModel, region: &[u8], p_bar: f64) -> Result<Vec<f64>> {
    region
        .iter()
        .map(|&r| model.permeability(r, p_bar))
        .collect()
}

/// Per-cell permeability averaged uniformly over the parameter grid.
fn k_cells_mean(model: &CoefficientModel, region: &[u8], params: &[f64]) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; region.len()];
    for &p in params {
        for (a, k) in acc.iter_mut().zip(k_cells(model, region, p)?) {
            *a += k;
        }
    }
    let w = 1.0 / params.len() as f64;
    Ok(acc.into_iter().map(|a| a * w).collect())
}

fn snapshot_block(
    mesh: &TriMesh,
    nb: &Neighborhood,
    family: SnapshotFamily,
    k_cell: &[f64],
    l_snap: usize,
) -> Result<DMatrix<f64>> {
    let (stiff, mass) = local_scalar_matrices(mesh, nb, k_cell);
    match family {
        SnapshotFamily::Harmonic => {
            let interior: Vec<usize> = nb
                .interior_nodes
                .iter()
                .map(|&g| nb.local_of(g).expect("interior node"))
                .collect();
            let boundary: Vec<usize> = nb
                .boundary_nodes
                .iter()
                .map(|&g| nb.local_of(g).expect("boundary node"))
                .collect();
            harmonic_extensions(&stiff, &interior, &boundary)
        }
        SnapshotFamily::Spectral => {
            let k = l_snap.min(stiff.nrows());
            let e = smallest_eigs(&stiff, &mass, k)?;
            Ok(e.vectors)
        }
    }
}

/// Snapshot columns over the parameter grid, one block per value.
pub fn snapshots(
    mesh: &TriMesh,
    nb: &Neighborhood,
    region: &[u8],
    model: &CoefficientModel,
    family: SnapshotFamily,
    params: &[f64],
    l_snap: usize,
) -> Result<SnapshotSet> {
    if params.is_empty() {
        return Err(Error::Config("empty parameter grid".into()));
    }
    let parametric = model.k_is_parametric();
    let first = snapshot_block(mesh, nb, family, &k_cells(model, region, params[0])?, l_snap)?;
    let block_cols = first.ncols();
    let n_blocks = params.len();
    let mut matrix = DMatrix::zeros(first.nrows(), block_cols * n_blocks);
    matrix.columns_mut(0, block_cols).copy_from(&first);
    for (j, &p) in params.iter().enumerate().skip(1) {
        let block = if parametric {
            snapshot_block(mesh, nb, family, &k_cells(model, region, p)?, l_snap)?
        } else {
            first.clone()
        };
        if block.ncols() != block_cols {
            return Err(Error::Numerical(format!(
                "snapshot block {j} has {} columns, expected {block_cols}",
                block.ncols()
            )));
        }
        matrix.columns_mut(j * block_cols, block_cols).copy_from(&block);
    }
    Ok(SnapshotSet {
        matrix,
        block_cols,
        n_blocks,
    })
}

/// Offline space: the spectral problem with the grid-averaged permeability,
/// restricted to the rank-filtered snapshot span, truncated to `n_off`.
pub fn offline_space(
    mesh: &TriMesh,
    nb: &Neighborhood,
    region: &[u8],
    model: &CoefficientModel,
    family: SnapshotFamily,
    params: &[f64],
    l_snap: usize,
    n_off: usize,
) -> Result<LocalBasis> {
    let snaps = snapshots(mesh, nb, region, model, family, params, l_snap)?;
    let span = orthonormal_span(&snaps.matrix);
    if span.ncols() == 0 {
        return Err(Error::Numerical(format!(
            "neighborhood of coarse node {} produced an empty snapshot span",
            nb.coarse_node
        )));
    }
    let k_bar = k_cells_mean(model, region, params)?;
    let (stiff, mass) = local_scalar_matrices(mesh, nb, &k_bar);
    Ok(projected_pencil(&stiff, &mass, &span)?.truncate(n_off))
}

/// Online space at one parameter value: the spectral problem with the
/// permeability frozen at `p_bar`, restricted to the offline span.
pub fn online_space(
    mesh: &TriMesh,
    nb: &Neighborhood,
    region: &[u8],
    model: &CoefficientModel,
    offline: &LocalBasis,
    p_bar: f64,
    n_on: usize,
) -> Result<LocalBasis> {
    let k = k_cells(model, region, p_bar)?;
    let (stiff, mass) = local_scalar_matrices(mesh, nb, &k);
    Ok(projected_pencil(&stiff, &mass, &offline.columns)?.truncate(n_on))
}

/// Stacks partition-of-unity-multiplied basis functions into the pressure
/// restriction matrix (rows = coarse dofs, columns = fine nodes). Nodes in
/// `dirichlet` are zeroed so the coarse space conforms to the essential
/// conditions; returns the number of rows dropped because they vanished.
pub fn assemble_restriction(
    mesh: &TriMesh,
    map: &NeighborhoodMap,
    pou: &PoUTable,
    spaces: &[LocalBasis],
    dirichlet: &[usize],
) -> (SparseMatrix, usize) {
    assert_eq!(spaces.len(), map.neighborhoods.len());
    let n = mesh.n_nodes();
    let mut mask = vec![false; n];
    for &d in dirichlet {
        mask[d] = true;
    }
    let mut trip = Vec::new();
    let mut row = 0usize;
    let mut dropped = 0usize;
    for (i, nb) in map.neighborhoods.iter().enumerate() {
        let chi = &pou.values[i];
        for c in 0..spaces[i].columns.ncols() {
            let col = spaces[i].columns.column(c);
            let mut any = false;
            for (l, &g) in nb.fine_nodes.iter().enumerate() {
                if mask[g] {
                    continue;
                }
                let v = chi[l] * col[l];
                if v != 0.0 {
                    trip.push((row, g, v));
                    any = true;
                }
            }
            if any {
                row += 1;
            } else {
                trip.retain(|&(r, _, _)| r != row);
                dropped += 1;
            }
        }
    }
    (SparseMatrix::from_triplets(row, n, &mut trip, false), dropped)
}
