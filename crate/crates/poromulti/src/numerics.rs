//! Dense generalized symmetric eigensolver and a sparse direct solver.
//!
//! Local spectral problems are small and dense; they reduce to a standard
//! symmetric problem through a Cholesky factor of the mass matrix. Global
//! coupled systems are sparse and nonsymmetric; they go through a
//! reverse-Cuthill-McKee reordering followed by banded LU with partial
//! pivoting, which suits the narrow-band structure of meshes on a square.

use crate::assembly::SparseMatrix;
use crate::{Error, Result};
use nalgebra::DMatrix;

/// Ascending generalized eigenpairs. `vectors` holds one M-orthonormal
/// eigenvector per column, sign-normalized so the first component larger
/// than 1e-12 of the column peak is positive.
#[derive(Clone, Debug)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

/// Smallest `k` eigenpairs of A v = lambda M v for symmetric A and SPD M.
pub fn smallest_eigs(a: &DMatrix<f64>, m: &DMatrix<f64>, k: usize) -> Result<EigenPairs> {
    let n = a.nrows();
    if a.ncols() != n || m.nrows() != n || m.ncols() != n {
        return Err(Error::Numerical(format!(
            "eigensolver needs square matrices of one size, got {}x{} and {}x{}",
            a.nrows(),
            a.ncols(),
            m.nrows(),
            m.ncols()
        )));
    }
    if k > n {
        return Err(Error::Numerical(format!(
            "requested {k} eigenpairs from a {n}-dimensional pencil"
        )));
    }
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("mass matrix is not positive definite".into()))?;
    let l = chol.l();
    // C = L^-1 A L^-T, symmetrized against roundoff
    let t1 = l
        .solve_lower_triangular(a)
        .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
    let c = l
        .solve_lower_triangular(&t1.transpose())
        .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
    let c = 0.5 * (&c + c.transpose());
    let eig = c.symmetric_eigen();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| {
        eig.eigenvalues[i]
            .total_cmp(&eig.eigenvalues[j])
            .then(i.cmp(&j))
    });
    let lt = l.transpose();
    let mut values = Vec::with_capacity(k);
    let mut vectors = DMatrix::zeros(n, k);
    for (col, &i) in idx.iter().take(k).enumerate() {
        values.push(eig.eigenvalues[i]);
        let w = eig.eigenvectors.column(i).into_owned();
        let mut v = lt
            .solve_upper_triangular(&w)
            .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
        let peak = v.amax();
        if let Some(first) = v.iter().find(|x| x.abs() > 1e-12 * peak) {
            if *first < 0.0 {
                v.neg_mut();
            }
        }
        vectors.set_column(col, &v);
    }
    Ok(EigenPairs { values, vectors })
}

/// Banded LU factorization with partial pivoting of a sparse matrix,
/// after a bandwidth-reducing reverse-Cuthill-McKee permutation.
pub struct SparseLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
    piv: Vec<usize>,
    /// order[new] = old row/column index
    order: Vec<usize>,
}

/// Reverse-Cuthill-McKee ordering of the symmetrized pattern.
/// Returns order[new] = old.
pub fn rcm_ordering(a: &SparseMatrix) -> Vec<usize> {
    let n = a.n_rows;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for r in 0..n {
        let (cols, _) = a.row(r);
        for &c in cols {
            if c != r {
                adj[r].push(c);
                adj[c].push(r);
            }
        }
    }
    for l in adj.iter_mut() {
        l.sort_unstable();
        l.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(|l| l.len()).collect();

    let bfs_last = |start: usize, visited: &mut [bool], order: &mut Vec<usize>| -> usize {
        // Cuthill-McKee sweep from start; returns a min-degree node of the
        // deepest level.
        let mut queue = std::collections::VecDeque::new();
        visited[start] = true;
        queue.push_back((start, 0usize));
        let mut deepest = (start, 0usize);
        while let Some((v, d)) = queue.pop_front() {
            order.push(v);
            if d > deepest.1 || (d == deepest.1 && degree[v] < degree[deepest.0]) {
                deepest = (v, d);
            }
            let mut nb: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            nb.sort_unstable_by_key(|&w| (degree[w], w));
            for w in nb {
                if !visited[w] {
                    visited[w] = true;
                    queue.push_back((w, d + 1));
                }
            }
        }
        deepest.0
    };

    let mut order = Vec::with_capacity(n);
    let mut visited = vec![false; n];
    loop {
        let mut root = usize::MAX;
        for v in 0..n {
            if !visited[v] && (root == usize::MAX || degree[v] < degree[root]) {
                root = v;
            }
        }
        if root == usize::MAX {
            break;
        }
        // one refinement step toward a pseudo-peripheral start
        let mut probe_visited = visited.clone();
        let mut scratch = Vec::new();
        let far = bfs_last(root, &mut probe_visited, &mut scratch);
        bfs_last(far, &mut visited, &mut order);
    }
    order.reverse();
    order
}

impl SparseLu {
    pub fn factor(a: &SparseMatrix) -> Result<SparseLu> {
        if a.n_rows != a.n_cols {
            return Err(Error::Numerical("LU needs a square matrix".into()));
        }
        let n = a.n_rows;
        let order = rcm_ordering(a);
        let mut pos = vec![0usize; n];
        for (new, &old) in order.iter().enumerate() {
            pos[old] = new;
        }
        let mut bw = 0usize;
        for r in 0..n {
            let (cols, _) = a.row(r);
            for &c in cols {
                bw = bw.max(pos[r].abs_diff(pos[c]));
            }
        }
        let (kl, ku) = (bw, bw);
        let kv = kl + ku;
        let ldab = 2 * kl + ku + 1;
        let mut ab = vec![0.0; ldab * n];
        for r in 0..n {
            let (cols, vals) = a.row(r);
            for (c, v) in cols.iter().zip(vals) {
                let (i, j) = (pos[r], pos[*c]);
                ab[j * ldab + kv + i - j] += *v;
            }
        }

        let mut piv = vec![0usize; n];
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let base = j * ldab + kv;
            let mut jp = 0usize;
            let mut best = ab[base].abs();
            for s in 1..=km {
                let v = ab[base + s].abs();
                if v > best {
                    best = v;
                    jp = s;
                }
            }
            piv[j] = j + jp;
            if ab[base + jp] == 0.0 {
                return Err(Error::Numerical(format!(
                    "singular system: zero pivot at dof {}",
                    order[j + jp]
                )));
            }
            ju = ju.max((j + ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    let off = c * ldab + kv + j - c;
                    ab.swap(off, off + jp);
                }
            }
            if km > 0 {
                let inv = 1.0 / ab[base];
                for s in 1..=km {
                    ab[base + s] *= inv;
                }
                for c in j + 1..=ju {
                    let head = c * ldab + kv + j - c;
                    let f = ab[head];
                    if f != 0.0 {
                        for s in 1..=km {
                            ab[head + s] -= f * ab[base + s];
                        }
                    }
                }
            }
        }

        Ok(SparseLu {
            n,
            kl,
            ku,
            ldab,
            ab,
            piv,
            order,
        })
    }

    pub fn bandwidth(&self) -> usize {
        self.kl
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let (n, kl, ku, ldab) = (self.n, self.kl, self.ku, self.ldab);
        let kv = kl + ku;
        let mut w: Vec<f64> = (0..n).map(|i| b[self.order[i]]).collect();
        for j in 0..n.saturating_sub(1) {
            let jp = self.piv[j];
            if jp != j {
                w.swap(j, jp);
            }
            let lm = kl.min(n - 1 - j);
            let wj = w[j];
            if wj != 0.0 {
                for s in 1..=lm {
                    w[j + s] -= self.ab[j * ldab + kv + s] * wj;
                }
            }
        }
        for j in (0..n).rev() {
            w[j] /= self.ab[j * ldab + kv];
            let lm = j.min(kl + ku);
            let wj = w[j];
            if wj != 0.0 {
                for s in 1..=lm {
                    w[j - s] -= self.ab[j * ldab + kv - s] * wj;
                }
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.order.iter().enumerate() {
            x[old] = w[new];
        }
        x
    }
}

/// Factor-and-solve convenience for one right-hand side.
pub fn solve_sparse(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    Ok(SparseLu::factor(a)?.solve(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{apply_dirichlet, pressure_stiffness, SparseMatrix};
    use crate::mesh::{BoundaryTag, TriMesh};

    fn dmat(rows: usize, cols: usize, data: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, cols, data)
    }

    #[test]
    fn smallest_eigs_diagonal_case() {
        let a = dmat(3, 3, &[3.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0]);
        let m = DMatrix::identity(3, 3);
        let e = smallest_eigs(&a, &m, 2).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-12);
        assert!((e.values[1] - 2.0).abs() < 1e-12);
        // eigenvectors e_2 and e_3 with positive leading entry
        assert!((e.vectors[(1, 0)] - 1.0).abs() < 1e-10);
        assert!((e.vectors[(2, 1)] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn smallest_eigs_generalized_case() {
        let a = dmat(2, 2, &[2.0, 0.0, 0.0, 8.0]);
        let m = dmat(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let e = smallest_eigs(&a, &m, 2).unwrap();
        assert!((e.values[0] - 2.0).abs() < 1e-12);
        assert!((e.values[1] - 4.0).abs() < 1e-12);
        // M-normalization: v' M v = 1
        let v1 = e.vectors.column(1);
        assert!((v1[1] - 1.0 / 2.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn smallest_eigs_random_pencil_contract() {
        // deterministic pseudo-random SPD pencil
        let n = 24;
        let mut s = 12345u64;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
        };
        let b = DMatrix::from_fn(n, n, |_, _| next());
        let c = DMatrix::from_fn(n, n, |_, _| next());
        let a = &b * b.transpose();
        let m = &c * c.transpose() + DMatrix::identity(n, n) * n as f64;
        let k = 7;
        let e = smallest_eigs(&a, &m, k).unwrap();
        let anorm = a.norm();
        for i in 0..k {
            let v = e.vectors.column(i);
            let r = &a * v - &m * v * e.values[i];
            assert!(r.norm() < 1e-8 * anorm, "residual {}", r.norm());
            for j in 0..k {
                let w = e.vectors.column(j);
                let dot = (&m * w).dot(&v);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-8, "M-orthonormality ({i},{j}) = {dot}");
            }
            if i > 0 {
                assert!(e.values[i] >= e.values[i - 1]);
            }
        }
    }

    #[test]
    fn smallest_eigs_rejects_indefinite_mass() {
        let a = DMatrix::identity(2, 2);
        let m = dmat(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(smallest_eigs(&a, &m, 1).is_err());
        assert!(smallest_eigs(&a, &DMatrix::identity(2, 2), 3).is_err());
    }

    #[test]
    fn solve_sparse_two_by_two() {
        let mut trip = vec![(0, 0, 4.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0)];
        let a = SparseMatrix::from_triplets(2, 2, &mut trip, true);
        let x = solve_sparse(&a, &[1.0, 2.0]).unwrap();
        assert!((x[0] - 1.0 / 11.0).abs() < 1e-14);
        assert!((x[1] - 7.0 / 11.0).abs() < 1e-14);
    }

    #[test]
    fn solve_sparse_matches_dense_lu() {
        // unsymmetric pattern with deterministic pseudo-random values
        let n = 60;
        let mut s = 777u64;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
        };
        let mut trip = Vec::new();
        for i in 0..n {
            trip.push((i, i, 4.0 + next()));
            if i + 1 < n {
                trip.push((i, i + 1, next()));
                trip.push((i + 1, i, next()));
            }
            if i + 7 < n {
                trip.push((i, i + 7, next()));
                trip.push((i + 7, i, next()));
            }
        }
        let a = SparseMatrix::from_triplets(n, n, &mut trip, false);
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let x = solve_sparse(&a, &b).unwrap();
        let bn: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut r = a.mul_vec(&x);
        for i in 0..n {
            r[i] -= b[i];
        }
        let rn: f64 = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(rn < 1e-10 * bn, "relative residual {}", rn / bn);
        let xd = a.to_dense().lu().solve(&nalgebra::DVector::from_row_slice(&b)).unwrap();
        for i in 0..n {
            assert!((x[i] - xd[i]).abs() < 1e-9, "component {i}");
        }
    }

    #[test]
    fn singular_system_reports_pivot() {
        // row 2 equals row 0: singular
        let mut trip = vec![
            (0, 0, 1.0),
            (0, 2, 2.0),
            (1, 1, 3.0),
            (2, 0, 1.0),
            (2, 2, 2.0),
        ];
        let a = SparseMatrix::from_triplets(3, 3, &mut trip, false);
        let err = solve_sparse(&a, &[1.0, 1.0, 1.0]).unwrap_err();
        assert!(format!("{err}").contains("pivot"));
    }

    #[test]
    fn rcm_keeps_grid_bandwidth_small() {
        let mesh = TriMesh::structured(12).unwrap();
        let k = vec![1.0; mesh.n_cells()];
        let a = pressure_stiffness(&mesh, &k);
        let lu = SparseLu::factor(&a).unwrap();
        // natural row-major ordering has bandwidth 14; RCM must not be
        // dramatically worse and usually matches it
        assert!(lu.bandwidth() <= 16, "bandwidth {}", lu.bandwidth());
    }

    #[test]
    fn laplace_reproduces_linear_profile() {
        let mesh = TriMesh::structured(6).unwrap();
        let k = vec![1.0; mesh.n_cells()];
        let a = pressure_stiffness(&mesh, &k);
        let mut rhs = vec![0.0; mesh.n_nodes()];
        let mut constraints = Vec::new();
        for n in mesh.boundary_nodes(BoundaryTag::Top) {
            constraints.push((n, 1.0));
        }
        for n in mesh.boundary_nodes(BoundaryTag::Bottom) {
            constraints.push((n, 0.0));
        }
        let ae = apply_dirichlet(&a, &mut rhs, &constraints).unwrap();
        let p = solve_sparse(&ae, &rhs).unwrap();
        for (i, node) in mesh.nodes.iter().enumerate() {
            assert!(
                (p[i] - node[1]).abs() < 1e-10,
                "node {i}: p = {}, y = {}",
                p[i],
                node[1]
            );
        }
    }
}
