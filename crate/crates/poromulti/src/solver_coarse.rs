//! Multiscale solver: offline space construction with a disk cache, and a
//! time loop that mirrors the fine solver on the reduced system.
//!
//! The coarse unknowns represent fine fields through the restriction
//! matrices: u = R_u' u_c and p = R_p' p_c + g, where g carries the
//! pressure boundary data. The displacement blocks never depend on the
//! pressure, so R_u and its projections are built once per run; the
//! pressure blocks are rebuilt whenever the permeability law requires it.

use crate::assembly::{compose_block, pressure_stiffness, SparseMatrix};
use crate::fields::{average_over, CoefficientModel};
use crate::gmsfem::{mech, pressure, LocalBasis, SnapshotFamily};
use crate::mesh::{build_neighborhoods, build_pou, BoundaryTag, NeighborhoodMap, PoUTable, TriMesh};
use crate::numerics::SparseLu;
use crate::solver_fine::{FineProblem, PoroState, SolutionHistory};
use crate::{Error, Result};
use std::io::{Read, Write};
use std::path::Path;

/// Identity of an offline build: structural sizes plus a digest of the
/// inputs that shape the spaces (parameter grid, material regions, model).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OfflineKey {
    pub fine_n: u64,
    pub coarse_n: u64,
    pub family: SnapshotFamily,
    pub l_snap: u64,
    pub n_off: u64,
    pub digest: u64,
}

fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = seed;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

const FNV_OFFSET: u64 = 0xcbf29ce484222325;

impl OfflineKey {
    pub fn new(
        fine: &TriMesh,
        coarse_n: usize,
        region: &[u8],
        model: &CoefficientModel,
        family: SnapshotFamily,
        params: &[f64],
        l_snap: usize,
        n_off: usize,
    ) -> OfflineKey {
        let mut d = fnv1a(FNV_OFFSET, region);
        for &p in params {
            d = fnv1a(d, &p.to_le_bytes());
        }
        d = fnv1a(d, &[model.law as u8]);
        for v in [
            model.biot_modulus[0],
            model.biot_modulus[1],
            model.alpha,
            model.youngs[0],
            model.youngs[1],
            model.poisson,
        ] {
            d = fnv1a(d, &v.to_le_bytes());
        }
        OfflineKey {
            fine_n: fine.n_nodes() as u64,
            coarse_n: coarse_n as u64,
            family,
            l_snap: l_snap as u64,
            n_off: n_off as u64,
            digest: d,
        }
    }
}

/// Offline spaces for every coarse-node neighborhood, for both fields,
/// together with the coarse mesh structures they were built on.
pub struct OfflineBundle {
    pub key: OfflineKey,
    pub coarse: TriMesh,
    pub map: NeighborhoodMap,
    pub pou: PoUTable,
    pub params: Vec<f64>,
    pub pressure: Vec<LocalBasis>,
    pub mech: Vec<LocalBasis>,
}

impl OfflineBundle {
    pub fn build(
        fine: &TriMesh,
        coarse_n: usize,
        region: &[u8],
        model: &CoefficientModel,
        family: SnapshotFamily,
        params: &[f64],
        l_snap: usize,
        n_off: usize,
    ) -> Result<OfflineBundle> {
        let key = OfflineKey::new(fine, coarse_n, region, model, family, params, l_snap, n_off);
        let coarse = TriMesh::structured(coarse_n)?;
        let map = build_neighborhoods(&coarse, fine)?;
        let pou = build_pou(&coarse, fine, &map)?;
        let mut pspaces = Vec::with_capacity(map.neighborhoods.len());
        let mut mspaces = Vec::with_capacity(map.neighborhoods.len());
        for nb in &map.neighborhoods {
            pspaces.push(pressure::offline_space(
                fine, nb, region, model, family, params, l_snap, n_off,
            )?);
            mspaces.push(mech::offline_space(
                fine, nb, region, model, family, l_snap, n_off,
            )?);
        }
        Ok(OfflineBundle {
            key,
            coarse,
            map,
            pou,
            params: params.to_vec(),
            pressure: pspaces,
            mech: mspaces,
        })
    }

    /// Writes the bundle in the binary cache format (magic "PMOF1").
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf: Vec<u8> = Vec::new();
        buf.extend_from_slice(b"PMOF1\n");
        for v in [
            self.key.fine_n,
            self.key.coarse_n,
            self.key.family as u64,
            self.key.l_snap,
            self.key.n_off,
            self.key.digest,
        ] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf.extend_from_slice(&(self.params.len() as u64).to_le_bytes());
        for &p in &self.params {
            buf.extend_from_slice(&p.to_le_bytes());
        }
        buf.extend_from_slice(&(self.map.neighborhoods.len() as u64).to_le_bytes());
        let write_basis = |buf: &mut Vec<u8>, b: &LocalBasis| {
            buf.extend_from_slice(&(b.columns.nrows() as u64).to_le_bytes());
            buf.extend_from_slice(&(b.columns.ncols() as u64).to_le_bytes());
            for &e in &b.eigenvalues {
                buf.extend_from_slice(&e.to_le_bytes());
            }
            for &v in b.columns.as_slice() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        };
        for (p, m) in self.pressure.iter().zip(&self.mech) {
            write_basis(&mut buf, p);
            write_basis(&mut buf, m);
        }
        let mut f = std::fs::File::create(path)?;
        f.write_all(&buf)?;
        Ok(())
    }

    /// Reads a cached bundle; `None` when the file is absent or was built
    /// for different inputs. Corrupt files are an error.
    pub fn load(path: &Path, fine: &TriMesh, expected: &OfflineKey) -> Result<Option<OfflineBundle>> {
        let mut buf = Vec::new();
        match std::fs::File::open(path) {
            Ok(mut f) => {
                f.read_to_end(&mut buf)?;
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        }
        let mut at = 0usize;
        let take = |at: &mut usize, n: usize| -> Result<&[u8]> {
            if *at + n > buf.len() {
                return Err(Error::Numerical(format!(
                    "offline cache {} is truncated",
                    path.display()
                )));
            }
            let s = &buf[*at..*at + n];
            *at += n;
            Ok(s)
        };
        if take(&mut at, 6)? != b"PMOF1\n" {
            return Err(Error::Numerical(format!(
                "offline cache {} has a bad magic header",
                path.display()
            )));
        }
        let mut u64s = [0u64; 6];
        for v in u64s.iter_mut() {
            *v = u64::from_le_bytes(take(&mut at, 8)?.try_into().expect("8 bytes"));
        }
        let family = match u64s[2] {
            0 => SnapshotFamily::Harmonic,
            1 => SnapshotFamily::Spectral,
            x => {
                return Err(Error::Numerical(format!(
                    "offline cache {} has unknown family tag {x}",
                    path.display()
                )))
            }
        };
        let key = OfflineKey {
            fine_n: u64s[0],
            coarse_n: u64s[1],
            family,
            l_snap: u64s[3],
            n_off: u64s[4],
            digest: u64s[5],
        };
        if key != *expected {
            return Ok(None);
        }
        let n_params = u64::from_le_bytes(take(&mut at, 8)?.try_into().expect("8 bytes")) as usize;
        let mut params = Vec::with_capacity(n_params);
        for _ in 0..n_params {
            params.push(f64::from_le_bytes(take(&mut at, 8)?.try_into().expect("8 bytes")));
        }
        let n_nb = u64::from_le_bytes(take(&mut at, 8)?.try_into().expect("8 bytes")) as usize;
        let read_basis = |at: &mut usize| -> Result<LocalBasis> {
            let nr = u64::from_le_bytes(take(at, 8)?.try_into().expect("8 bytes")) as usize;
            let nc = u64::from_le_bytes(take(at, 8)?.try_into().expect("8 bytes")) as usize;
            let mut eigenvalues = Vec::with_capacity(nc);
            for _ in 0..nc {
                eigenvalues.push(f64::from_le_bytes(take(at, 8)?.try_into().expect("8 bytes")));
            }
            let mut data = Vec::with_capacity(nr * nc);
            for _ in 0..nr * nc {
                data.push(f64::from_le_bytes(take(at, 8)?.try_into().expect("8 bytes")));
            }
            Ok(LocalBasis {
                columns: nalgebra::DMatrix::from_column_slice(nr, nc, &data),
                eigenvalues,
            })
        };
        let mut pspaces = Vec::with_capacity(n_nb);
        let mut mspaces = Vec::with_capacity(n_nb);
        for _ in 0..n_nb {
            pspaces.push(read_basis(&mut at)?);
            mspaces.push(read_basis(&mut at)?);
        }
        let coarse = TriMesh::structured(key.coarse_n as usize)?;
        let map = build_neighborhoods(&coarse, fine)?;
        if map.neighborhoods.len() != n_nb {
            return Err(Error::Numerical(format!(
                "offline cache {} holds {n_nb} neighborhoods, mesh has {}",
                path.display(),
                map.neighborhoods.len()
            )));
        }
        let pou = build_pou(&coarse, fine, &map)?;
        Ok(Some(OfflineBundle {
            key,
            coarse,
            map,
            pou,
            params,
            pressure: pspaces,
            mech: mspaces,
        }))
    }

    /// Loads from the cache when possible, otherwise builds and saves.
    /// The flag reports whether the bundle came from disk.
    #[allow(clippy::too_many_arguments)]
    pub fn load_or_build(
        cache: Option<&Path>,
        fine: &TriMesh,
        coarse_n: usize,
        region: &[u8],
        model: &CoefficientModel,
        family: SnapshotFamily,
        params: &[f64],
        l_snap: usize,
        n_off: usize,
    ) -> Result<(OfflineBundle, bool)> {
        let key = OfflineKey::new(fine, coarse_n, region, model, family, params, l_snap, n_off);
        if let Some(path) = cache {
            if let Some(bundle) = OfflineBundle::load(path, fine, &key)? {
                return Ok((bundle, true));
            }
        }
        let bundle =
            OfflineBundle::build(fine, coarse_n, region, model, family, params, l_snap, n_off)?;
        if let Some(path) = cache {
            bundle.save(path)?;
        }
        Ok((bundle, false))
    }
}

/// Sparse triple product RL * A * RR' without forming dense intermediates.
pub fn project_system(rl: &SparseMatrix, a: &SparseMatrix, rr: &SparseMatrix) -> SparseMatrix {
    assert_eq!(rl.n_cols, a.n_rows, "left restriction does not match the operator");
    assert_eq!(a.n_cols, rr.n_cols, "right restriction does not match the operator");
    let mut col_rows: Vec<Vec<u32>> = vec![Vec::new(); rr.n_cols];
    for j in 0..rr.n_rows {
        for &c in rr.row(j).0 {
            col_rows[c].push(j as u32);
        }
    }
    let mut w = vec![0.0; a.n_cols];
    let mut seen = vec![false; a.n_cols];
    let mut touched: Vec<usize> = Vec::new();
    let mut mark = vec![false; rr.n_rows];
    let mut cand: Vec<usize> = Vec::new();
    let mut trip = Vec::new();
    for i in 0..rl.n_rows {
        let (ks, vs) = rl.row(i);
        for (k, v) in ks.iter().zip(vs) {
            let (acols, avals) = a.row(*k);
            for (c, av) in acols.iter().zip(avals) {
                if !seen[*c] {
                    seen[*c] = true;
                    touched.push(*c);
                }
                w[*c] += v * av;
            }
        }
        for &c in &touched {
            for &j in &col_rows[c] {
                if !mark[j as usize] {
                    mark[j as usize] = true;
                    cand.push(j as usize);
                }
            }
        }
        for &j in &cand {
            let (rcols, rvals) = rr.row(j);
            let mut dot = 0.0;
            for (c, rv) in rcols.iter().zip(rvals) {
                dot += w[*c] * rv;
            }
            if dot != 0.0 {
                trip.push((i, j, dot));
            }
            mark[j] = false;
        }
        cand.clear();
        for &c in &touched {
            w[c] = 0.0;
            seen[c] = false;
        }
        touched.clear();
    }
    SparseMatrix::from_triplets(rl.n_rows, rr.n_rows, &mut trip, false)
}

/// Prolongation R' x_c, into a fine vector of length `r.n_cols`.
pub fn prolong(r: &SparseMatrix, xc: &[f64]) -> Vec<f64> {
    assert_eq!(xc.len(), r.n_rows);
    let mut out = vec![0.0; r.n_cols];
    for i in 0..r.n_rows {
        let (cols, vals) = r.row(i);
        for (c, v) in cols.iter().zip(vals) {
            out[*c] += v * xc[i];
        }
    }
    out
}

/// Online/runtime counters of one multiscale run.
#[derive(Clone, Debug, Default)]
pub struct MultiscaleDiagnostics {
    pub picard_counts: Vec<usize>,
    pub picard_residuals: Vec<Vec<f64>>,
    /// Logical online refresh requests (one per neighborhood per iterate).
    pub online_refreshes: usize,
    /// Neighborhood online spaces actually recomputed.
    pub online_rebuilds: usize,
    pub factorizations: usize,
    pub coarse_dim_pressure: usize,
    pub coarse_dim_displacement: usize,
    pub dropped_rows: usize,
}

impl MultiscaleDiagnostics {
    pub fn coarse_dim(&self) -> usize {
        self.coarse_dim_pressure + self.coarse_dim_displacement
    }
}

/// When the parameter-dependent online pressure spaces are recomputed.
/// Non-parametric permeability ignores the cadence: the spaces are built
/// once and reused either way.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RefreshCadence {
    /// Re-select the online spaces from the current iterate inside every
    /// Picard iteration.
    #[default]
    EveryIteration,
    /// Re-select once at the start of each time step, from the previous
    /// step's solution. Cheaper (one eigensolve sweep per step instead of
    /// per iteration) at the price of spaces lagging the iterate.
    PerStep,
}

impl RefreshCadence {
    pub fn parse(s: &str) -> Option<RefreshCadence> {
        match s.to_ascii_lowercase().as_str() {
            "iteration" => Some(RefreshCadence::EveryIteration),
            "step" => Some(RefreshCadence::PerStep),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RefreshCadence::EveryIteration => "iteration",
            RefreshCadence::PerStep => "step",
        }
    }
}

/// One multiscale run at fixed online dimensions, driven by the operators
/// of a fine problem and the offline spaces of a bundle.
pub struct MultiscaleSolver<'a> {
    pub fine: &'a FineProblem,
    pub bundle: &'a OfflineBundle,
    pub n_on_p: usize,
    pub n_on_u: usize,
    pub refresh: RefreshCadence,
}

/// Pieces that only change when the pressure spaces are re-selected.
struct PressureSpaces {
    r_p: SparseMatrix,
    g_c: SparseMatrix,
    d_c: SparseMatrix,
}

/// Pieces that change with the Picard iterate (B is frozen at it).
struct PressureOps {
    lu: SparseLu,
    /// R_p (S + tau B) g, subtracted from the projected pressure rhs.
    lift_term: Vec<f64>,
}

impl<'a> MultiscaleSolver<'a> {
    pub fn run(&self) -> Result<(SolutionHistory, MultiscaleDiagnostics)> {
        let fine = self.fine;
        let mesh = &fine.mesh;
        let cfg = &fine.cfg;
        let map = &self.bundle.map;
        if map.fine_cell_to_coarse.len() != mesh.n_cells() {
            return Err(Error::Config(
                "offline bundle was built for a different fine mesh".into(),
            ));
        }
        if self.n_on_p == 0 || self.n_on_u == 0 {
            return Err(Error::Config("online dimensions must be at least 1".into()));
        }
        let n = mesh.n_nodes();
        let n_nb = map.neighborhoods.len();
        let parametric = fine.model.k_is_parametric();
        let lift = cfg.bc.pressure_lift(mesh);
        let left = mesh.boundary_nodes(BoundaryTag::Left);
        let bottom = mesh.boundary_nodes(BoundaryTag::Bottom);
        let mut dirichlet_p = mesh.boundary_nodes(BoundaryTag::Top);
        dirichlet_p.extend(mesh.boundary_nodes(BoundaryTag::Bottom));

        let mut diag = MultiscaleDiagnostics::default();

        // displacement side: parameter-free, assembled once per run
        let mut mech_spaces = Vec::with_capacity(n_nb);
        for (i, nb) in map.neighborhoods.iter().enumerate() {
            mech_spaces.push(mech::online_space(
                mesh,
                nb,
                &fine.region,
                &fine.model,
                &self.bundle.mech[i],
                self.n_on_u,
            )?);
        }
        let (r_u, dropped_u) =
            mech::assemble_restriction(mesh, map, &self.bundle.pou, &mech_spaces, &left, &bottom);
        diag.dropped_rows += dropped_u;
        diag.coarse_dim_displacement = r_u.n_rows;
        let a_c = project_system(&r_u, &fine.a, &r_u);
        let g_lift = fine.g.mul_vec(&lift);
        let rhs1: Vec<f64> = r_u
            .mul_vec(&g_lift)
            .into_iter()
            .map(|v| -cfg.coupling_sign * v)
            .collect();

        let mut spaces: Option<PressureSpaces> = None;
        let mut ops: Option<PressureOps> = None;
        let mut states = vec![PoroState {
            t: 0.0,
            p: vec![cfg.p_init; n],
            u: vec![0.0; 2 * n],
        }];

        for step in 1..=cfg.steps {
            let pn = states[step - 1].p.clone();
            let mut guess = pn.clone();
            let mut u_latest = vec![0.0; 2 * n];
            let mut trace = Vec::new();
            let mut converged = false;
            while trace.len() < cfg.picard_max {
                let requested = match self.refresh {
                    RefreshCadence::EveryIteration => true,
                    RefreshCadence::PerStep => trace.is_empty(),
                };
                if requested {
                    diag.online_refreshes += n_nb;
                }
                if spaces.is_none() || (parametric && requested) {
                    let mut per_nb = Vec::with_capacity(n_nb);
                    for (i, nb) in map.neighborhoods.iter().enumerate() {
                        let p_bar = average_over(mesh, &nb.fine_cells, &guess);
                        per_nb.push(pressure::online_space(
                            mesh,
                            nb,
                            &fine.region,
                            &fine.model,
                            &self.bundle.pressure[i],
                            p_bar,
                            self.n_on_p,
                        )?);
                    }
                    diag.online_rebuilds += n_nb;
                    let (r_p, dropped_p) = pressure::assemble_restriction(
                        mesh,
                        map,
                        &self.bundle.pou,
                        &per_nb,
                        &dirichlet_p,
                    );
                    diag.dropped_rows += dropped_p;
                    diag.coarse_dim_pressure = r_p.n_rows;
                    let g_c = project_system(&r_u, &fine.g, &r_p);
                    let d_c = project_system(&r_p, &fine.d, &r_u);
                    spaces = Some(PressureSpaces { r_p, g_c, d_c });
                    ops = None;
                }
                let sp_ref = spaces.as_ref().expect("spaces just built");
                if ops.is_none() || parametric {
                    let k = fine.k_per_cell(&guess)?;
                    let b = pressure_stiffness(mesh, &k);
                    let spb = fine.s.add_scaled(1.0, &b, cfg.tau);
                    let spb_c = project_system(&sp_ref.r_p, &spb, &sp_ref.r_p);
                    let block =
                        compose_block(&a_c, &sp_ref.g_c, &sp_ref.d_c, &spb_c, cfg.coupling_sign);
                    let lu = SparseLu::factor(&block)?;
                    diag.factorizations += 1;
                    let lift_term = sp_ref.r_p.mul_vec(&spb.mul_vec(&lift));
                    ops = Some(PressureOps { lu, lift_term });
                }
                let o = ops.as_ref().expect("operators just built");
                let sp = fine.s.mul_vec(&pn);
                let z: Vec<f64> = (0..n).map(|i| cfg.tau * fine.f[i] + sp[i]).collect();
                let mut rhs2 = sp_ref.r_p.mul_vec(&z);
                for (r, l) in rhs2.iter_mut().zip(&o.lift_term) {
                    *r -= l;
                }
                let mut rhs = rhs1.clone();
                rhs.extend_from_slice(&rhs2);
                let x = o.lu.solve(&rhs);
                let (u_c, p_c) = x.split_at(r_u.n_rows);
                let mut p_new = prolong(&sp_ref.r_p, p_c);
                for (p, l) in p_new.iter_mut().zip(&lift) {
                    *p += l;
                }
                u_latest = prolong(&r_u, u_c);
                let resid = fine.pressure_distance(&p_new, &guess);
                trace.push(resid);
                guess = p_new;
                if resid <= cfg.picard_tol {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::Numerical(format!(
                    "coarse Picard loop exceeded {} iterations at step {step}; residuals {:?}",
                    cfg.picard_max, trace
                )));
            }
            diag.picard_counts.push(trace.len());
            diag.picard_residuals.push(trace);
            states.push(PoroState {
                t: step as f64 * cfg.tau,
                p: guess,
                u: u_latest,
            });
        }
        let history = SolutionHistory {
            states,
            picard_counts: diag.picard_counts.clone(),
            picard_residuals: diag.picard_residuals.clone(),
        };
        Ok((history, diag))
    }
}
