//! Fine-grid reference solver for the coupled flow/deformation system.
//!
//! Each time step is an implicit Euler update of the pressure equation
//! coupled to quasi-static elasticity. Pressure-dependent permeability is
//! handled by a Picard loop that freezes the permeability at the previous
//! iterate; for pressure-independent laws the loop collapses after the
//! second iterate confirms a fixed point, and the factorization is shared
//! across the whole run.

use crate::assembly::{
    apply_dirichlet, compose_block, coupling_matrices, dirichlet_rhs, elasticity_stiffness,
    load_vector, pressure_stiffness, weighted_mass, BCSpec, DofMap, SparseMatrix,
};
use crate::fields::{CoefficientModel, GeometrySpec};
use crate::mesh::TriMesh;
use crate::numerics::SparseLu;
use crate::{Error, Result};

/// Time stepping and nonlinear iteration controls.
#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub tau: f64,
    pub steps: usize,
    /// Picard stop: mass-norm of the pressure update falls below this.
    pub picard_tol: f64,
    pub picard_max: usize,
    /// Uniform initial pressure.
    pub p_init: f64,
    pub bc: BCSpec,
    /// Sign toggle on both coupling blocks, +1 or -1.
    pub coupling_sign: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tau: 0.0055,
            steps: 10,
            picard_tol: 1e-5,
            picard_max: 50,
            p_init: 0.0,
            bc: BCSpec {
                p_top: 1.0,
                p_bottom: 0.0,
            },
            coupling_sign: 1.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::Config(format!("tau must be positive, got {}", self.tau)));
        }
        if self.steps == 0 {
            return Err(Error::Config("steps must be at least 1".into()));
        }
        if !(self.picard_tol > 0.0) {
            return Err(Error::Config("picard_tol must be positive".into()));
        }
        if self.picard_max == 0 {
            return Err(Error::Config("picard_max must be at least 1".into()));
        }
        if self.coupling_sign.abs() != 1.0 {
            return Err(Error::Config(format!(
                "coupling_sign must be +1 or -1, got {}",
                self.coupling_sign
            )));
        }
        Ok(())
    }
}

/// Solution snapshot at one time level. `u` is interleaved (ux, uy).
#[derive(Clone, Debug)]
pub struct PoroState {
    pub t: f64,
    pub p: Vec<f64>,
    pub u: Vec<f64>,
}

/// Full trajectory plus nonlinear iteration diagnostics. `states[0]` is the
/// initial condition; step k lives at `states[k]` with its Picard trace at
/// `picard_residuals[k-1]`.
#[derive(Clone, Debug)]
pub struct SolutionHistory {
    pub states: Vec<PoroState>,
    pub picard_counts: Vec<usize>,
    pub picard_residuals: Vec<Vec<f64>>,
}

impl SolutionHistory {
    pub fn final_state(&self) -> &PoroState {
        self.states.last().expect("history holds the initial state")
    }
}

/// Assembled operators for one problem instance. Everything except the
/// pressure stiffness is permeability-independent and built once.
pub struct FineProblem {
    pub mesh: TriMesh,
    pub model: CoefficientModel,
    pub cfg: SolverConfig,
    /// Material region per cell.
    pub region: Vec<u8>,
    /// Elasticity block, 2N x 2N.
    pub a: SparseMatrix,
    /// Pressure-gradient coupling, 2N x N, alpha included.
    pub g: SparseMatrix,
    /// Divergence coupling, N x 2N, alpha included.
    pub d: SparseMatrix,
    /// Storage matrix (1/M-weighted mass), N x N.
    pub s: SparseMatrix,
    /// Plain mass matrix, for iteration norms.
    pub mass: SparseMatrix,
    /// Source load vector on pressure dofs.
    pub f: Vec<f64>,
    pub constraints: Vec<(usize, f64)>,
}

/// One linearized coupled system: the block matrix before elimination (for
/// right-hand-side lifts) and the factorization of the eliminated matrix.
pub struct LinearizedSystem {
    pub block: SparseMatrix,
    pub lu: SparseLu,
}

impl FineProblem {
    pub fn new(
        mesh: TriMesh,
        geometry: &GeometrySpec,
        model: CoefficientModel,
        cfg: SolverConfig,
    ) -> Result<FineProblem> {
        model.validate()?;
        cfg.validate()?;
        let region = geometry.region_per_cell(&mesh);
        let mut lambda = Vec::with_capacity(mesh.n_cells());
        let mut mu = Vec::with_capacity(mesh.n_cells());
        let mut inv_m = Vec::with_capacity(mesh.n_cells());
        for &r in &region {
            let (l, m) = model.lame(r);
            lambda.push(l);
            mu.push(m);
            inv_m.push(model.inv_biot_modulus(r));
        }
        let a = elasticity_stiffness(&mesh, &lambda, &mu);
        let (g, d) = coupling_matrices(&mesh, model.alpha);
        let s = weighted_mass(&mesh, &inv_m);
        let ones = vec![1.0; mesh.n_cells()];
        let mass = weighted_mass(&mesh, &ones);
        let f = vec![0.0; mesh.n_nodes()];
        let constraints = cfg.bc.coupled_constraints(&mesh);
        Ok(FineProblem {
            mesh,
            model,
            cfg,
            region,
            a,
            g,
            d,
            s,
            mass,
            f,
            constraints,
        })
    }

    /// Replaces the zero source with the load vector of `f`.
    pub fn set_source(&mut self, f: impl Fn([f64; 2]) -> f64) {
        self.f = load_vector(&self.mesh, f);
    }

    /// Per-cell permeability at the given nodal pressure iterate, evaluated
    /// at the cell average (mean of the three vertex values).
    pub fn k_per_cell(&self, p: &[f64]) -> Result<Vec<f64>> {
        let mut k = Vec::with_capacity(self.mesh.n_cells());
        for (c, cell) in self.mesh.cells.iter().enumerate() {
            let p_bar = (p[cell[0]] + p[cell[1]] + p[cell[2]]) / 3.0;
            k.push(self.model.permeability(self.region[c], p_bar)?);
        }
        Ok(k)
    }

    /// Assembles and factors the coupled system with permeability frozen at
    /// the iterate `p_iter`.
    pub fn linearize(&self, p_iter: &[f64]) -> Result<LinearizedSystem> {
        let k = self.k_per_cell(p_iter)?;
        let b = pressure_stiffness(&self.mesh, &k);
        let spb = self.s.add_scaled(1.0, &b, self.cfg.tau);
        let block = compose_block(&self.a, &self.g, &self.d, &spb, self.cfg.coupling_sign);
        let mut probe = vec![0.0; block.n_rows];
        let eliminated = apply_dirichlet(&block, &mut probe, &self.constraints)?;
        let lu = SparseLu::factor(&eliminated)?;
        Ok(LinearizedSystem { block, lu })
    }

    /// Solves one implicit Euler update against the previous time level
    /// `p_time`, returning (u, p) at the new level.
    pub fn advance(&self, sys: &LinearizedSystem, p_time: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let dof = DofMap::new(&self.mesh);
        let n = dof.n_pressure();
        let mut rhs = vec![0.0; dof.n_coupled()];
        let sp = self.s.mul_vec(p_time);
        for i in 0..n {
            rhs[dof.coupled_p(i)] = self.cfg.tau * self.f[i] + sp[i];
        }
        dirichlet_rhs(&sys.block, &mut rhs, &self.constraints);
        let x = sys.lu.solve(&rhs);
        let u = x[..dof.n_displacement()].to_vec();
        let p = x[dof.n_displacement()..].to_vec();
        (u, p)
    }

    /// Mass norm of the difference of two nodal pressure fields.
    pub fn pressure_distance(&self, p1: &[f64], p2: &[f64]) -> f64 {
        let d: Vec<f64> = p1.iter().zip(p2).map(|(a, b)| a - b).collect();
        self.mass.quad_form(&d, &d).max(0.0).sqrt()
    }

    /// Runs the full time loop from the uniform initial pressure.
    pub fn run(&self) -> Result<SolutionHistory> {
        let n = self.mesh.n_nodes();
        let parametric = self.model.k_is_parametric();
        let mut shared: Option<LinearizedSystem> = None;
        let mut states = vec![PoroState {
            t: 0.0,
            p: vec![self.cfg.p_init; n],
            u: vec![0.0; 2 * n],
        }];
        let mut picard_counts = Vec::with_capacity(self.cfg.steps);
        let mut picard_residuals = Vec::with_capacity(self.cfg.steps);
        for step in 1..=self.cfg.steps {
            let pn = states[step - 1].p.clone();
            let mut guess = pn.clone();
            let mut u_latest = Vec::new();
            let mut trace = Vec::new();
            let mut converged = false;
            while trace.len() < self.cfg.picard_max {
                let fresh;
                let sys = if parametric {
                    fresh = self.linearize(&guess)?;
                    &fresh
                } else {
                    if shared.is_none() {
                        shared = Some(self.linearize(&guess)?);
                    }
                    shared.as_ref().expect("just fixed above")
                };
                let (u, p) = self.advance(sys, &pn);
                let resid = self.pressure_distance(&p, &guess);
                trace.push(resid);
                guess = p;
                u_latest = u;
                if resid <= self.cfg.picard_tol {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::Numerical(format!(
                    "Picard loop exceeded {} iterations at step {step}; residuals {:?}",
                    self.cfg.picard_max, trace
                )));
            }
            picard_counts.push(trace.len());
            picard_residuals.push(trace);
            states.push(PoroState {
                t: step as f64 * self.cfg.tau,
                p: guess,
                u: u_latest,
            });
        }
        Ok(SolutionHistory {
            states,
            picard_counts,
            picard_residuals,
        })
    }
}
