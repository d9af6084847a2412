//! Experiment orchestration: the fine reference run, offline bundles with
//! a disk cache, the multiscale enrichment sweep, and CSV emission.
//!
//! One experiment = one permeability law and one snapshot family swept
//! over every configured coarse grid and online-dimension pair. Artifacts
//! land under the configured output directory:
//!
//! - `config_echo.cfg` - the canonical form of the configuration that ran
//! - `table_c<n>.csv` - one final-time table per coarse grid (row layout
//!   of the published error tables)
//! - `errors_c<n>_p<P>_u<U>.csv` - per-step error curves per sweep row
//! - `offline/` - binary offline-space cache, reused across reruns
//! - `fine_final.vtk`, `ms_final_c<n>.vtk` - optional, `export_vtk = true`

use crate::config::ExperimentConfig;
use crate::fields::CoefficientModel;
use crate::mesh::TriMesh;
use crate::metrics::{error_report, ErrorReport};
use crate::solver_coarse::{MultiscaleDiagnostics, MultiscaleSolver, OfflineBundle, RefreshCadence};
use crate::solver_fine::{FineProblem, SolutionHistory};
use crate::{vtk, Error, Result};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// How many times each stage actually ran; the cache-reuse contract is
/// asserted against these.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StageCounters {
    pub fine_runs: usize,
    pub offline_builds: usize,
    pub offline_cache_hits: usize,
    pub multiscale_runs: usize,
}

/// One sweep row: online dimensions, emitted coarse dimension, final-time
/// errors, per-step error curve and solver diagnostics.
#[derive(Clone, Debug)]
pub struct TableRow {
    pub n_on_p: usize,
    pub n_on_u: usize,
    pub dim: usize,
    pub final_errors: ErrorReport,
    /// Errors at t = tau, 2 tau, ..., steps tau (the shared initial state
    /// is exact and omitted).
    pub per_step: Vec<ErrorReport>,
    pub diagnostics: MultiscaleDiagnostics,
}

/// All rows of one coarse grid.
#[derive(Clone, Debug)]
pub struct GridSweep {
    pub coarse_n: usize,
    pub coarse_nodes: usize,
    pub rows: Vec<TableRow>,
}

/// Everything a finished experiment produced, in memory.
pub struct ExperimentReport {
    pub fine: SolutionHistory,
    pub fine_dim: usize,
    pub sweeps: Vec<GridSweep>,
    pub counters: StageCounters,
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// Builds the fine problem an experiment runs against.
pub fn fine_problem(cfg: &ExperimentConfig) -> Result<FineProblem> {
    let mesh = TriMesh::structured(cfg.fine_n)?;
    let geometry = cfg.load_geometry()?;
    FineProblem::new(mesh, &geometry, CoefficientModel::with_law(cfg.law), cfg.solver_config())
}

fn offline_cache_path(cfg: &ExperimentConfig, coarse_n: usize) -> PathBuf {
    cfg.cache_dir().join(format!(
        "offline_c{coarse_n}_{}_{}_l{}_n{}.bin",
        cfg.law.as_str(),
        cfg.snapshot.as_str(),
        cfg.l_snap,
        cfg.n_off()
    ))
}

/// Loads or builds the offline bundle for one coarse grid, bumping the
/// matching counter.
pub fn offline_bundle(
    cfg: &ExperimentConfig,
    fine: &FineProblem,
    coarse_n: usize,
    counters: &mut StageCounters,
) -> Result<OfflineBundle> {
    create_dir(&cfg.cache_dir())?;
    let path = offline_cache_path(cfg, coarse_n);
    let (bundle, from_disk) = OfflineBundle::load_or_build(
        Some(&path),
        &fine.mesh,
        coarse_n,
        &fine.region,
        &fine.model,
        cfg.snapshot,
        &cfg.params(),
        cfg.l_snap,
        cfg.n_off(),
    )?;
    if from_disk {
        counters.offline_cache_hits += 1;
    } else {
        counters.offline_builds += 1;
    }
    Ok(bundle)
}

/// Runs one multiscale row and measures it against the fine history.
pub fn sweep_row(
    fine: &FineProblem,
    fine_history: &SolutionHistory,
    bundle: &OfflineBundle,
    n_on_p: usize,
    n_on_u: usize,
    refresh: RefreshCadence,
) -> Result<(TableRow, SolutionHistory)> {
    let solver = MultiscaleSolver {
        fine,
        bundle,
        n_on_p,
        n_on_u,
        refresh,
    };
    let (history, diagnostics) = solver.run()?;
    let mut per_step = Vec::with_capacity(history.states.len().saturating_sub(1));
    for (reference, approx) in fine_history.states.iter().zip(&history.states).skip(1) {
        per_step.push(error_report(fine, reference, approx)?);
    }
    let final_errors = *per_step
        .last()
        .ok_or_else(|| Error::Config("experiment needs at least one time step".into()))?;
    let row = TableRow {
        n_on_p,
        n_on_u,
        dim: diagnostics.coarse_dim(),
        final_errors,
        per_step,
        diagnostics,
    };
    Ok((row, history))
}

fn echo_line(cfg: &ExperimentConfig, coarse_n: usize, coarse_nodes: usize, fine_dim: usize) -> String {
    format!(
        "# poromulti table: fine_n={} coarse_n={coarse_n} coarse_nodes={coarse_nodes} \
         fine_dim={fine_dim} law={} snapshot={} l_snap={} n_param={} tau={} steps={}\n",
        cfg.fine_n,
        cfg.law.as_str(),
        cfg.snapshot.as_str(),
        cfg.l_snap,
        cfg.n_param,
        cfg.tau,
        cfg.steps
    )
}

fn table_csv(cfg: &ExperimentConfig, sweep: &GridSweep, fine_dim: usize) -> String {
    let mut s = echo_line(cfg, sweep.coarse_n, sweep.coarse_nodes, fine_dim);
    s.push_str("n_on_p,n_on_u,dim,eps_p_L2,eps_p_H1,eps_u_L2,eps_u_H1\n");
    for row in &sweep.rows {
        let e = &row.final_errors;
        let _ = writeln!(
            s,
            "{},{},{},{:.12e},{:.12e},{:.12e},{:.12e}",
            row.n_on_p, row.n_on_u, row.dim, e.p_l2, e.p_h1, e.u_l2, e.u_h1
        );
    }
    s
}

fn steps_csv(tau: f64, per_step: &[ErrorReport]) -> String {
    let mut s = String::from("t,eps_p_L2,eps_p_H1,eps_u_L2,eps_u_H1\n");
    for (k, e) in per_step.iter().enumerate() {
        let _ = writeln!(
            s,
            "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
            (k + 1) as f64 * tau,
            e.p_l2,
            e.p_h1,
            e.u_l2,
            e.u_h1
        );
    }
    s
}

/// Runs the full experiment and writes all artifacts under `cfg.out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    create_dir(&cfg.out_dir)?;
    std::fs::write(cfg.out_dir.join("config_echo.cfg"), cfg.format())?;

    let fine = fine_problem(cfg)?;
    let fine_history = fine.run()?;
    let mut counters = StageCounters {
        fine_runs: 1,
        ..StageCounters::default()
    };
    let fine_dim = 3 * fine.mesh.n_nodes();

    let mut sweeps = Vec::new();
    for &coarse_n in &cfg.coarse_n {
        let bundle = offline_bundle(cfg, &fine, coarse_n, &mut counters)?;
        let mut sweep = GridSweep {
            coarse_n,
            coarse_nodes: bundle.coarse.n_nodes(),
            rows: Vec::new(),
        };
        let mut last_history: Option<SolutionHistory> = None;
        for (n_on_p, n_on_u) in cfg.pairs() {
            let (row, history) = sweep_row(&fine, &fine_history, &bundle, n_on_p, n_on_u, cfg.refresh)?;
            counters.multiscale_runs += 1;
            std::fs::write(
                cfg.out_dir
                    .join(format!("errors_c{coarse_n}_p{n_on_p}_u{n_on_u}.csv")),
                steps_csv(cfg.tau, &row.per_step),
            )?;
            sweep.rows.push(row);
            last_history = Some(history);
        }
        std::fs::write(
            cfg.out_dir.join(format!("table_c{coarse_n}.csv")),
            table_csv(cfg, &sweep, fine_dim),
        )?;
        if cfg.export_vtk {
            // The richest row of the sweep represents the grid.
            if let Some(history) = &last_history {
                let s = history.final_state();
                vtk::export_vtk(
                    &fine.mesh,
                    &s.p,
                    &s.u,
                    &cfg.out_dir.join(format!("ms_final_c{coarse_n}.vtk")),
                )?;
            }
        }
        sweeps.push(sweep);
    }

    if cfg.export_vtk {
        let s = fine_history.final_state();
        vtk::export_vtk(&fine.mesh, &s.p, &s.u, &cfg.out_dir.join("fine_final.vtk"))?;
    }

    Ok(ExperimentReport {
        fine: fine_history,
        fine_dim,
        sweeps,
        counters,
    })
}

/// Runs only the fine reference solver and writes one state file per time
/// step (plus a VTK of the final state when configured).
pub fn run_fine_only(cfg: &ExperimentConfig) -> Result<SolutionHistory> {
    cfg.validate()?;
    create_dir(&cfg.out_dir)?;
    let fine = fine_problem(cfg)?;
    let history = fine.run()?;
    for (k, state) in history.states.iter().enumerate() {
        vtk::write_state(
            &fine.mesh,
            &state.p,
            &state.u,
            &cfg.out_dir.join(format!("fine_state_{k:02}.state")),
        )?;
    }
    if cfg.export_vtk {
        let s = history.final_state();
        vtk::export_vtk(&fine.mesh, &s.p, &s.u, &cfg.out_dir.join("fine_final.vtk"))?;
    }
    Ok(history)
}
