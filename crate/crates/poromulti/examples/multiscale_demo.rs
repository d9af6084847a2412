//! One multiscale solve against its fine reference: offline spaces on a
//! 5x5 coarse grid, online spaces refreshed through the Picard loop,
//! errors in the weighted norms.

use poromulti::fields::{default_geometry, CoefficientModel, PermeabilityLaw};
use poromulti::gmsfem::SnapshotFamily;
use poromulti::mesh::TriMesh;
use poromulti::metrics::error_report;
use poromulti::solver_coarse::{MultiscaleSolver, OfflineBundle, RefreshCadence};
use poromulti::solver_fine::{FineProblem, SolverConfig};

fn main() {
    let fine_n = 30;
    let coarse_n = 5;
    let (n_on_p, n_on_u) = (4, 8);

    let mesh = TriMesh::structured(fine_n).unwrap();
    let geometry = default_geometry();
    let model = CoefficientModel::with_law(PermeabilityLaw::ExpPressure);
    let problem = FineProblem::new(mesh, &geometry, model, SolverConfig::default()).unwrap();
    let fine_history = problem.run().unwrap();
    println!("fine run: dim {}, Picard counts {:?}", 3 * problem.mesh.n_nodes(), fine_history.picard_counts);

    let params: Vec<f64> = (0..=20).map(|j| j as f64 / 20.0).collect();
    let bundle = OfflineBundle::build(
        &problem.mesh,
        coarse_n,
        &problem.region,
        &problem.model,
        SnapshotFamily::Harmonic,
        &params,
        16,
        n_on_p.max(n_on_u) + 4,
    )
    .unwrap();
    println!(
        "offline spaces built for {} neighborhoods ({} parameter values)",
        bundle.map.neighborhoods.len(),
        params.len()
    );

    for refresh in [RefreshCadence::EveryIteration, RefreshCadence::PerStep] {
        let solver = MultiscaleSolver {
            fine: &problem,
            bundle: &bundle,
            n_on_p,
            n_on_u,
            refresh,
        };
        let (history, diag) = solver.run().unwrap();
        println!(
            "\nmultiscale run (refresh per {}): dim {} (pressure {} + displacement {}), Picard counts {:?}",
            refresh.as_str(),
            diag.coarse_dim(),
            diag.coarse_dim_pressure,
            diag.coarse_dim_displacement,
            diag.picard_counts
        );
        println!(
            "online spaces: {} refreshes, {} rebuilds, {} factorizations",
            diag.online_refreshes, diag.online_rebuilds, diag.factorizations
        );
        let e = error_report(&problem, fine_history.final_state(), history.final_state()).unwrap();
        println!("final-time errors (fraction of the weighted reference norm):");
        println!("  pressure      L2 {:.4e}   H1 {:.4e}", e.p_l2, e.p_h1);
        println!("  displacement  L2 {:.4e}   H1 {:.4e}", e.u_l2, e.u_h1);
    }
}
