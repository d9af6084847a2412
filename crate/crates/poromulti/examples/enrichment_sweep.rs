//! The error-decay experiment at desk scale: a full sweep over online
//! dimensions through the experiment driver, producing the same CSV
//! artifacts as the CLI.

use poromulti::config::ExperimentConfig;
use poromulti::experiment::run_experiment;
use poromulti::fields::PermeabilityLaw;
use poromulti::gmsfem::SnapshotFamily;

fn main() {
    let mut cfg = ExperimentConfig::default();
    cfg.fine_n = 24;
    cfg.coarse_n = vec![4];
    cfg.law = PermeabilityLaw::ExpPressure;
    cfg.snapshot = SnapshotFamily::Harmonic;
    cfg.n_on_p = vec![2, 4, 8];
    cfg.n_on_u = vec![4, 8];
    cfg.steps = 5;
    cfg.out_dir = "target/enrichment_sweep".into();
    cfg.offline_cache = Some("target/enrichment_sweep/offline".into());

    let report = run_experiment(&cfg).unwrap();
    for sweep in &report.sweeps {
        println!(
            "coarse {0}x{0} ({1} nodes), law {2}, snapshot {3}:",
            sweep.coarse_n,
            sweep.coarse_nodes,
            cfg.law.as_str(),
            cfg.snapshot.as_str()
        );
        println!(
            "  {:>6} {:>6} {:>6} {:>11} {:>11} {:>11} {:>11}",
            "N_on^p", "N_on^u", "dim", "eps_p L2", "eps_p H1", "eps_u L2", "eps_u H1"
        );
        for row in &sweep.rows {
            let e = &row.final_errors;
            println!(
                "  {:>6} {:>6} {:>6} {:>11.4e} {:>11.4e} {:>11.4e} {:>11.4e}",
                row.n_on_p, row.n_on_u, row.dim, e.p_l2, e.p_h1, e.u_l2, e.u_h1
            );
        }
    }
    println!(
        "\nstages: {} fine run(s), {} offline build(s), {} multiscale run(s)",
        report.counters.fine_runs, report.counters.offline_builds, report.counters.multiscale_runs
    );
    println!("CSV artifacts in {}", cfg.out_dir.display());
}
