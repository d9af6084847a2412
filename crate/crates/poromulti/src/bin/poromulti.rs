use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use poromulti::config::ExperimentConfig;
use poromulti::fields::PermeabilityLaw;
use poromulti::gmsfem::SnapshotFamily;
use poromulti::{experiment, vtk, Error};
use std::path::PathBuf;
use std::process::ExitCode;

/// Poroelasticity multiscale solver: fine reference runs and generalized
/// multiscale sweeps driven by a flat key=value config file.
#[derive(Parser)]
#[command(name = "poromulti", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full experiment: fine reference, offline spaces, enrichment sweep.
    Run {
        /// Config file (key = value lines).
        #[arg(long)]
        config: PathBuf,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the permeability law (linear | nonlinear).
        #[arg(long)]
        law: Option<String>,
        /// Override the snapshot family (harmonic | spectral).
        #[arg(long)]
        snapshot: Option<String>,
    },
    /// Fine reference run only; writes one state file per time step.
    Fine {
        #[arg(long)]
        config: PathBuf,
    },
    /// Convert a state file to a legacy VTK file.
    Export {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        vtk: PathBuf,
    },
}

fn execute(cli: Cli) -> poromulti::Result<()> {
    match cli.command {
        Command::Run {
            config,
            out,
            law,
            snapshot,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(out) = out {
                cfg.out_dir = out;
            }
            if let Some(law) = law {
                cfg.law = match law.to_ascii_lowercase().as_str() {
                    "nonlinear" => PermeabilityLaw::ExpPressure,
                    other => PermeabilityLaw::parse(other).ok_or_else(|| {
                        Error::Config(format!("--law must be linear or nonlinear, got '{law}'"))
                    })?,
                };
            }
            if let Some(snapshot) = snapshot {
                cfg.snapshot = SnapshotFamily::parse(&snapshot).ok_or_else(|| {
                    Error::Config(format!(
                        "--snapshot must be harmonic or spectral, got '{snapshot}'"
                    ))
                })?;
            }
            cfg.validate()?;
            let report = experiment::run_experiment(&cfg)?;
            println!(
                "fine reference: dim {} over {} steps; law {}, snapshot {}",
                report.fine_dim,
                cfg.steps,
                cfg.law.as_str(),
                cfg.snapshot.as_str()
            );
            for sweep in &report.sweeps {
                println!(
                    "coarse {}x{} ({} nodes):",
                    sweep.coarse_n, sweep.coarse_n, sweep.coarse_nodes
                );
                println!("  n_on_p n_on_u    dim   eps_p_L2   eps_p_H1   eps_u_L2   eps_u_H1");
                for row in &sweep.rows {
                    let e = &row.final_errors;
                    println!(
                        "  {:6} {:6} {:6}   {:8.5}   {:8.5}   {:8.5}   {:8.5}",
                        row.n_on_p, row.n_on_u, row.dim, e.p_l2, e.p_h1, e.u_l2, e.u_h1
                    );
                }
            }
            println!("artifacts in {}", cfg.out_dir.display());
            Ok(())
        }
        Command::Fine { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let history = experiment::run_fine_only(&cfg)?;
            println!(
                "fine run finished: {} states, Picard counts {:?}",
                history.states.len(),
                history.picard_counts
            );
            println!("states in {}", cfg.out_dir.display());
            Ok(())
        }
        Command::Export { state, vtk: out } => {
            let (mesh, p, u) = vtk::read_state(&state)?;
            vtk::export_vtk(&mesh, &p, &u, &out)?;
            println!("wrote {}", out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        // Bad flags are configuration errors, same exit code as a bad file.
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Config(_)) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
    }
}
