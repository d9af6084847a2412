//! Finite-element solver suite for nonlinear Biot-type poroelasticity in 2D,
//! with a fine-grid reference solver and a generalized multiscale method
//! (parametric offline/online spectral basis construction on coarse
//! neighborhoods).
//!
//! The crate is organized as a library; the `examples/` directory is the
//! primary tour of its capabilities:
//!
//! - `cargo run --release --example convergence_study` - manufactured-solution
//!   convergence and the elasticity patch test on the fine assembly.
//! - `cargo run --release --example fine_reference` - fine-grid reference run
//!   of the coupled nonlinear system with Picard iteration counts.
//! - `cargo run --release --example multiscale_demo` - one offline/online
//!   multiscale solve compared against the fine reference.
//! - `cargo run --release --example enrichment_sweep` - error tables over
//!   online-space sizes, the decay experiment at desk scale.
//! - `cargo run --release --example basis_export` - build a multiscale basis
//!   and export inspectable artifacts.
//! - `cargo run --release --example geometry_report` - region breakdown of a
//!   permeability geometry on the fine mesh.
//!
//! A thin `poromulti` binary exposes the same machinery as a CLI
//! (`run`, `fine`, `export` subcommands).

pub mod assembly;
pub mod config;
pub mod experiment;
pub mod fields;
pub mod gmsfem;
pub mod mesh;
pub mod metrics;
pub mod numerics;
pub mod solver_coarse;
pub mod solver_fine;
pub mod vtk;

/// Crate-wide error type. The CLI maps `Config` to exit code 1 and the
/// rest to exit code 2.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),
    #[error("mesh error: {0}")]
    Mesh(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
