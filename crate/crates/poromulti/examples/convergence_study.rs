//! Manufactured-solution checks of the fine assembly: a stationary
//! diffusion problem with a known smooth solution, and the linear-field
//! patch test for the elasticity block.

use poromulti::assembly::{
    apply_dirichlet, elasticity_stiffness, load_vector, pressure_stiffness, weighted_mass,
};
use poromulti::mesh::TriMesh;
use poromulti::numerics::solve_sparse;
use std::f64::consts::PI;

/// -div(grad p) = 2 pi^2 sin(pi x) sin(pi y), p = 0 on the boundary;
/// exact solution sin(pi x) sin(pi y). Returns the mass-norm L2 error of
/// the nodal interpolant difference.
fn diffusion_error(n: usize) -> f64 {
    let mesh = TriMesh::structured(n).unwrap();
    let ones = vec![1.0; mesh.n_cells()];
    let a = pressure_stiffness(&mesh, &ones);
    let mut rhs = load_vector(&mesh, |x| {
        2.0 * PI * PI * (PI * x[0]).sin() * (PI * x[1]).sin()
    });
    let constraints: Vec<(usize, f64)> = mesh.all_boundary_nodes().iter().map(|&i| (i, 0.0)).collect();
    let a = apply_dirichlet(&a, &mut rhs, &constraints).unwrap();
    let p = solve_sparse(&a, &rhs).unwrap();
    let diff: Vec<f64> = mesh
        .nodes
        .iter()
        .zip(&p)
        .map(|(x, &ph)| ph - (PI * x[0]).sin() * (PI * x[1]).sin())
        .collect();
    let mass = weighted_mass(&mesh, &ones);
    mass.quad_form(&diff, &diff).sqrt()
}

/// Clamps u = (x, 0) on the whole boundary with zero volume load; P1
/// elements reproduce the linear field exactly, so the interior must match
/// to solver precision.
fn patch_test_deviation(n: usize) -> f64 {
    let mesh = TriMesh::structured(n).unwrap();
    let lambda = vec![2.0; mesh.n_cells()];
    let mu = vec![1.0; mesh.n_cells()];
    let a = elasticity_stiffness(&mesh, &lambda, &mu);
    let mut rhs = vec![0.0; 2 * mesh.n_nodes()];
    let mut constraints = Vec::new();
    for &b in &mesh.all_boundary_nodes() {
        constraints.push((2 * b, mesh.nodes[b][0]));
        constraints.push((2 * b + 1, 0.0));
    }
    constraints.sort_unstable_by_key(|&(d, _)| d);
    let a = apply_dirichlet(&a, &mut rhs, &constraints).unwrap();
    let u = solve_sparse(&a, &rhs).unwrap();
    (0..mesh.n_nodes())
        .map(|i| {
            let ex = (u[2 * i] - mesh.nodes[i][0]).abs();
            let ey = u[2 * i + 1].abs();
            ex.max(ey)
        })
        .fold(0.0, f64::max)
}

fn main() {
    println!("stationary diffusion, exact solution sin(pi x) sin(pi y):");
    println!("{:>6} {:>12} {:>8}", "n", "L2 error", "ratio");
    let mut prev: Option<f64> = None;
    for n in [8, 16, 32, 64] {
        let e = diffusion_error(n);
        match prev {
            Some(p) => println!("{n:>6} {e:>12.4e} {:>8.3}", p / e),
            None => println!("{n:>6} {e:>12.4e} {:>8}", "-"),
        }
        prev = Some(e);
    }
    println!("(P1 elements: the ratio approaches 4 per mesh halving)");

    let dev = patch_test_deviation(16);
    println!("\nelasticity patch test, u = (x, 0) on n = 16: max deviation {dev:.3e}");
    assert!(dev < 1e-10, "patch test must be exact to solver precision");
}
