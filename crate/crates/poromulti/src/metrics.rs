//! Relative errors between a reference fine solution and an approximation,
//! in the nonlinearity-weighted norms of the problem.
//!
//! The permeability weight is frozen at the reference pressure (per-cell
//! vertex average), so both solutions are measured against the same
//! operator. Displacement errors use the (lambda + 2 mu) weight for L2 and
//! the elastic energy for H1.

use crate::assembly::{pressure_stiffness, vector_mass, weighted_mass};
use crate::solver_fine::{FineProblem, PoroState};
use crate::{Error, Result};

/// Relative errors of one state pair, all as fractions (not percent).
#[derive(Clone, Copy, Debug)]
pub struct ErrorReport {
    pub p_l2: f64,
    pub p_h1: f64,
    pub u_l2: f64,
    pub u_h1: f64,
}

/// Ratio of quadratic forms with the zero-denominator convention: a zero
/// denominator is only meaningful when the numerator vanishes too.
fn ratio(num: f64, den: f64, what: &str) -> Result<f64> {
    if den == 0.0 {
        if num == 0.0 {
            Ok(0.0)
        } else {
            Err(Error::Numerical(format!(
                "{what}: zero reference norm against a nonzero difference"
            )))
        }
    } else {
        Ok((num / den).max(0.0).sqrt())
    }
}

/// Relative (L2, H1) pressure errors in the permeability-weighted norms.
pub fn error_pressure(fine: &FineProblem, p_ref: &[f64], p_apx: &[f64]) -> Result<(f64, f64)> {
    let k = fine.k_per_cell(p_ref)?;
    let mass = weighted_mass(&fine.mesh, &k);
    let stiff = pressure_stiffness(&fine.mesh, &k);
    let diff: Vec<f64> = p_apx.iter().zip(p_ref).map(|(a, b)| a - b).collect();
    let l2 = ratio(
        mass.quad_form(&diff, &diff),
        mass.quad_form(p_ref, p_ref),
        "pressure L2",
    )?;
    let h1 = ratio(
        stiff.quad_form(&diff, &diff),
        stiff.quad_form(p_ref, p_ref),
        "pressure H1",
    )?;
    Ok((l2, h1))
}

/// Relative (L2, H1) displacement errors: weighted mass and elastic energy.
pub fn error_displacement(fine: &FineProblem, u_ref: &[f64], u_apx: &[f64]) -> Result<(f64, f64)> {
    let w: Vec<f64> = fine
        .region
        .iter()
        .map(|&r| fine.model.elastic_weight(r))
        .collect();
    let vmass = vector_mass(&fine.mesh, &w);
    let diff: Vec<f64> = u_apx.iter().zip(u_ref).map(|(a, b)| a - b).collect();
    let l2 = ratio(
        vmass.quad_form(&diff, &diff),
        vmass.quad_form(u_ref, u_ref),
        "displacement L2",
    )?;
    let h1 = ratio(
        fine.a.quad_form(&diff, &diff),
        fine.a.quad_form(u_ref, u_ref),
        "displacement H1",
    )?;
    Ok((l2, h1))
}

/// Errors of one approximate state against the reference state.
pub fn error_report(fine: &FineProblem, reference: &PoroState, approx: &PoroState) -> Result<ErrorReport> {
    let (p_l2, p_h1) = error_pressure(fine, &reference.p, &approx.p)?;
    let (u_l2, u_h1) = error_displacement(fine, &reference.u, &approx.u)?;
    Ok(ErrorReport {
        p_l2,
        p_h1,
        u_l2,
        u_h1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{CoefficientModel, GeometrySpec, PermeabilityLaw};
    use crate::mesh::TriMesh;
    use crate::solver_fine::SolverConfig;

    fn problem(law: PermeabilityLaw) -> FineProblem {
        let mesh = TriMesh::structured(6).unwrap();
        let geom = GeometrySpec::parse("circle 0.5 0.5 0.2\n").unwrap();
        let model = CoefficientModel::with_law(law);
        FineProblem::new(mesh, &geom, model, SolverConfig::default()).unwrap()
    }

    fn sample_fields(prob: &FineProblem) -> (Vec<f64>, Vec<f64>) {
        let p: Vec<f64> = prob
            .mesh
            .nodes
            .iter()
            .map(|n| (n[0] * 1.3 + 0.4 * n[1]).sin() + 0.2)
            .collect();
        let mut u = Vec::with_capacity(2 * prob.mesh.n_nodes());
        for n in &prob.mesh.nodes {
            u.push(n[0] * n[1] + 0.1);
            u.push(n[0] - 0.5 * n[1] * n[1]);
        }
        (p, u)
    }

    #[test]
    fn identical_fields_have_zero_error() {
        let prob = problem(PermeabilityLaw::ExpPressure);
        let (p, u) = sample_fields(&prob);
        let (l2, h1) = error_pressure(&prob, &p, &p).unwrap();
        assert_eq!((l2, h1), (0.0, 0.0));
        let (l2, h1) = error_displacement(&prob, &u, &u).unwrap();
        assert_eq!((l2, h1), (0.0, 0.0));
    }

    #[test]
    fn uniform_scaling_gives_exact_relative_error() {
        let prob = problem(PermeabilityLaw::ExpPressure);
        let (p, u) = sample_fields(&prob);
        let p_apx: Vec<f64> = p.iter().map(|v| 0.9 * v).collect();
        let (l2, h1) = error_pressure(&prob, &p, &p_apx).unwrap();
        assert!((l2 - 0.1).abs() < 1e-12, "L2 = {l2}");
        assert!((h1 - 0.1).abs() < 1e-12, "H1 = {h1}");
        let u_apx: Vec<f64> = u.iter().map(|v| 1.25 * v).collect();
        let (l2, h1) = error_displacement(&prob, &u, &u_apx).unwrap();
        assert!((l2 - 0.25).abs() < 1e-12);
        assert!((h1 - 0.25).abs() < 1e-12);
    }

    #[test]
    fn rigid_translation_is_invisible_in_energy() {
        let prob = problem(PermeabilityLaw::Linear);
        let (_, u) = sample_fields(&prob);
        let u_apx: Vec<f64> = u
            .iter()
            .enumerate()
            .map(|(i, v)| if i % 2 == 0 { v + 0.3 } else { v - 0.1 })
            .collect();
        let (l2, h1) = error_displacement(&prob, &u, &u_apx).unwrap();
        assert!(l2 > 1e-3, "translation must show up in L2: {l2}");
        assert!(h1 < 1e-7, "translation must vanish in energy: {h1}");
    }

    #[test]
    fn zero_reference_conventions() {
        let prob = problem(PermeabilityLaw::Linear);
        let zero = vec![0.0; prob.mesh.n_nodes()];
        let (l2, h1) = error_pressure(&prob, &zero, &zero).unwrap();
        assert_eq!((l2, h1), (0.0, 0.0));
        let mut nonzero = zero.clone();
        nonzero[7] = 1.0;
        assert!(error_pressure(&prob, &zero, &nonzero).is_err());
    }

    #[test]
    fn weight_freezes_at_reference_pressure() {
        // under the exponential law, swapping reference and approximation
        // changes the weight, so the error is not symmetric
        let prob = problem(PermeabilityLaw::ExpPressure);
        let (p, _) = sample_fields(&prob);
        let p2: Vec<f64> = p.iter().map(|v| v + 0.35).collect();
        let (a, _) = error_pressure(&prob, &p, &p2).unwrap();
        let (b, _) = error_pressure(&prob, &p2, &p).unwrap();
        assert!((a - b).abs() > 1e-6, "weights did not freeze: {a} vs {b}");
    }
}
