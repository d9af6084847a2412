//! Loads a two-region geometry (a file path may be given as the first
//! argument, otherwise the built-in one), rasterizes it on the fine grid
//! and reports region coverage plus the permeability each law assigns.

use std::env;
use std::path::Path;

use poromulti::fields::{default_geometry, CoefficientModel, GeometrySpec, PermeabilityLaw};
use poromulti::mesh::TriMesh;

fn main() {
    let geometry = match env::args().nth(1) {
        Some(p) => GeometrySpec::read(Path::new(&p)).unwrap(),
        None => default_geometry(),
    };
    println!(
        "geometry: {} circle(s), {} rectangle(s)",
        geometry.circles.len(),
        geometry.rects.len()
    );

    let fine = TriMesh::structured(60).unwrap();
    let region = geometry.region_per_cell(&fine);
    let n2 = region.iter().filter(|&&r| r == 2).count();
    println!(
        "fine 60x60 grid: {} cells, {} in the inclusions ({:.1}% by area)",
        region.len(),
        n2,
        100.0 * geometry.inclusion_fraction(&fine)
    );

    for law in [PermeabilityLaw::Linear, PermeabilityLaw::ExpPressure] {
        let model = CoefficientModel::with_law(law);
        println!("\nlaw {}:", law.as_str());
        for p_bar in [0.0, 0.5, 1.0] {
            let k1 = model.permeability(1, p_bar).unwrap();
            let k2 = model.permeability(2, p_bar).unwrap();
            println!(
                "  p_bar = {p_bar:.1}:  K(background) = {k1:>12.5e}  K(inclusion) = {k2:>12.5e}  contrast = {:.3e}",
                k2 / k1
            );
        }
        let (l1, m1) = model.lame(1);
        let (l2, m2) = model.lame(2);
        println!("  lame background (lambda, mu) = ({l1:.4}, {m1:.4}), inclusion = ({l2:.4}, {m2:.4})");
    }
}
