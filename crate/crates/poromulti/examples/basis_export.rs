//! Builds the offline spaces for one interior coarse neighborhood and
//! exports the basis columns as CSV so they can be plotted or inspected.

use std::fs;
use std::io::Write as _;

use poromulti::fields::{default_geometry, CoefficientModel, PermeabilityLaw};
use poromulti::gmsfem::{mech, pressure, SnapshotFamily};
use poromulti::mesh::{build_neighborhoods, TriMesh};

fn main() {
    let fine = TriMesh::structured(16).unwrap();
    let coarse = TriMesh::structured(4).unwrap();
    let geometry = default_geometry();
    let region = geometry.region_per_cell(&fine);
    let model = CoefficientModel::with_law(PermeabilityLaw::ExpPressure);
    let map = build_neighborhoods(&coarse, &fine).unwrap();

    // Central coarse node: largest neighborhood, farthest from the boundary.
    let nb = map
        .neighborhoods
        .iter()
        .min_by(|a, b| {
            let d = |n: &poromulti::mesh::Neighborhood| {
                let [x, y] = coarse.nodes[n.coarse_node];
                (x - 0.5_f64).hypot(y - 0.5)
            };
            d(a).total_cmp(&d(b))
        })
        .unwrap();
    let [cx, cy] = coarse.nodes[nb.coarse_node];
    println!(
        "neighborhood of coarse node {} at ({cx:.2}, {cy:.2}): {} fine nodes, {} fine cells",
        nb.coarse_node,
        nb.fine_nodes.len(),
        nb.fine_cells.len()
    );

    let params: Vec<f64> = (0..21).map(|i| i as f64 / 20.0).collect();
    let n_off = 16;
    let pb = pressure::offline_space(
        &fine,
        nb,
        &region,
        &model,
        SnapshotFamily::Harmonic,
        &params,
        16,
        n_off,
    )
    .unwrap();
    let mb =
        mech::offline_space(&fine, nb, &region, &model, SnapshotFamily::Harmonic, 16, n_off)
            .unwrap();

    println!("\npressure offline eigenvalues (ascending):");
    for (i, ev) in pb.eigenvalues.iter().enumerate() {
        println!("  {:2}  {ev:.6e}", i + 1);
    }
    println!("displacement offline eigenvalues (ascending):");
    for (i, ev) in mb.eigenvalues.iter().enumerate() {
        println!("  {:2}  {ev:.6e}", i + 1);
    }

    fs::create_dir_all("target/basis_export").unwrap();
    let path = "target/basis_export/pressure_basis.csv";
    let mut out = String::new();
    out.push_str("node,x,y");
    for j in 0..pb.columns.ncols() {
        out.push_str(&format!(",phi{j}"));
    }
    out.push('\n');
    for (local, &global) in nb.fine_nodes.iter().enumerate() {
        let [x, y] = fine.nodes[global];
        out.push_str(&format!("{global},{x:.6},{y:.6}"));
        for j in 0..pb.columns.ncols() {
            out.push_str(&format!(",{:.10e}", pb.columns[(local, j)]));
        }
        out.push('\n');
    }
    let mut f = fs::File::create(path).unwrap();
    f.write_all(out.as_bytes()).unwrap();

    let mpath = "target/basis_export/displacement_basis.csv";
    let mut mout = String::new();
    mout.push_str("node,x,y");
    for j in 0..mb.columns.ncols() {
        mout.push_str(&format!(",ux{j},uy{j}"));
    }
    mout.push('\n');
    for (local, &global) in nb.fine_nodes.iter().enumerate() {
        let [x, y] = fine.nodes[global];
        mout.push_str(&format!("{global},{x:.6},{y:.6}"));
        for j in 0..mb.columns.ncols() {
            let ux = mb.columns[(2 * local, j)];
            let uy = mb.columns[(2 * local + 1, j)];
            mout.push_str(&format!(",{ux:.10e},{uy:.10e}"));
        }
        mout.push('\n');
    }
    let mut f = fs::File::create(mpath).unwrap();
    f.write_all(mout.as_bytes()).unwrap();

    println!("\nwrote {path} ({} columns)", pb.columns.ncols());
    println!("wrote {mpath} ({} columns)", mb.columns.ncols());
}
