//! The per-element discrete Poincaré inequality with its explicit constant:
//! the worst-case ratio ‖v − mean v‖/(|v|₁) on the element boundary against
//! the bound √5 κ h_K √N_T, on progressively nastier cut pieces.
//!
//! ```bash
//! cargo run --release -p polyvem --example poincare_bound
//! ```

use nalgebra::{Point3, Vector3};
use polyvem::boundary::{check_a2, poincare_probe, BoundaryTriangulation};
use polyvem::geometry::{cut_cuboid_by_plane, Plane, Polyhedron};

fn main() {
    let cube = Polyhedron::cuboid(Point3::origin(), Point3::new(1.0, 1.0, 1.0));
    println!("{:<38} {:>9} {:>9} {:>9} {:>7}", "element", "ratio", "bound", "kappa", "N_T");

    let show = |name: &str, poly: &Polyhedron| {
        let tri = BoundaryTriangulation::of_polyhedron(poly).unwrap();
        // smallest path-condition epsilon from a short ladder
        let eps = [1.0, 2.0, 4.0, 8.0, 16.0]
            .into_iter()
            .find(|&e| check_a2(&tri, e).is_some())
            .expect("path condition");
        let probe = poincare_probe(poly, &tri, eps).unwrap();
        println!(
            "{:<38} {:>9.4} {:>9.4} {:>9.4} {:>7}",
            name,
            probe.ratio,
            probe.bound,
            probe.kappa,
            tri.n_triangles()
        );
        assert!(probe.ratio <= probe.bound);
    };

    show("unit cube", &cube);

    for (name, plane) in [
        ("half cube (z = 1/2)", Plane::new(Vector3::z(), 0.5)),
        ("plate of thickness 1e-3", Plane::new(Vector3::z(), 1e-3)),
        ("plate of thickness 1e-6", Plane::new(Vector3::z(), 1e-6)),
        (
            "corner sliver (diagonal at 1e-3)",
            Plane::new(Vector3::new(1.0, 1.0, 1.0), 1e-3),
        ),
        (
            "oblique cut through the middle",
            Plane::new(Vector3::new(0.4, -0.3, 1.0), 0.45),
        ),
    ] {
        let (minus, plus) = cut_cuboid_by_plane(&cube, &plane);
        if let Some(piece) = minus {
            show(&format!("{name}, minus piece"), &piece);
        }
        if let Some(piece) = plus {
            show(&format!("{name}, plus piece"), &piece);
        }
    }
}
