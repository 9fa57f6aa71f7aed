//! The immersed projection space: gradient jump matrices of an interface
//! frame, exact value/flux continuity of its functions, and the patch
//! quasi-interpolant that lands in the space.
//!
//! ```bash
//! cargo run --release -p polyvem --example immersed_space
//! ```

use nalgebra::{Matrix3, Point3, Vector3};
use polyvem::boundary::BoundaryTriangulation;
use polyvem::geometry::{tetrahedralize, Plane, Polyhedron};
use polyvem::spaces::{quasi_interpolant, IfeFrame, Side, WhFunction};

fn main() {
    let plane = Plane::new(Vector3::new(0.3, -0.2, 1.0), 0.4);
    let frame = IfeFrame::new(plane, Point3::origin(), 1.0, 50.0);

    println!("interface frame with beta- = 1, beta+ = 50:");
    println!(
        "  M+ M- deviates from identity by {:.2e}",
        (frame.m_plus * frame.m_minus - Matrix3::identity()).norm()
    );

    let w = WhFunction::Ife {
        p_minus: Vector3::new(1.0, -0.5, 2.0),
        value: 0.75,
        frame: frame.clone(),
    };
    // pick a point on the plane and compare the two one-sided limits
    let x = frame.x_k + frame.t1 * 0.31 - frame.t2 * 0.12;
    let (vm, gm) = w.eval(&x, Side::Minus);
    let (vp, gp) = w.eval(&x, Side::Plus);
    let n = frame.plane.normal();
    println!("  value jump on the plane:      {:.2e}", (vm - vp).abs());
    println!(
        "  flux jump beta dn(u) on plane: {:.2e}",
        (frame.beta_minus * gm.dot(n) - frame.beta_plus * gp.dot(n)).abs()
    );
    println!(
        "  tangential gradient jump:      {:.2e}",
        ((gm - gp) - n * (gm - gp).dot(n)).norm()
    );

    // the quasi-interpolant reproduces members of the space from their
    // minus-side branch alone
    let patch = Polyhedron::cuboid(Point3::new(-1.0, -1.0, -1.0), Point3::new(1.0, 1.0, 1.0));
    let tri = BoundaryTriangulation::of_polyhedron(&patch).unwrap();
    let tets = tetrahedralize(&patch, &tri.triangle_indices()).unwrap();
    let minus_branch = {
        let w = w.clone();
        move |p: &Point3<f64>| w.eval(p, Side::Minus).0
    };
    let j = quasi_interpolant(&minus_branch, &frame, &tets).unwrap();
    let mut worst = 0.0f64;
    for k in 0..100 {
        let t = k as f64 / 99.0;
        let p = Point3::new(2.0 * t - 1.0, (7.0 * t).sin(), (3.0 * t).cos() - 0.2);
        worst = worst.max((j.eval_auto(&p).0 - w.eval_auto(&p).0).abs());
    }
    println!("  quasi-interpolant reproduction error: {worst:.2e}");
}
