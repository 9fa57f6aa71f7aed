//! Plane-cutting primitives: split a cube, clip a tetrahedron, decompose a
//! polyhedron into quadrature tets, and measure inscribed balls.
//!
//! ```bash
//! cargo run --release -p polyvem --example cut_geometry
//! ```

use nalgebra::{Point3, Vector3};
use polyvem::boundary::BoundaryTriangulation;
use polyvem::geometry::{
    clip_tet_by_plane, cut_cuboid_by_plane, inscribed_ball_radius, tetrahedralize, Plane,
    Polyhedron, Tetrahedron,
};

fn main() {
    let cube = Polyhedron::cuboid(Point3::origin(), Point3::new(1.0, 1.0, 1.0));

    // corner cut: a tetrahedron of volume 1/48 comes off
    let plane = Plane::new(Vector3::new(1.0, 1.0, 1.0), 0.5);
    let (minus, plus) = cut_cuboid_by_plane(&cube, &plane);
    let (minus, plus) = (minus.unwrap(), plus.unwrap());
    println!(
        "corner cut: |minus| = {:.12} (exact 1/48 = {:.12}), |plus| = {:.12}",
        minus.volume(),
        1.0 / 48.0,
        plus.volume()
    );
    minus.validate().unwrap();
    plus.validate().unwrap();
    println!(
        "            both pieces close up; diameters {:.6} / {:.6}",
        minus.diameter(),
        plus.diameter()
    );

    // grazing planes snap: a cut within 1e-13 of a corner leaves the cube whole
    let grazing = Plane::new(Vector3::new(1.0, 1.0, 1.0), 1e-13);
    let (m, p) = cut_cuboid_by_plane(&cube, &grazing);
    println!(
        "grazing cut: minus {} / plus {}",
        if m.is_some() { "present" } else { "absent" },
        if p.is_some() { "present" } else { "absent" },
    );

    // clipping a tetrahedron follows the case table
    let tet = Tetrahedron::new(
        Point3::origin(),
        Point3::new(1.0, 0.0, 0.0),
        Point3::new(0.0, 1.0, 0.0),
        Point3::new(0.0, 0.0, 1.0),
    );
    let (tm, tp) = clip_tet_by_plane(&tet, &Plane::new(Vector3::x(), 0.5));
    println!(
        "tet clip at x = 1/2: {} + {} sub-tets, volumes {:.12} + {:.12} (exact 7/48 + 1/48)",
        tm.len(),
        tp.len(),
        tm.iter().map(Tetrahedron::volume).sum::<f64>(),
        tp.iter().map(Tetrahedron::volume).sum::<f64>(),
    );

    // centroid-fan decomposition over the boundary triangulation
    let tri = BoundaryTriangulation::of_polyhedron(&cube).unwrap();
    let tets = tetrahedralize(&cube, &tri.triangle_indices()).unwrap();
    println!(
        "cube fans into {} tets of volume {:.6} each",
        tets.len(),
        tets[0].volume()
    );

    // inscribed balls (largest r with n·x + r <= d over all faces)
    for (name, poly) in [
        ("unit cube", cube.clone()),
        (
            "1 x 1 x 1e-4 slab",
            Polyhedron::cuboid(Point3::origin(), Point3::new(1.0, 1.0, 1e-4)),
        ),
        ("corner piece", minus),
    ] {
        println!(
            "inscribed ball of {name}: r = {:.6e}",
            inscribed_ball_radius(&poly).unwrap()
        );
    }
}
