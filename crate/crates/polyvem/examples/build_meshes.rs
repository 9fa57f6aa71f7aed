//! Build the two mesh families from the squircle level set — fitted (cut
//! pieces become elements) and unfitted (whole cuboids tagged with a local
//! interface plane) — and round-trip the plain-text export.
//!
//! ```bash
//! cargo run --release -p polyvem --example build_meshes
//! ```

use polyvem::mesh::{
    build_fitted, build_unfitted, cartesian_background, read_mesh, write_mesh, BoundingBox,
    LevelSet,
};

fn main() {
    let domain = BoundingBox::symmetric_unit();
    let background = cartesian_background(8, &domain);

    for eps in [1e-1, 1e-6] {
        let ls = LevelSet::squircle(eps);
        let fitted = build_fitted(&background, &ls).unwrap();
        let unfitted = build_unfitted(&background, &ls).unwrap();

        let min_volume = fitted
            .elements
            .iter()
            .map(|e| e.poly.volume())
            .fold(f64::INFINITY, f64::min);
        println!("eps = {eps:.0e}:");
        println!(
            "  fitted:   {} elements ({} from cut cells), volume sum {:.12}, min piece volume {:.3e}",
            fitted.n_elements(),
            fitted.interface_elements.len(),
            fitted.volume_sum(),
            min_volume
        );
        println!(
            "  unfitted: {} elements ({} carry an interface plane), {} vertices ({} shared cut vertices)",
            unfitted.n_elements(),
            unfitted.interface_elements.len(),
            unfitted.n_vertices(),
            unfitted.n_vertices() - background.n_vertices(),
        );

        // the text format round-trips exactly
        let text = write_mesh(&unfitted);
        let back = read_mesh(&text).unwrap();
        assert_eq!(back, unfitted);
        println!(
            "  export round-trip: {} bytes, re-import identical",
            text.len()
        );
    }
}
