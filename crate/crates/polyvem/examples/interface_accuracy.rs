//! How far the discrete interface sits from the true zero set: the δ-strip
//! report per level and the fitted exponent of δ̂ against h (second order for
//! smooth level sets).
//!
//! ```bash
//! cargo run --release -p polyvem --example interface_accuracy
//! ```

use polyvem::mesh::{delta_strip_sweep, BoundingBox, LevelSet, MeshKind};

fn main() {
    let domain = BoundingBox::symmetric_unit();
    for (ls, label) in [
        (LevelSet::squircle(1e-1), "squircle eps=1e-1"),
        (LevelSet::squircle(1e-6), "squircle eps=1e-6"),
        (LevelSet::sphere(0.6), "sphere r=0.6"),
    ] {
        for kind in [MeshKind::Fitted, MeshKind::Unfitted] {
            let reports = delta_strip_sweep(&ls, kind, &[8, 16, 32], &domain, 25).unwrap();
            print!("{label:>18} {kind:?}: ");
            for r in &reports {
                print!("delta(h={:.4}) = {:.3e}  ", r.h, r.delta_hat);
            }
            println!(
                "fitted exponent {:.2}",
                reports[0].fitted_exponent.unwrap_or(f64::NAN)
            );
        }
    }
}
