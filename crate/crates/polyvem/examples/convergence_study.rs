//! The full squircle benchmark: fitted VEM and unfitted IVEM, interface
//! offsets 1e-1 and 1e-6, levels N = 8, 16, 32, with error norms and
//! convergence rates (expected: first order in energy, second in L²).
//!
//! ```bash
//! cargo run --release -p polyvem --example convergence_study [max_n]
//! ```
//!
//! Pass `64` to extend the sweep one level (about a minute per method).

use polyvem::mesh::MeshKind;
use polyvem::study::{convergence_csv, run_convergence, Method, StudyConfig};

fn main() {
    let max_n: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(32);
    let mut n_list = vec![8, 16, 32];
    n_list.retain(|&n| n <= max_n);
    if max_n >= 64 {
        n_list.push(64);
    }

    for (method, kind) in [(Method::Vem, MeshKind::Fitted), (Method::Ivem, MeshKind::Unfitted)] {
        for eps in [1e-1, 1e-6] {
            let cfg = StudyConfig {
                method,
                kind,
                eps,
                n_list: n_list.clone(),
                ..StudyConfig::default()
            };
            let result = run_convergence(&cfg).unwrap();
            println!("{}", convergence_csv(&cfg, &result));
        }
    }
}
