//! Flows generated by GUE matrices: semicircle check and variance decay of a
//! sign observable.
//!
//! `cargo run --release --example gue`

use qergo::linalg;
use qergo::models::{eigenvalue_fraction, family_sweep, gue_hamiltonian, semicircle_mass, Diagnostic, ModelFamily, ObservableSpec, SweepOptions};

fn main() -> qergo::Result<()> {
    let h = gue_hamiltonian(512, 7);
    let (vals, _) = linalg::hermitian_eigen(h.as_ref())?;
    println!(
        "fraction of eigenvalues in [−1, 1]: {:.4} (semicircle {:.4})",
        eigenvalue_fraction(&vals, -1.0, 1.0),
        semicircle_mass(-1.0, 1.0)
    );

    let family = ModelFamily::gue(vec![32, 64, 128, 256], 7).with_observable(ObservableSpec::builtin("sign_split"));
    let report = family_sweep(&family, &[Diagnostic::variance()], &SweepOptions::default())?;
    for s in &report.per_size {
        println!("N = {:>3}: S₂ {:.3e}", s.size, s.observables[0].full_variance().unwrap_or(f64::NAN));
    }
    if let Some(t) = report.trend("sign_split", "variance_s2") {
        println!("log-log slope {:?} ({:?})", t.slope, t.verdict);
    }
    Ok(())
}
