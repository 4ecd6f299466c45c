//! The shear as a non-ergodic control: functions of `p` are invariant, so
//! `S₂(cos p)` does not decay and the spectral measure keeps an atom at 0.
//!
//! `cargo run --release --example shear_control`

use qergo::models::{family_sweep, Diagnostic, ModelFamily, ObservableSpec, SweepOptions};

fn main() -> qergo::Result<()> {
    let family = ModelFamily::shear(vec![64, 128, 256])
        .with_observable(ObservableSpec::symbol("cos_p"))
        .with_observable(ObservableSpec::symbol("cos_q"));
    let report = family_sweep(&family, &[Diagnostic::variance(), Diagnostic::SpectralMeasure], &SweepOptions::default())?;
    for s in &report.per_size {
        for o in &s.observables {
            let sm = o.spectral_measure.as_ref().unwrap();
            println!(
                "N = {:>3} {}: S₂ {:.3e}, atom at 0 {:.3e} vs |ω(A)|² {:.1e}",
                s.size,
                o.name,
                o.full_variance().unwrap_or(f64::NAN),
                sm.mass_at_zero,
                sm.target
            );
        }
    }
    for t in &report.trends {
        println!("trend {} {}: {:?}", t.observable, t.quantity, t.verdict);
    }
    Ok(())
}
