//! Size sweep of the cat map: `S₂` decays with `N`, density-one extraction
//! succeeds, and the log-log trend is fitted.
//!
//! `cargo run --release --example cat_sweep`

use qergo::models::{family_sweep, Diagnostic, ModelFamily, ObservableSpec, SweepOptions};

fn main() -> qergo::Result<()> {
    let family = ModelFamily::cat_map(vec![61, 64, 67, 127, 128, 131, 251, 256, 263])
        .with_observable(ObservableSpec::symbol("cos_q"))
        .with_observable(ObservableSpec::symbol("cos_p"));
    let diagnostics = [
        Diagnostic::variance(),
        Diagnostic::Extraction {
            schedule: None,
            root_variance_multiple: Some(3.0),
        },
    ];
    let opts = SweepOptions {
        windows: vec![(61, 67), (127, 131), (251, 263)],
        ..Default::default()
    };
    let report = family_sweep(&family, &diagnostics, &opts)?;
    for s in &report.per_size {
        let cells: Vec<String> = s
            .observables
            .iter()
            .map(|o| {
                let ex = o.extraction.as_ref().unwrap();
                format!("{} S₂ {:.3e} density {:.3}", o.name, o.full_variance().unwrap_or(f64::NAN), ex.final_density)
            })
            .collect();
        println!("N = {:>3} ({:>3} blocks): {}", s.size, s.blocks, cells.join("; "));
    }
    for w in &report.windows {
        println!("window [{}, {}] {} {}: median {:?}", w.lo, w.hi, w.observable, w.quantity, w.median);
    }
    for t in &report.trends {
        println!("trend {} {}: slope {:?} ({:?})", t.observable, t.quantity, t.slope, t.verdict);
    }
    Ok(())
}
