//! Microcanonical ensembles `ω_E` and `ω̃_E` over a flow with degenerate
//! levels, a localized ensemble, and an admissible density.
//!
//! `cargo run --example ensembles`

use qergo::algebra::{decompose_isotypic, CovariantSystem, GroupAction};
use qergo::linalg::{self, C64};
use qergo::states::{admissible_density, localized_ensemble, microcanonical, BarycentricFamily, EnsembleKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> qergo::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let levels = [-2.0, -2.0, -1.0, 0.5, 0.5, 0.5, 1.5, 3.0];
    let h = linalg::hermitian_with_spectrum(&mut rng, &levels);
    let system = CovariantSystem::new(GroupAction::flow(h))?;
    let decomp = decompose_isotypic(&system, system.default_clustering_tol())?;
    let a = linalg::random_hermitian(&mut rng, levels.len());
    let trace_state = linalg::trace(a.as_ref()) / C64::new(levels.len() as f64, 0.0);

    println!("{:>5} {:>5} {:>5} {:>12} {:>12}", "E", "N(E)", "N*(E)", "ω_E(A)", "ω̃_E(A)");
    for e in [1.0, 2.0, 3.0] {
        let w = microcanonical(&decomp, e, EnsembleKind::OmegaE)?;
        let wt = microcanonical(&decomp, e, EnsembleKind::OmegaTildeE)?;
        println!(
            "{e:>5} {:>5} {:>5} {:>12.5} {:>12.5}",
            decomp.count(e),
            decomp.count_star(e),
            w.evaluate(&decomp, a.as_ref()).re,
            wt.evaluate(&decomp, a.as_ref()).re
        );
    }
    println!("at the top level ω_E is the trace state: {:.5}", trace_state.re);

    let positive = localized_ensemble(&decomp, |c| c.abelian.iter().all(|&x| x > 0.0), 3.0)?;
    println!(
        "ω_E^L on positive levels: {:.5} over {} blocks",
        positive.evaluate(&decomp, a.as_ref()).re,
        positive.weights.len()
    );

    let family = BarycentricFamily::uniform(&decomp);
    let half: Vec<usize> = (0..family.states().len()).step_by(2).collect();
    let d = admissible_density(&decomp, &family, &half, 3.0, EnsembleKind::OmegaE)?;
    println!("admissible density of every other state: {d:.3}");
    Ok(())
}
