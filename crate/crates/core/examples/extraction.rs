//! Density-one extraction from a sequence with a planted sparse bad set.
//!
//! `cargo run --example extraction`

use qergo::ergodicity::{extract_density_one, ExtractionSchedule};
use qergo::linalg::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> qergo::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let len = 2000;
    // good values approach ω = 0.5 like n^(-1/2); indices n = k² stay far away
    let omega = 0.5;
    let values: Vec<C64> = (0..len)
        .map(|n| {
            let root = (n as f64).sqrt();
            if root.fract() == 0.0 {
                C64::new(omega + 0.4, 0.0)
            } else {
                C64::new(omega + rng.random_range(-1.0..1.0) / (1.0 + root), 0.0)
            }
        })
        .collect();

    let schedule = ExtractionSchedule {
        thresholds: vec![0.1, 0.03, 0.01],
        density_targets: None,
    };
    let res = extract_density_one(&[values], &[C64::new(omega, 0.0)], &schedule)?;
    println!("selected {} of {len}, final density {:.4}", res.selected.len(), res.final_density);
    println!("targets met: {}", res.achieved);
    println!("breakpoints per level: {:?}", res.breakpoints[0]);
    println!("splice points: {:?}", res.splice_points);
    let squares_kept = res.selected.iter().filter(|&&n| ((n as f64).sqrt()).fract() == 0.0).count();
    println!("perfect squares kept: {squares_kept}");
    for n in [100, 500, 1000, 1999] {
        println!("  n = {n:>4}: density {:.3}, sup deviation beyond {:.3e}", res.density_profile[n], res.sup_deviation_profile[0][n]);
    }
    Ok(())
}
