//! `⟨A⟩_T` converges to the block compression at rate `1/T`.
//!
//! `cargo run --example time_average`

use qergo::algebra::{block_compress, decompose_isotypic, time_average, CovariantSystem, GroupAction};
use qergo::linalg;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> qergo::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let u = linalg::unitary_with_phases(&mut rng, &[0.0, 0.0, 0.7, 0.7, 1.9, -2.4, -2.4, 3.0]);
    let system = CovariantSystem::new(GroupAction::cyclic(u))?;
    let decomp = decompose_isotypic(&system, system.default_clustering_tol())?;
    let a = linalg::random_hermitian(&mut rng, 8);

    let limit = block_compress(&decomp, a.as_ref())?;
    let gap = decomp.character_gap().unwrap_or(f64::INFINITY);
    println!("chord gap {gap:.3}");
    println!("{:>6} {:>12} {:>12}", "T", "‖⟨A⟩_T − ⟨A⟩‖_F", "2‖A‖_F/(T·gap)");
    for t in [1.0, 4.0, 16.0, 64.0, 256.0, 1024.0] {
        let at = time_average(&decomp, a.as_ref(), t)?;
        let err = linalg::frobenius((&at - &limit).as_ref());
        let bound = 2.0 * linalg::frobenius(a.as_ref()) / (t * gap);
        println!("{t:>6} {err:>12.3e} {bound:>12.3e}");
    }
    // the limit is idempotent
    let again = block_compress(&decomp, limit.as_ref())?;
    println!("idempotence residual {:.2e}", linalg::max_abs_diff(again.as_ref(), limit.as_ref()));
    Ok(())
}
