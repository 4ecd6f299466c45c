//! Isotypic decomposition of a unitary with repeated phases, and the normal
//! ergodic states it induces.
//!
//! `cargo run --example decomposition`

use qergo::algebra::{decompose_isotypic, CovariantSystem, GroupAction};
use qergo::linalg;
use qergo::states::enumerate_ergodic_states;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> qergo::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    // phases 0.3 (×3), −1.2 (×2), 2.5 (×1), hidden behind a random basis
    let phases = [0.3, 0.3, 0.3, -1.2, -1.2, 2.5];
    let u = linalg::unitary_with_phases(&mut rng, &phases);
    let system = CovariantSystem::new(GroupAction::cyclic(u))?;
    let decomp = decompose_isotypic(&system, system.default_clustering_tol())?;

    println!("dim {}, {} blocks", decomp.dim(), decomp.blocks().len());
    for (b, blk) in decomp.blocks().iter().enumerate() {
        println!(
            "  block {b}: energy {:.3}  rank {}  multiplicity {}  irrep dim {}",
            blk.energy, blk.rank, blk.multiplicity, blk.irrep_dim
        );
    }
    println!("invariance residual {:.2e}", decomp.invariance_residual());
    println!("character gap {:?}", decomp.character_gap());
    let states = enumerate_ergodic_states(&decomp);
    println!("{} normal ergodic states in the fixed basis", states.len());
    Ok(())
}
