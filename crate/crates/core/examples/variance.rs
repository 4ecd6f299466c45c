//! Quantum variance `S₂(E, A)` and the defect `ω_E(K*K)` of the cat map for
//! a trigonometric observable.
//!
//! `cargo run --release --example variance`

use qergo::algebra::{decompose_isotypic, CovariantSystem, GroupAction};
use qergo::ergodicity::variance_report;
use qergo::models::{cat_propagator, quantize_symbol, TorusSymbol, CAT_MAP};
use qergo::states::EnsembleKind;

fn main() -> qergo::Result<()> {
    let symbol = TorusSymbol::cos_q();
    let omega = symbol.classical_average();
    for n in [31, 64, 127, 256] {
        let u = cat_propagator(n, &CAT_MAP)?;
        let system = CovariantSystem::new(GroupAction::cyclic(u))?;
        let decomp = decompose_isotypic(&system, system.default_clustering_tol())?;
        let a = quantize_symbol(n, &symbol)?;
        let top = *decomp.energy_levels().last().unwrap();
        let report = variance_report(&decomp, "cos_q", a.as_ref(), omega, &[top / 2.0, top], EnsembleKind::OmegaE)?;
        println!("N = {n:>4}: {} blocks", decomp.blocks().len());
        for r in &report.rows {
            println!("    E = {:.3}  N(E) = {:>4}  S₂ = {:.3e}  defect = {:.3e}", r.e, r.n_e, r.s2, r.qe_defect);
        }
    }
    Ok(())
}
