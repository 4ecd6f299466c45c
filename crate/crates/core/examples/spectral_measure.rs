//! Empirical spectral measure of `A` and the two iterated limits of
//! `ω_E(⟨A⟩_T* A)`, for the cat map and the shear.
//!
//! `cargo run --release --example spectral_measure`

use qergo::algebra::{decompose_isotypic, CovariantSystem, GroupAction};
use qergo::ergodicity::{empirical_spectral_measure, iterated_limit_scan};
use qergo::models::{cat_propagator, quantize_symbol, shear_propagator, TorusSymbol, CAT_MAP};

fn main() -> qergo::Result<()> {
    let n = 128;
    let symbol = TorusSymbol::cos_p();
    let omega = symbol.classical_average();
    for (name, u) in [("cat", cat_propagator(n, &CAT_MAP)?), ("shear", shear_propagator(n)?)] {
        let system = CovariantSystem::new(GroupAction::cyclic(u))?;
        let decomp = decompose_isotypic(&system, system.default_clustering_tol())?;
        let a = quantize_symbol(n, &symbol)?;
        let top = *decomp.energy_levels().last().unwrap();

        let mu = empirical_spectral_measure(&decomp, top, a.as_ref())?;
        println!(
            "{name:>5}: {} atoms, total mass {:.4}, mass at 0 {:.4e} (|ω(A)|² = {:.1e})",
            mu.atoms.len(),
            mu.total_mass,
            mu.mass_at_zero(),
            omega.norm_sqr()
        );

        let t_grid = [n as f64, 10.0 * n as f64, 100.0 * n as f64];
        let table = iterated_limit_scan(&decomp, a.as_ref(), omega, &t_grid, &[top / 2.0, top])?;
        println!(
            "       lim_E lim_T gap {:.3e}, lim_T lim_E gap {:.3e}",
            table.e_then_t_gap(),
            table.t_then_e_gap()
        );
    }
    Ok(())
}
