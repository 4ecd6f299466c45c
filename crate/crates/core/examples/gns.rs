//! GNS triples of invariant states on `M_d`: the vacuum space of the trace
//! state is the commutant, a pure invariant vector state has a one-dimensional
//! vacuum.
//!
//! `cargo run --example gns`

use qergo::algebra::GroupAction;
use qergo::gns::{gns_construct, FiniteStarAlgebra};
use qergo::linalg::{self, CMat, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> qergo::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let d = 4;
    // phases 0.4 (×2), 1.1, −2.0: commutant dimension 2² + 1 + 1 = 6
    let w = linalg::random_unitary(&mut rng, d);
    let phases = [0.4, 0.4, 1.1, -2.0];
    let diag: Vec<C64> = phases.iter().map(|&p| C64::from_polar(1.0, p)).collect();
    let u = &w * linalg::from_diag(&diag) * w.adjoint();
    let algebra = FiniteStarAlgebra::full_matrix(GroupAction::cyclic(u));

    let trace = linalg::scale(linalg::identity(d).as_ref(), C64::new(1.0 / d as f64, 0.0));
    report("trace state", &algebra, &trace)?;

    // eigenvector of U with a simple phase
    let v = w.col(2).to_owned();
    let pure = CMat::from_fn(d, d, |i, j| v[i] * v[j].conj());
    report("vector state", &algebra, &pure)?;
    Ok(())
}

fn report(name: &str, algebra: &FiniteStarAlgebra, rho: &CMat) -> qergo::Result<()> {
    let triple = gns_construct(algebra, rho.as_ref(), 1e-10)?;
    let s = triple.summary();
    println!(
        "{name}: quotient dim {}, null rank {}, vacuum rank {}, max residual {:.2e}",
        s.quotient_dim,
        s.null_rank,
        s.vacuum_rank,
        s.residuals.max_residual()
    );
    if s.vacuum_rank == 1 {
        println!("  G-abelian certificate {:.2e}", s.g_abelian_certificate);
    }
    Ok(())
}
