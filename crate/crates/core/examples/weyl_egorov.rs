//! Weyl operators on `C^N`: the product rule, and the exact Egorov relation
//! `M T(v) M* = φ T(Av)` for quantized cat and shear maps.
//!
//! `cargo run --example weyl_egorov`

use qergo::linalg::{self, C64};
use qergo::models::{egorov_residual, torus_propagator, weyl_operator, CAT_MAP, SHEAR};

fn main() -> qergo::Result<()> {
    let n = 16;
    let mut worst = 0.0f64;
    for (m, p, m2, p2) in [(1, 0, 0, 1), (3, -2, 5, 7), (15, 15, 1, 1), (-4, 9, 4, -9)] {
        let lhs = weyl_operator(n, m, p) * weyl_operator(n, m2, p2);
        let phase = C64::from_polar(1.0, std::f64::consts::PI * (m * p2 - p * m2) as f64 / n as f64);
        let rhs = linalg::scale(weyl_operator(n, m + m2, p + p2).as_ref(), phase);
        worst = worst.max(linalg::max_abs_diff(lhs.as_ref(), rhs.as_ref()));
    }
    println!("product rule residual at N = {n}: {worst:.2e}");

    for size in [8, 16, 64, 256] {
        let (cat, _) = torus_propagator(size, &CAT_MAP)?;
        let (shear, _) = torus_propagator(size, &SHEAR)?;
        println!(
            "N = {size:>3}: Egorov residual (|m|,|n| ≤ 3) cat {:.2e}, shear {:.2e}",
            egorov_residual(&cat, &CAT_MAP, 3),
            egorov_residual(&shear, &SHEAR, 3)
        );
    }
    Ok(())
}
