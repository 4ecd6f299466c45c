//! Gaussian unitary ensemble surrogate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::algebra::{CovariantSystem, GroupAction, Observable, Tolerances};
use crate::error::Result;
use crate::linalg::{self, CMat, C64};

/// Off-diagonal entries with `E|h|² = 1/d`, diagonal entries real with
/// variance `2/d`.
pub fn gue_matrix<R: Rng + ?Sized>(rng: &mut R, d: usize) -> CMat {
    let df = d as f64;
    let off = (0.5 / df).sqrt();
    let diag = (2.0 / df).sqrt();
    let mut h = linalg::zeros(d, d);
    for i in 0..d {
        let x: f64 = rng.sample(StandardNormal);
        h[(i, i)] = C64::new(diag * x, 0.0);
        for j in i + 1..d {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let z = C64::new(off * re, off * im);
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
        }
    }
    h
}

/// Generator for size `d` drawn from stream `d` of the seed, so family
/// members are independent of each other and of evaluation order.
pub fn gue_hamiltonian(d: usize, seed: u64) -> CMat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(d as u64);
    gue_matrix(&mut rng, d)
}

/// `R`-action generated by a GUE matrix; no observables attached.
pub fn gue_system(d: usize, seed: u64) -> Result<CovariantSystem> {
    gue_system_with(d, seed, Tolerances::default())
}

pub fn gue_system_with(d: usize, seed: u64, tol: Tolerances) -> Result<CovariantSystem> {
    CovariantSystem::with_tolerances(GroupAction::flow(gue_hamiltonian(d, seed)), tol)
}

/// `diag(+1, …, +1, −1, …, −1)` (a middle 0 for odd `d`); traceless.
pub fn sign_split(d: usize) -> Observable {
    let v: Vec<f64> = (0..d)
        .map(|k| {
            if 2 * k + 1 == d {
                0.0
            } else if 2 * k < d {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    Observable::new("sign_split", linalg::from_real_diag(&v))
}

/// Semicircle law on `[−2, 2]`: mass of `[a, b]`.
pub fn semicircle_mass(a: f64, b: f64) -> f64 {
    let cdf = |x: f64| {
        let x = x.clamp(-2.0, 2.0);
        0.5 + x * (4.0 - x * x).sqrt() / (4.0 * std::f64::consts::PI)
            + (x / 2.0).asin() / std::f64::consts::PI
    };
    (cdf(b) - cdf(a)).max(0.0)
}

/// Fraction of `values` inside `[a, b]`.
pub fn eigenvalue_fraction(values: &[f64], a: f64, b: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().filter(|&&x| a <= x && x <= b).count() as f64 / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermitian_and_deterministic() {
        let a = gue_hamiltonian(20, 3);
        let b = gue_hamiltonian(20, 3);
        assert_eq!(linalg::max_abs_diff(a.as_ref(), b.as_ref()), 0.0);
        assert_eq!(linalg::hermiticity_residual(a.as_ref()), 0.0);
        assert!(linalg::max_abs_diff(a.as_ref(), gue_hamiltonian(20, 4).as_ref()) > 0.0);
    }

    #[test]
    fn semicircle_mass_against_midpoint_rule() {
        let n = 200_000;
        let h = 2.0 / n as f64;
        let q: f64 = (0..n)
            .map(|i| {
                let x = -1.0 + (i as f64 + 0.5) * h;
                (4.0 - x * x).sqrt() / (2.0 * std::f64::consts::PI) * h
            })
            .sum();
        assert!((semicircle_mass(-1.0, 1.0) - q).abs() < 1e-9);
        assert!((semicircle_mass(-3.0, 3.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sign_split_traceless() {
        for d in [1, 2, 5, 8] {
            assert!(linalg::trace(sign_split(d).matrix.as_ref()).norm() < 1e-15);
        }
    }
}
