//! Quantized torus automorphisms, built from the Egorov relation
//! `M T(v) M* = φ(v) T(A v)` rather than a closed-form kernel.

use serde::Serialize;

use super::weyl::{weyl_monomial, Monomial};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};

pub type MapMatrix = [[i64; 2]; 2];

pub const CAT_MAP: MapMatrix = [[2, 1], [1, 1]];
pub const SHEAR: MapMatrix = [[1, 1], [0, 1]];

pub const EGOROV_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PropagatorCheck {
    pub egorov_residual: f64,
    pub unitarity_residual: f64,
    /// Frequency box `|m|, |n| ≤ box_radius` used for the Egorov check.
    pub box_radius: i64,
}

fn det(a: &MapMatrix) -> i64 {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

fn apply_map(a: &MapMatrix, v: (i64, i64)) -> (i64, i64) {
    (a[0][0] * v.0 + a[0][1] * v.1, a[1][0] * v.0 + a[1][1] * v.1)
}

/// Phase that makes `(φ T(v))^N = I`. `T(v)^N = T(Nv) = (−1)^{N m n} I`.
fn root_phase(size: usize, v: (i64, i64)) -> C64 {
    let odd = (size as i128 * v.0 as i128 * v.1 as i128).rem_euclid(2) == 1;
    if odd {
        C64::from_polar(1.0, std::f64::consts::PI / size as f64)
    } else {
        linalg::ONE
    }
}

/// Generic start vector for the spectral projector.
fn seed_vector(size: usize, salt: usize) -> Vec<C64> {
    let g = 0.618_033_988_749_894_9 + salt as f64 * 0.414_213_562_373_095;
    (0..size)
        .map(|k| {
            let t = (k as f64 * g).fract();
            C64::from_polar(1.0 + t, 2.0 * std::f64::consts::PI * (k as f64 * k as f64 * 0.1 * g).fract())
        })
        .collect()
}

/// Unitary `M` with `M U M* = φ₁ T(A e₁)`, `M V M* = φ₂ T(A e₂)`: column
/// `k` is the `e^{2πik/N}` eigenvector of `φ₂ T(A e₂)`, obtained from the
/// fixed vector of that operator by stepping with `(φ₁ T(A e₁))*`.
fn intertwiner(size: usize, a: &MapMatrix) -> Result<CMat> {
    let v1 = apply_map(a, (1, 0));
    let v2 = apply_map(a, (0, 1));
    let mut u1: Monomial = weyl_monomial(size, v1.0, v1.1);
    u1.scale(root_phase(size, v1));
    let mut u2: Monomial = weyl_monomial(size, v2.0, v2.1);
    u2.scale(root_phase(size, v2));

    // projector onto the eigenvalue-1 space of u2: (1/N) Σ_j u2^j
    let mut w0 = None;
    for salt in 0..4 {
        let mut x = seed_vector(size, salt);
        let mut acc = x.clone();
        for _ in 1..size {
            x = u2.apply(&x);
            for (s, xi) in acc.iter_mut().zip(&x) {
                *s += xi;
            }
        }
        let norm = acc.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-6 * (size as f64) {
            w0 = Some(acc.into_iter().map(|z| z / norm).collect::<Vec<_>>());
            break;
        }
    }
    let w0 = w0.ok_or_else(|| Error::NumericalFailure("fixed vector of the image clock not found".into()))?;
    let mut m = linalg::zeros(size, size);
    let mut w = w0;
    for k in 0..size {
        for i in 0..size {
            m[(i, k)] = w[i];
        }
        if k + 1 < size {
            w = u1.apply_adjoint(&w);
        }
    }
    Ok(m)
}

/// `max_{|m|,|n| ≤ r} min_φ ‖M T(v) − φ T(Av) M‖_max`, together with
/// `||φ| − 1|`.
pub fn egorov_residual(m: &CMat, a: &MapMatrix, radius: i64) -> f64 {
    let size = m.nrows();
    let mut worst = 0.0f64;
    for p in -radius..=radius {
        for q in -radius..=radius {
            let lhs = weyl_monomial(size, p, q).right_mul(m);
            let av = apply_map(a, (p, q));
            let rhs = weyl_monomial(size, av.0, av.1).left_mul(m);
            let phi = linalg::hs_inner(rhs.as_ref(), lhs.as_ref()) / size as f64;
            let r = linalg::max_abs_diff(lhs.as_ref(), linalg::scale(rhs.as_ref(), phi).as_ref());
            worst = worst.max(r).max((phi.norm() - 1.0).abs());
        }
    }
    worst
}

/// Quantization of an integer map with determinant 1, validated against the
/// Egorov relation on `|m|, |n| ≤ 2` and for unitarity.
pub fn torus_propagator(size: usize, a: &MapMatrix) -> Result<(CMat, PropagatorCheck)> {
    if size == 0 {
        return Err(Error::InvalidArgument("N must be positive".into()));
    }
    if det(a) != 1 {
        return Err(Error::InvalidArgument(format!(
            "map {a:?} has determinant {}, expected 1",
            det(a)
        )));
    }
    let m = intertwiner(size, a)?;
    let radius = 2;
    let check = PropagatorCheck {
        egorov_residual: egorov_residual(&m, a, radius),
        unitarity_residual: linalg::unitarity_residual(m.as_ref()),
        box_radius: radius,
    };
    if !(check.egorov_residual <= EGOROV_TOL) {
        return Err(Error::ConstructionFailed {
            what: "Egorov",
            residual: check.egorov_residual,
            tolerance: EGOROV_TOL,
        });
    }
    if !(check.unitarity_residual <= EGOROV_TOL) {
        return Err(Error::ConstructionFailed {
            what: "unitarity",
            residual: check.unitarity_residual,
            tolerance: EGOROV_TOL,
        });
    }
    Ok((m, check))
}

pub fn cat_propagator(size: usize, a: &MapMatrix) -> Result<CMat> {
    torus_propagator(size, a).map(|r| r.0)
}

/// Quantized `[[1,1],[0,1]]`: frequencies `(m, n) ↦ (m + n, n)`, so every
/// function of `p` alone is invariant.
pub fn shear_propagator(size: usize) -> Result<CMat> {
    torus_propagator(size, &SHEAR).map(|r| r.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_map_gives_scalar() {
        let m = cat_propagator(9, &[[1, 0], [0, 1]]).unwrap();
        let s = m[(0, 0)];
        assert!((s.norm() - 1.0).abs() < 1e-12);
        assert!(linalg::max_abs_diff(m.as_ref(), linalg::scale(linalg::identity(9).as_ref(), s).as_ref()) < 1e-12);
    }

    #[test]
    fn cat_and_shear_egorov() {
        for size in [1usize, 2, 3, 8, 15, 16] {
            for a in [CAT_MAP, SHEAR, [[1, 2], [1, 3]]] {
                let (m, c) = torus_propagator(size, &a).unwrap();
                assert!(c.egorov_residual < 1e-10, "N={size} {a:?}: {}", c.egorov_residual);
                // independent recheck on a wider box with dense products
                let md = m.adjoint().to_owned();
                for (p, q) in [(3i64, -1i64), (-2, 3), (1, 1)] {
                    let t = crate::models::weyl_operator(size, p, q);
                    let av = apply_map(&a, (p, q));
                    let ta = crate::models::weyl_operator(size, av.0, av.1);
                    let lhs = &m * &t * &md;
                    let phi = linalg::hs_inner(ta.as_ref(), lhs.as_ref()) / size as f64;
                    assert!((phi.norm() - 1.0).abs() < 1e-10);
                    assert!(linalg::max_abs_diff(lhs.as_ref(), linalg::scale(ta.as_ref(), phi).as_ref()) < 1e-10);
                }
            }
        }
    }

    #[test]
    fn bad_determinant_rejected() {
        assert!(torus_propagator(8, &[[2, 0], [0, 1]]).is_err());
    }
}
