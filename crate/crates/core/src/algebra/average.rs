use faer::{Mat, MatRef};

use super::{CovariantSystem, FactorKind, IsotypicDecomposition};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};

/// `(1/|G|) Σ_g U_g* A U_g` over the finite part of the action; `A` itself
/// when the action is abelian.
pub fn group_average(decomp: &IsotypicDecomposition, a: MatRef<'_, C64>) -> Result<CMat> {
    check_dims(decomp, a)?;
    Ok(match decomp.group_elements() {
        None => a.to_owned(),
        Some(elems) => {
            let d = decomp.dim();
            let mut acc = linalg::zeros(d, d);
            for u in elems {
                acc += u.adjoint() * a * u;
            }
            linalg::scale(acc.as_ref(), C64::new(1.0 / elems.len() as f64, 0.0))
        }
    })
}

/// `Σ_σ Π_σ ⟨A⟩ Π_σ`, the time average of `A` (with the group average over
/// the finite part applied first).
pub fn block_compress(decomp: &IsotypicDecomposition, a: MatRef<'_, C64>) -> Result<CMat> {
    let avg = group_average(decomp, a)?;
    let t = decomp.to_eigenbasis(avg.as_ref());
    let cb = decomp.column_blocks();
    let masked = Mat::from_fn(t.nrows(), t.ncols(), |i, j| {
        if cb[i] == cb[j] {
            t[(i, j)]
        } else {
            linalg::ZERO
        }
    });
    Ok(decomp.from_eigenbasis(masked.as_ref()))
}

/// Finite-time average of `α_t(A) = U_t* A U_t`: `(1/T) Σ_{t<T}` for `Z`
/// factors, `(1/T) ∫_0^T dt` for `R` factors, and the exact group average
/// over a finite part. The same `T` is used for every abelian factor.
pub fn time_average(decomp: &IsotypicDecomposition, a: MatRef<'_, C64>, t: f64) -> Result<CMat> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::InvalidArgument(format!("T must be positive, got {t}")));
    }
    let kinds = decomp.factor_kinds();
    if kinds.contains(&FactorKind::Cyclic) && t.fract() != 0.0 {
        return Err(Error::InvalidArgument(format!(
            "Z-action averages need an integer T, got {t}"
        )));
    }
    let avg = group_average(decomp, a)?;
    let m = decomp.to_eigenbasis(avg.as_ref());
    let d = decomp.dim();
    let labels: Vec<&[f64]> = decomp
        .column_blocks()
        .iter()
        .map(|&b| decomp.block(b).label.abelian.as_slice())
        .collect();
    let out = Mat::from_fn(d, d, |i, j| {
        let mut k = linalg::ONE;
        for (f, kind) in kinds.iter().enumerate() {
            k *= averaging_kernel(*kind, t, labels[j][f] - labels[i][f]);
        }
        m[(i, j)] * k
    });
    Ok(decomp.from_eigenbasis(out.as_ref()))
}

/// [`time_average`] with the system's default decomposition.
pub fn time_average_system(system: &CovariantSystem, a: MatRef<'_, C64>, t: f64) -> Result<CMat> {
    let decomp = system.decompose()?;
    time_average(&decomp, a, t)
}

/// Average of `e^{itx}` over `t ∈ {0,…,T−1}` (cyclic) or `t ∈ [0,T]` (flow).
pub(crate) fn averaging_kernel(kind: FactorKind, t: f64, x: f64) -> C64 {
    match kind {
        FactorKind::Cyclic => {
            let z = C64::from_polar(1.0, x);
            let den = z - linalg::ONE;
            if den.norm() < 1e-14 {
                linalg::ONE
            } else {
                (C64::from_polar(1.0, t * x) - linalg::ONE) / (den * t)
            }
        }
        FactorKind::Flow => {
            let y = t * x;
            if y.abs() < 1e-4 {
                C64::new(1.0 - y * y / 6.0, y / 2.0)
            } else {
                (C64::from_polar(1.0, y) - linalg::ONE) / C64::new(0.0, y)
            }
        }
    }
}

pub(crate) fn check_dims(decomp: &IsotypicDecomposition, a: MatRef<'_, C64>) -> Result<()> {
    for n in [a.nrows(), a.ncols()] {
        if n != decomp.dim() {
            return Err(Error::DimensionMismatch {
                expected: decomp.dim(),
                found: n,
            });
        }
    }
    Ok(())
}
