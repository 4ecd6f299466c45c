//! Ergodicity diagnostics: variance sums, the quantum-ergodicity defect,
//! density-one extraction, iterated-limit scans, off-diagonal sums and
//! spectral measures.

mod extraction;
mod scan;

use faer::MatRef;
use serde::{Deserialize, Serialize};

pub use extraction::{extract_density_one, ExtractionResult, ExtractionSchedule};
pub use scan::{
    empirical_spectral_measure, iterated_limit_scan, offdiagonal_sum, IteratedLimitTable,
    SpectralAtom, SpectralMeasure,
};
pub use crate::gns::{fourier_masses, gns_autocorrelation};

use crate::algebra::{group_average, time_average, IsotypicDecomposition};
use crate::error::{Error, Result};
use crate::linalg::{self, C64};
use crate::states::{self, EnsembleKind};

/// Which orthonormal basis of each block supplies the states in
/// [`variance_s2_with`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateBasis {
    /// The decomposition's recorded basis (uniform barycentric family).
    #[default]
    Fixed,
    /// Eigenvectors of `Π_σ A Π_σ` inside every block; needs a self-adjoint
    /// `A` and an abelian action.
    Adapted,
}

/// `S₂(E, A)` over the uniform family of the decomposition's fixed basis:
/// `(1/N(E)) Σ_σ d(σ) Σ_j |ω_σj(A) − ω(A)|²` for `OmegaE`, or
/// `(1/N*(E)) Σ_σ Σ_j |ω_σj(A) − ω(A)|²` for `OmegaTildeE`.
pub fn variance_s2(
    decomp: &IsotypicDecomposition,
    e: f64,
    a: MatRef<'_, C64>,
    omega: C64,
    kind: EnsembleKind,
) -> Result<f64> {
    variance_s2_with(decomp, e, a, omega, kind, StateBasis::Fixed)
}

pub fn variance_s2_with(
    decomp: &IsotypicDecomposition,
    e: f64,
    a: MatRef<'_, C64>,
    omega: C64,
    kind: EnsembleKind,
    basis: StateBasis,
) -> Result<f64> {
    crate::algebra::check_dims(decomp, a)?;
    let nb = decomp.blocks_upto(e);
    if nb == 0 {
        return Err(Error::EmptyEnsemble { cutoff: e });
    }
    let per_state: Vec<(usize, f64)> = match basis {
        StateBasis::Fixed => {
            let values = states::state_values(decomp, a);
            let mut out = Vec::with_capacity(values.len());
            let mut s = 0;
            for (b, blk) in decomp.blocks().iter().enumerate().take(nb) {
                for _ in 0..blk.multiplicity {
                    out.push((b, (values[s] - omega).norm_sqr()));
                    s += 1;
                }
            }
            out
        }
        StateBasis::Adapted => {
            if !decomp.is_abelian() {
                return Err(Error::UnsupportedAction);
            }
            let scale = linalg::max_abs(a).max(1.0);
            if linalg::hermiticity_residual(a) > 1e-10 * scale {
                return Err(Error::InvalidArgument(
                    "adapted basis needs a self-adjoint observable".into(),
                ));
            }
            let mut out = Vec::new();
            for b in 0..nb {
                let q = decomp.block_basis(b);
                let c = q.adjoint() * a * q;
                let (vals, _) = linalg::hermitian_eigen(c.as_ref())?;
                out.extend(vals.iter().map(|&v| (b, (C64::new(v, 0.0) - omega).norm_sqr())));
            }
            out
        }
    };
    let mut total = 0.0;
    for &(b, dev) in &per_state {
        total += match kind {
            EnsembleKind::OmegaTildeE => dev,
            _ => dev * decomp.block(b).irrep_dim as f64,
        };
    }
    let norm = match kind {
        EnsembleKind::OmegaTildeE => decomp.count_star(e),
        _ => decomp.count(e),
    };
    Ok(total / norm as f64)
}

/// `ω_E(K*K)` with `K = ⟨A⟩ − ω(A)·I` and `⟨A⟩` the block compression.
pub fn qe_defect(
    decomp: &IsotypicDecomposition,
    e: f64,
    a: MatRef<'_, C64>,
    omega: C64,
) -> Result<f64> {
    let avg = group_average(decomp, a)?;
    let b = decomp.to_eigenbasis(avg.as_ref());
    let nb = decomp.blocks_upto(e);
    if nb == 0 {
        return Err(Error::EmptyEnsemble { cutoff: e });
    }
    let mut total = 0.0;
    for blk in &decomp.blocks()[..nb] {
        for j in blk.columns() {
            for i in blk.columns() {
                let mut z = b[(i, j)];
                if i == j {
                    z -= omega;
                }
                total += z.norm_sqr();
            }
        }
    }
    Ok(total / decomp.count(e) as f64)
}

/// Both sides of the Schwartz chain at finite `T` and `E`:
/// `(1/N) Σ_n |ρ_n(⟨A⟩_T) − ω|²` and `ω_E((⟨A⟩_T − ω)*(⟨A⟩_T − ω))`.
pub fn schwartz_chain(
    decomp: &IsotypicDecomposition,
    a: MatRef<'_, C64>,
    omega: C64,
    t: f64,
    e: f64,
) -> Result<(f64, f64)> {
    let at = time_average(decomp, a, t)?;
    let lhs = variance_s2(decomp, e, at.as_ref(), omega, EnsembleKind::OmegaE)?;
    let mut k = at;
    for i in 0..k.nrows() {
        k[(i, i)] -= omega;
    }
    let kk = k.adjoint() * &k;
    let ens = states::microcanonical(decomp, e, EnsembleKind::OmegaE)?;
    let rhs = ens.evaluate(decomp, kk.as_ref()).re;
    Ok((lhs, rhs))
}

/// One row of a variance report.
#[derive(Debug, Clone, Serialize)]
pub struct VarianceRow {
    pub e: f64,
    pub s2: f64,
    pub qe_defect: f64,
    pub n_e: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct VarianceReport {
    pub observable: String,
    pub kind: EnsembleKind,
    pub omega: [f64; 2],
    pub rows: Vec<VarianceRow>,
}

/// `S₂` and the defect over a grid of cutoffs.
pub fn variance_report(
    decomp: &IsotypicDecomposition,
    name: &str,
    a: MatRef<'_, C64>,
    omega: C64,
    grid: &[f64],
    kind: EnsembleKind,
) -> Result<VarianceReport> {
    let rows = grid
        .iter()
        .map(|&e| {
            Ok(VarianceRow {
                e,
                s2: variance_s2(decomp, e, a, omega, kind)?,
                qe_defect: qe_defect(decomp, e, a, omega)?,
                n_e: match kind {
                    EnsembleKind::OmegaTildeE => decomp.count_star(e),
                    _ => decomp.count(e),
                },
            })
        })
        .collect::<Result<_>>()?;
    Ok(VarianceReport {
        observable: name.to_string(),
        kind,
        omega: [omega.re, omega.im],
        rows,
    })
}
