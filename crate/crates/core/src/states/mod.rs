//! Normal ergodic states, block states `ω_σ`, microcanonical and localized
//! ensembles, barycentric families and admissible densities.

use faer::MatRef;
use serde::{Deserialize, Serialize};

use crate::algebra::{Character, IsotypicDecomposition};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};

/// An extreme invariant state `ρ(A) = Tr(P A)/d(σ)` with `P` the projection
/// onto one irreducible subspace of `H_σ`.
#[derive(Debug, Clone)]
pub struct NormalErgodicState {
    pub sigma: Character,
    /// Index of the block in the decomposition.
    pub block: usize,
    pub energy: f64,
    /// Position in the global ordering (energy, then intra-block index).
    pub index: usize,
    /// Orthonormal basis of the irreducible subspace (`d × d(σ)`).
    pub projection: CMat,
}

impl NormalErgodicState {
    pub fn evaluate(&self, a: MatRef<'_, C64>) -> C64 {
        let p = &self.projection;
        let ap = a * p;
        let mut s = linalg::ZERO;
        for j in 0..p.ncols() {
            for i in 0..p.nrows() {
                s += p[(i, j)].conj() * ap[(i, j)];
            }
        }
        s / p.ncols() as f64
    }

    /// The density matrix `P P*/d(σ)`.
    pub fn density(&self) -> CMat {
        let p = &self.projection;
        linalg::scale((p * p.adjoint()).as_ref(), C64::new(1.0 / p.ncols() as f64, 0.0))
    }
}

/// One state per irreducible summand of the decomposition's fixed basis, in
/// block order.
pub fn enumerate_ergodic_states(decomp: &IsotypicDecomposition) -> Vec<NormalErgodicState> {
    let mut out = Vec::with_capacity(decomp.state_count());
    for (b, blk) in decomp.blocks().iter().enumerate() {
        for j in 0..blk.multiplicity {
            let cols = blk.summand_columns(j);
            out.push(NormalErgodicState {
                sigma: blk.label.clone(),
                block: b,
                energy: blk.energy,
                index: out.len(),
                projection: decomp
                    .basis()
                    .as_ref()
                    .subcols(cols.start, cols.len())
                    .to_owned(),
            });
        }
    }
    out
}

/// `⟨v_c, A v_c⟩` for every column `c` of the decomposition basis.
pub fn column_expectations(decomp: &IsotypicDecomposition, a: MatRef<'_, C64>) -> Vec<C64> {
    let v = decomp.basis();
    let av = a * v;
    (0..v.ncols())
        .map(|c| (0..v.nrows()).map(|i| v[(i, c)].conj() * av[(i, c)]).sum())
        .collect()
}

/// Values of all enumerated states on `A`, in state order.
pub fn state_values(decomp: &IsotypicDecomposition, a: MatRef<'_, C64>) -> Vec<C64> {
    let diag = column_expectations(decomp, a);
    summand_means(decomp, &diag)
}

pub(crate) fn summand_means(decomp: &IsotypicDecomposition, diag: &[C64]) -> Vec<C64> {
    let mut out = Vec::with_capacity(decomp.state_count());
    for blk in decomp.blocks() {
        for j in 0..blk.multiplicity {
            let s: C64 = diag[blk.summand_columns(j)].iter().sum();
            out.push(s / blk.irrep_dim as f64);
        }
    }
    out
}

/// `ω_σ(A) = Tr(Π_σ A)/rank Π_σ` for block `b`.
pub fn omega_sigma(decomp: &IsotypicDecomposition, b: usize, a: MatRef<'_, C64>) -> C64 {
    let q = decomp.block_basis(b);
    let aq = a * q;
    let mut s = linalg::ZERO;
    for j in 0..q.ncols() {
        for i in 0..q.nrows() {
            s += q[(i, j)].conj() * aq[(i, j)];
        }
    }
    s / q.ncols() as f64
}

/// `ω_σ(A)` for every block.
pub fn block_values(decomp: &IsotypicDecomposition, a: MatRef<'_, C64>) -> Vec<C64> {
    let diag = column_expectations(decomp, a);
    decomp
        .blocks()
        .iter()
        .map(|blk| diag[blk.columns()].iter().sum::<C64>() / blk.rank as f64)
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    /// Rank-weighted: `ω_E`.
    #[default]
    OmegaE,
    /// Multiplicity-weighted: `ω̃_E`.
    OmegaTildeE,
    /// Rank-weighted restricted to a ray of characters: `ω_E^L`.
    Localized,
}

impl EnsembleKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EnsembleKind::OmegaE => "omega_e",
            EnsembleKind::OmegaTildeE => "omega_tilde_e",
            EnsembleKind::Localized => "localized",
        }
    }
}

/// A convex combination of block states below a cutoff.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub cutoff: f64,
    pub kind: EnsembleKind,
    /// `(block index, weight)`; weights sum to 1.
    pub weights: Vec<(usize, f64)>,
    /// `N(E)`, `N*(E)` or `N(E, L)`.
    pub normalization: usize,
}

impl Ensemble {
    pub fn evaluate(&self, decomp: &IsotypicDecomposition, a: MatRef<'_, C64>) -> C64 {
        self.weights
            .iter()
            .map(|&(b, w)| omega_sigma(decomp, b, a) * w)
            .sum()
    }

    /// Evaluation from precomputed block values.
    pub fn evaluate_with(&self, block_values: &[C64]) -> C64 {
        self.weights
            .iter()
            .map(|&(b, w)| block_values[b] * w)
            .sum()
    }

    /// The density matrix `Σ_σ w_σ Π_σ/rank Π_σ`.
    pub fn density(&self, decomp: &IsotypicDecomposition) -> CMat {
        let d = decomp.dim();
        let mut diag = vec![linalg::ZERO; d];
        for &(b, w) in &self.weights {
            let blk = decomp.block(b);
            for c in blk.columns() {
                diag[c] = C64::new(w / blk.rank as f64, 0.0);
            }
        }
        decomp.from_eigenbasis(linalg::from_diag(&diag).as_ref())
    }
}

/// `ω_E` (rank weights) or `ω̃_E` (multiplicity weights) at cutoff `E`.
pub fn microcanonical(
    decomp: &IsotypicDecomposition,
    e: f64,
    kind: EnsembleKind,
) -> Result<Ensemble> {
    let nb = decomp.blocks_upto(e);
    if nb == 0 {
        return Err(Error::EmptyEnsemble { cutoff: e });
    }
    let blocks = &decomp.blocks()[..nb];
    let (weights, normalization) = match kind {
        EnsembleKind::OmegaE => {
            let n = decomp.count(e);
            (
                blocks
                    .iter()
                    .enumerate()
                    .map(|(b, blk)| (b, blk.rank as f64 / n as f64))
                    .collect(),
                n,
            )
        }
        EnsembleKind::OmegaTildeE => {
            let n = decomp.count_star(e);
            (
                blocks
                    .iter()
                    .enumerate()
                    .map(|(b, blk)| (b, blk.multiplicity as f64 / n as f64))
                    .collect(),
                n,
            )
        }
        EnsembleKind::Localized => {
            return Err(Error::InvalidArgument(
                "use localized_ensemble for ray-restricted ensembles".into(),
            ))
        }
    };
    Ok(Ensemble {
        cutoff: e,
        kind,
        weights,
        normalization,
    })
}

/// Interval condition on one abelian character component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentInterval {
    pub component: usize,
    pub min: f64,
    pub max: f64,
}

/// A ray of characters given by interval conditions (all must hold) and an
/// optional set of admissible irrep indices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ray {
    #[serde(default)]
    pub intervals: Vec<ComponentInterval>,
    #[serde(default)]
    pub irreps: Option<Vec<usize>>,
}

impl Ray {
    pub fn contains(&self, sigma: &Character) -> bool {
        let ok = self.intervals.iter().all(|iv| {
            sigma
                .abelian
                .get(iv.component)
                .is_some_and(|&x| x >= iv.min && x <= iv.max)
        });
        let irrep_ok = match (&self.irreps, &sigma.irrep) {
            (None, _) => true,
            (Some(list), Some(r)) => list.contains(&r.index),
            (Some(_), None) => false,
        };
        ok && irrep_ok
    }
}

/// `ω_E^L`: blocks below `E` whose character satisfies `ray`, rank-weighted
/// and normalised by `N(E, L)`.
pub fn localized_ensemble(
    decomp: &IsotypicDecomposition,
    ray: impl Fn(&Character) -> bool,
    e: f64,
) -> Result<Ensemble> {
    let nb = decomp.blocks_upto(e);
    let selected: Vec<usize> = (0..nb)
        .filter(|&b| ray(&decomp.block(b).label))
        .collect();
    if selected.is_empty() {
        return Err(Error::EmptyRay { cutoff: e });
    }
    let n: usize = selected.iter().map(|&b| decomp.block(b).rank).sum();
    Ok(Ensemble {
        cutoff: e,
        kind: EnsembleKind::Localized,
        weights: selected
            .iter()
            .map(|&b| (b, decomp.block(b).rank as f64 / n as f64))
            .collect(),
        normalization: n,
    })
}

/// Finite barycentric decompositions `ω_σ = Σ_i ν_σ,i ρ_i`, one per block.
#[derive(Debug, Clone)]
pub struct BarycentricFamily {
    states: Vec<NormalErgodicState>,
    masses: Vec<f64>,
    /// Member indices of each block.
    by_block: Vec<Vec<usize>>,
}

impl BarycentricFamily {
    /// `ν_σ = (1/m(σ)) Σ_j δ_{ω_σj}` over the decomposition's fixed summands.
    pub fn uniform(decomp: &IsotypicDecomposition) -> Self {
        let states = enumerate_ergodic_states(decomp);
        let masses = states
            .iter()
            .map(|s| 1.0 / decomp.block(s.block).multiplicity as f64)
            .collect();
        let mut by_block = vec![Vec::new(); decomp.blocks().len()];
        for s in &states {
            by_block[s.block].push(s.index);
        }
        Self {
            states,
            masses,
            by_block,
        }
    }

    /// A custom family; every block needs members whose masses sum to 1 and
    /// whose barycentre is `ω_σ`. States are re-indexed in the given order.
    pub fn new(
        decomp: &IsotypicDecomposition,
        states: Vec<NormalErgodicState>,
        masses: Vec<f64>,
    ) -> Result<Self> {
        if states.len() != masses.len() {
            return Err(Error::InvalidArgument(format!(
                "{} states but {} masses",
                states.len(),
                masses.len()
            )));
        }
        let d = decomp.dim();
        let mut by_block = vec![Vec::new(); decomp.blocks().len()];
        let mut states = states;
        for (i, s) in states.iter_mut().enumerate() {
            if s.block >= by_block.len() || s.projection.nrows() != d {
                return Err(Error::InvalidArgument(format!("state {i} does not fit the decomposition")));
            }
            if !(masses[i] >= 0.0) {
                return Err(Error::InvalidArgument(format!("mass {i} is negative")));
            }
            s.index = i;
            by_block[s.block].push(i);
        }
        for (b, members) in by_block.iter().enumerate() {
            let total: f64 = members.iter().map(|&i| masses[i]).sum();
            if (total - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidArgument(format!(
                    "masses of block {b} sum to {total}"
                )));
            }
            let q = decomp.block_basis(b);
            let mut bary = linalg::zeros(d, d);
            for &i in members {
                bary += linalg::scale(states[i].density().as_ref(), C64::new(masses[i], 0.0));
            }
            let target = linalg::scale((q * q.adjoint()).as_ref(), C64::new(1.0 / q.ncols() as f64, 0.0));
            let r = linalg::max_abs_diff(bary.as_ref(), target.as_ref());
            if r > 1e-10 {
                return Err(Error::InvalidState(format!(
                    "barycentre of block {b} misses ω_σ by {r:.2e}"
                )));
            }
        }
        Ok(Self {
            states,
            masses,
            by_block,
        })
    }

    pub fn states(&self) -> &[NormalErgodicState] {
        &self.states
    }

    pub fn mass(&self, state: usize) -> f64 {
        self.masses[state]
    }

    pub fn members(&self, block: usize) -> &[usize] {
        &self.by_block[block]
    }

    /// `max |Σ_i ν_i ρ_i(A) − ω_σ(A)|` over blocks.
    pub fn reconstruction_residual(&self, decomp: &IsotypicDecomposition, a: MatRef<'_, C64>) -> f64 {
        let mut worst = 0.0f64;
        for (b, members) in self.by_block.iter().enumerate() {
            let bary: C64 = members
                .iter()
                .map(|&i| self.states[i].evaluate(a) * self.masses[i])
                .sum();
            worst = worst.max((bary - omega_sigma(decomp, b, a)).norm());
        }
        worst
    }
}

/// Finite-`E` admissible density of a set of family members: rank-weighted
/// (`D*_ν`, kind `OmegaE`) or multiplicity-weighted (`D̃*_ν`, kind
/// `OmegaTildeE`).
pub fn admissible_density(
    decomp: &IsotypicDecomposition,
    family: &BarycentricFamily,
    subset: &[usize],
    e: f64,
    kind: EnsembleKind,
) -> Result<f64> {
    let mut in_subset = vec![false; family.states.len()];
    for &i in subset {
        if i >= in_subset.len() {
            return Err(Error::UnknownState(i));
        }
        in_subset[i] = true;
    }
    let nb = decomp.blocks_upto(e);
    if nb == 0 {
        return Err(Error::EmptyEnsemble { cutoff: e });
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for b in 0..nb {
        let blk = decomp.block(b);
        let w = match kind {
            EnsembleKind::OmegaTildeE => blk.multiplicity as f64,
            _ => blk.rank as f64,
        };
        let nu: f64 = family.by_block[b]
            .iter()
            .filter(|&&i| in_subset[i])
            .map(|&i| family.masses[i])
            .sum();
        num += nu * w;
        den += w;
    }
    Ok(num / den)
}

/// One serialized ensemble evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleRow {
    #[serde(rename = "E")]
    pub e: f64,
    pub kind: EnsembleKind,
    pub observable: String,
    pub value_re: f64,
    pub value_im: f64,
    #[serde(rename = "N_E")]
    pub n_e: usize,
}

/// Evaluates `ω_E(A)` (or `ω̃_E(A)`) at every cutoff of `grid`.
pub fn ensemble_rows(
    decomp: &IsotypicDecomposition,
    name: &str,
    a: MatRef<'_, C64>,
    grid: &[f64],
    kind: EnsembleKind,
) -> Result<Vec<EnsembleRow>> {
    let values = block_values(decomp, a);
    grid.iter()
        .map(|&e| {
            let ens = microcanonical(decomp, e, kind)?;
            let v = ens.evaluate_with(&values);
            Ok(EnsembleRow {
                e,
                kind,
                observable: name.to_string(),
                value_re: v.re,
                value_im: v.im,
                n_e: ens.normalization,
            })
        })
        .collect()
}
