//! Finite-dimensional covariant systems and their isotypic decomposition.
//!
//! A [`CovariantSystem`] is a Hilbert space `C^d` with a unitary group action
//! and a list of observables. The action is described by a [`GroupAction`]:
//! commuting abelian factors (a single unitary for a `Z`-action, a Hermitian
//! generator for an `R`-action) optionally extended by a finite group given
//! through its unitaries and multiplication table.
//!
//! [`decompose_isotypic`] splits `C^d` into isotypic blocks `H_σ`, sorted by the
//! energy `δ(σ, 1)` of their character. The resulting
//! [`IsotypicDecomposition`] carries one fixed orthonormal basis per block; all
//! ensembles and diagnostics downstream use that basis.

mod average;
mod decompose;
mod io;
mod spectrum;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use average::{block_compress, group_average, time_average, time_average_system};
pub(crate) use average::{averaging_kernel, check_dims};
pub use decompose::{decompose_isotypic, IsotypicBlock, IsotypicDecomposition};
pub use io::{load_system, parse_system, system_to_json, ActionJson, ComplexMatrixJson, SystemJson};
pub use spectrum::{spectrum_summary, LevelRow, Regularity, SpectrumSummary};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};

/// Numerical tolerances in force for one system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Hermiticity / unitarity check, relative to the operator scale.
    pub herm: f64,
    /// Orthonormality and completeness of block bases.
    pub orth: f64,
    /// Merging tolerance for near-degenerate characters (absolute, in
    /// character units; scaled by the spectral scale for `R` factors).
    pub clustering: f64,
    /// GNS null-space threshold, relative to the largest Gram eigenvalue.
    pub null: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            herm: 1e-10,
            orth: 1e-10,
            clustering: 1e-9,
            null: 1e-10,
        }
    }
}

impl Tolerances {
    pub fn scaled(self, factor: f64) -> Self {
        Self {
            herm: self.herm * factor,
            orth: self.orth * factor,
            clustering: self.clustering * factor,
            null: self.null * factor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorKind {
    /// `Z`-action generated by a single unitary; characters are eigenphases.
    Cyclic,
    /// `R`-action generated by a Hermitian `H` (`U_t = e^{itH}`); characters
    /// are eigenvalues.
    Flow,
}

#[derive(Debug, Clone)]
pub struct AbelianFactor {
    pub kind: FactorKind,
    pub matrix: CMat,
}

impl AbelianFactor {
    pub fn cyclic(u: CMat) -> Self {
        Self {
            kind: FactorKind::Cyclic,
            matrix: u,
        }
    }

    pub fn flow(h: CMat) -> Self {
        Self {
            kind: FactorKind::Flow,
            matrix: h,
        }
    }
}

/// A finite group acting through unitaries `U_g` with `U_g U_h = U_{gh}`,
/// `gh = table[g][h]`.
#[derive(Debug, Clone)]
pub struct FiniteGroup {
    pub elements: Vec<CMat>,
    pub table: Vec<Vec<usize>>,
}

impl FiniteGroup {
    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn identity_index(&self) -> Option<usize> {
        (0..self.order()).find(|&e| (0..self.order()).all(|h| self.table[e][h] == h))
    }

    pub fn inverse_index(&self, g: usize) -> Option<usize> {
        let e = self.identity_index()?;
        (0..self.order()).find(|&h| self.table[g][h] == e)
    }

    /// Conjugacy classes as sorted index lists, in order of first element.
    pub fn conjugacy_classes(&self) -> Vec<Vec<usize>> {
        let n = self.order();
        let mut seen = vec![false; n];
        let mut classes = Vec::new();
        for g in 0..n {
            if seen[g] {
                continue;
            }
            let mut class = Vec::new();
            for h in 0..n {
                let hinv = self.inverse_index(h).expect("validated group");
                let c = self.table[self.table[h][g]][hinv];
                if !seen[c] {
                    seen[c] = true;
                    class.push(c);
                }
            }
            class.sort_unstable();
            classes.push(class);
        }
        classes
    }

    fn validate(&self, dim: usize, tol: f64) -> Result<()> {
        let n = self.order();
        if n == 0 {
            return Err(Error::InvalidAction("finite group has no elements".into()));
        }
        if self.table.len() != n || self.table.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidAction(format!(
                "multiplication table must be {n}x{n}"
            )));
        }
        if self.table.iter().flatten().any(|&k| k >= n) {
            return Err(Error::InvalidAction("table entry out of range".into()));
        }
        for (g, u) in self.elements.iter().enumerate() {
            check_square(u, dim)?;
            let r = linalg::unitarity_residual(u.as_ref());
            if r > tol {
                return Err(Error::InvalidSystem(format!(
                    "group element {g} is not unitary (residual {r:.2e})"
                )));
            }
        }
        if self.identity_index().is_none() {
            return Err(Error::InvalidAction("table has no identity element".into()));
        }
        for g in 0..n {
            if self.inverse_index(g).is_none() {
                return Err(Error::InvalidAction(format!("element {g} has no inverse")));
            }
            for h in 0..n {
                let prod = &self.elements[g] * &self.elements[h];
                let r = linalg::max_abs_diff(
                    prod.as_ref(),
                    self.elements[self.table[g][h]].as_ref(),
                );
                if r > tol {
                    return Err(Error::InvalidAction(format!(
                        "U_{g} U_{h} differs from U_{} by {r:.2e}",
                        self.table[g][h]
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKind {
    Z,
    R,
    Product,
    FiniteExtension,
}

/// The group descriptor: abelian factors plus an optional finite group.
#[derive(Debug, Clone)]
pub struct GroupAction {
    pub factors: Vec<AbelianFactor>,
    pub finite: Option<FiniteGroup>,
}

impl GroupAction {
    pub fn cyclic(u: CMat) -> Self {
        Self {
            factors: vec![AbelianFactor::cyclic(u)],
            finite: None,
        }
    }

    pub fn flow(h: CMat) -> Self {
        Self {
            factors: vec![AbelianFactor::flow(h)],
            finite: None,
        }
    }

    pub fn product(factors: Vec<AbelianFactor>) -> Self {
        Self {
            factors,
            finite: None,
        }
    }

    pub fn finite(group: FiniteGroup) -> Self {
        Self {
            factors: Vec::new(),
            finite: Some(group),
        }
    }

    pub fn finite_extension(group: FiniteGroup, factors: Vec<AbelianFactor>) -> Self {
        Self {
            factors,
            finite: Some(group),
        }
    }

    pub fn kind(&self) -> GroupKind {
        match (&self.finite, self.factors.as_slice()) {
            (Some(_), _) => GroupKind::FiniteExtension,
            (None, [f]) if f.kind == FactorKind::Cyclic => GroupKind::Z,
            (None, [f]) if f.kind == FactorKind::Flow => GroupKind::R,
            _ => GroupKind::Product,
        }
    }

    pub fn is_abelian(&self) -> bool {
        self.finite.is_none()
    }

    pub fn factor_kinds(&self) -> Vec<FactorKind> {
        self.factors.iter().map(|f| f.kind).collect()
    }

    /// Unitary `U_g` for a group element.
    pub fn unitary(&self, g: &GroupElement) -> Result<CMat> {
        if g.abelian.len() != self.factors.len() {
            return Err(Error::InvalidArgument(format!(
                "group element has {} abelian components, action has {}",
                g.abelian.len(),
                self.factors.len()
            )));
        }
        let dim = self.dim();
        let mut u = linalg::identity(dim);
        for (f, &t) in self.factors.iter().zip(&g.abelian) {
            let uf = match f.kind {
                FactorKind::Cyclic => {
                    if t.fract() != 0.0 {
                        return Err(Error::InvalidArgument(format!(
                            "Z-action element must be an integer, got {t}"
                        )));
                    }
                    matrix_power(&f.matrix, t as i64)
                }
                FactorKind::Flow => flow_unitary(&f.matrix, t)?,
            };
            u = &u * &uf;
        }
        if let Some(k) = g.finite {
            let group = self
                .finite
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("action has no finite part".into()))?;
            let uk = group
                .elements
                .get(k)
                .ok_or_else(|| Error::InvalidArgument(format!("no group element {k}")))?;
            u = &u * uk;
        }
        Ok(u)
    }

    /// `α_g(A) = U_g* A U_g`.
    pub fn apply(&self, g: &GroupElement, a: &CMat) -> Result<CMat> {
        let u = self.unitary(g)?;
        Ok(u.adjoint() * a * &u)
    }

    /// Generators of the action: `1` for every cyclic factor, a unit time
    /// step for every flow factor, and every finite-group element.
    pub fn generators(&self) -> Vec<GroupElement> {
        let k = self.factors.len();
        let mut out = Vec::new();
        for i in 0..k {
            let mut v = vec![0.0; k];
            v[i] = 1.0;
            out.push(GroupElement {
                abelian: v,
                finite: None,
            });
        }
        if let Some(group) = &self.finite {
            for g in 0..group.order() {
                out.push(GroupElement {
                    abelian: vec![0.0; k],
                    finite: Some(g),
                });
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.factors
            .first()
            .map(|f| f.matrix.nrows())
            .or_else(|| {
                self.finite
                    .as_ref()
                    .and_then(|g| g.elements.first().map(|u| u.nrows()))
            })
            .unwrap_or(0)
    }

    fn validate(&self, dim: usize, tol: f64) -> Result<()> {
        if self.factors.is_empty() && self.finite.is_none() {
            return Err(Error::InvalidAction("action has no generators".into()));
        }
        for (i, f) in self.factors.iter().enumerate() {
            check_square(&f.matrix, dim)?;
            match f.kind {
                FactorKind::Cyclic => {
                    let r = linalg::unitarity_residual(f.matrix.as_ref());
                    if r > tol {
                        return Err(Error::InvalidSystem(format!(
                            "factor {i}: U is not unitary (residual {r:.2e})"
                        )));
                    }
                }
                FactorKind::Flow => {
                    let scale = linalg::max_abs(f.matrix.as_ref()).max(1.0);
                    let r = linalg::hermiticity_residual(f.matrix.as_ref());
                    if r > tol * scale {
                        return Err(Error::InvalidSystem(format!(
                            "factor {i}: H is not Hermitian (residual {r:.2e})"
                        )));
                    }
                }
            }
        }
        let mut all: Vec<&CMat> = self.factors.iter().map(|f| &f.matrix).collect();
        if let Some(group) = &self.finite {
            group.validate(dim, tol)?;
            all.extend(group.elements.iter());
        }
        let nf = self.factors.len();
        for i in 0..nf {
            for (j, other) in all.iter().enumerate().skip(i + 1) {
                let a = &self.factors[i].matrix;
                let c = linalg::commutator(a.as_ref(), other.as_ref());
                let scale = linalg::max_abs(a.as_ref()).max(1.0) * linalg::max_abs(other.as_ref()).max(1.0);
                let r = linalg::max_abs(c.as_ref());
                if r > tol * scale * (dim as f64) {
                    return Err(Error::InvalidAction(format!(
                        "generators {i} and {j} do not commute (residual {r:.2e})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A group element: one parameter per abelian factor (integer for `Z`, real
/// for `R`) and an optional finite-group element index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupElement {
    pub abelian: Vec<f64>,
    pub finite: Option<usize>,
}

impl GroupElement {
    pub fn identity(n_factors: usize) -> Self {
        Self {
            abelian: vec![0.0; n_factors],
            finite: None,
        }
    }

    pub fn abelian(params: Vec<f64>) -> Self {
        Self {
            abelian: params,
            finite: None,
        }
    }
}

/// Irreducible representation label of the finite part of a character.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrrepLabel {
    pub index: usize,
    pub dim: usize,
    pub trivial: bool,
}

/// A character of the acting group: one component per abelian factor
/// (eigenphase in `(-π, π]` or generator eigenvalue) and an optional irrep of
/// the finite part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Character {
    pub abelian: Vec<f64>,
    pub irrep: Option<IrrepLabel>,
}

impl Character {
    /// `δ(σ, 1)`: Euclidean norm of `(|θ|…, |λ|…, κ)` where `κ` is the `L²(G)`
    /// distance of the finite-group character from the trivial one.
    pub fn energy(&self) -> f64 {
        let k = match &self.irrep {
            Some(r) if !r.trivial => std::f64::consts::SQRT_2,
            _ => 0.0,
        };
        (self.abelian.iter().map(|x| x * x).sum::<f64>() + k * k).sqrt()
    }

    /// Component-wise distance vector to another character (phase differences
    /// wrapped into `(-π, π]`).
    pub fn difference(&self, other: &Character, kinds: &[FactorKind]) -> Vec<f64> {
        self.abelian
            .iter()
            .zip(&other.abelian)
            .zip(kinds)
            .map(|((a, b), k)| match k {
                FactorKind::Cyclic => linalg::wrap_phase(a - b),
                FactorKind::Flow => a - b,
            })
            .collect()
    }

    pub fn distance(&self, other: &Character, kinds: &[FactorKind]) -> f64 {
        self.difference(other, kinds)
            .iter()
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    fn lex_cmp(&self, other: &Character) -> std::cmp::Ordering {
        for (a, b) in self.abelian.iter().zip(&other.abelian) {
            match a.total_cmp(b) {
                std::cmp::Ordering::Equal => {}
                o => return o,
            }
        }
        let ia = self.irrep.as_ref().map(|r| r.index);
        let ib = other.irrep.as_ref().map(|r| r.index);
        ia.cmp(&ib)
    }
}

impl fmt::Display for Character {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, x) in self.abelian.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{x:.6}")?;
        }
        if let Some(r) = &self.irrep {
            if !self.abelian.is_empty() {
                write!(f, "; ")?;
            }
            write!(f, "irrep {} (dim {})", r.index, r.dim)?;
        }
        write!(f, ")")
    }
}

/// The metric `δ(σ, 1)` of a block's character.
pub fn energy_of(block: &IsotypicBlock) -> f64 {
    block.label.energy()
}

#[derive(Debug, Clone)]
pub struct Observable {
    pub name: String,
    pub matrix: CMat,
    pub self_adjoint: bool,
}

impl Observable {
    pub fn new(name: impl Into<String>, matrix: CMat) -> Self {
        let self_adjoint = linalg::hermiticity_residual(matrix.as_ref())
            <= 1e-12 * linalg::max_abs(matrix.as_ref()).max(1.0);
        Self {
            name: name.into(),
            matrix,
            self_adjoint,
        }
    }
}

/// Finite-dimensional covariant system `(C^d, U, {A})`.
#[derive(Debug, Clone)]
pub struct CovariantSystem {
    dim: usize,
    action: GroupAction,
    observables: Vec<Observable>,
    classical_average: BTreeMap<String, C64>,
    tolerances: Tolerances,
}

impl CovariantSystem {
    pub fn new(action: GroupAction) -> Result<Self> {
        Self::with_tolerances(action, Tolerances::default())
    }

    pub fn with_tolerances(action: GroupAction, tolerances: Tolerances) -> Result<Self> {
        let dim = action.dim();
        if dim == 0 {
            return Err(Error::InvalidSystem("dimension must be positive".into()));
        }
        action.validate(dim, tolerances.herm)?;
        Ok(Self {
            dim,
            action,
            observables: Vec::new(),
            classical_average: BTreeMap::new(),
            tolerances,
        })
    }

    pub fn with_observable(mut self, obs: Observable) -> Result<Self> {
        self.add_observable(obs)?;
        Ok(self)
    }

    pub fn add_observable(&mut self, obs: Observable) -> Result<()> {
        check_square(&obs.matrix, self.dim)?;
        if obs.self_adjoint {
            let r = linalg::hermiticity_residual(obs.matrix.as_ref());
            if r > self.tolerances.herm * linalg::max_abs(obs.matrix.as_ref()).max(1.0) {
                return Err(Error::InvalidSystem(format!(
                    "observable {} flagged self-adjoint but A - A* = {r:.2e}",
                    obs.name
                )));
            }
        }
        self.observables.retain(|o| o.name != obs.name);
        self.observables.push(obs);
        Ok(())
    }

    pub fn set_classical_average(&mut self, name: impl Into<String>, value: C64) {
        self.classical_average.insert(name.into(), value);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn action(&self) -> &GroupAction {
        &self.action
    }

    pub fn observables(&self) -> &[Observable] {
        &self.observables
    }

    pub fn observable(&self, name: &str) -> Option<&Observable> {
        self.observables.iter().find(|o| o.name == name)
    }

    pub fn classical_average(&self, name: &str) -> Option<C64> {
        self.classical_average.get(name).copied()
    }

    pub fn classical_averages(&self) -> &BTreeMap<String, C64> {
        &self.classical_average
    }

    pub fn tolerances(&self) -> Tolerances {
        self.tolerances
    }

    /// Default merging tolerance for this system: `τ_cluster` times the
    /// spectral scale (π for phases, `max|H|` for generators).
    pub fn default_clustering_tol(&self) -> f64 {
        let scale = self
            .action
            .factors
            .iter()
            .map(|f| match f.kind {
                FactorKind::Cyclic => 1.0,
                FactorKind::Flow => linalg::max_abs(f.matrix.as_ref()).max(1.0),
            })
            .fold(1.0, f64::max);
        self.tolerances.clustering * scale
    }

    /// Isotypic decomposition with the default clustering tolerance.
    pub fn decompose(&self) -> Result<IsotypicDecomposition> {
        decompose_isotypic(self, self.default_clustering_tol())
    }
}

pub(crate) fn check_square(a: &CMat, dim: usize) -> Result<()> {
    if a.nrows() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: a.nrows(),
        });
    }
    if a.ncols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: a.ncols(),
        });
    }
    Ok(())
}

fn matrix_power(u: &CMat, t: i64) -> CMat {
    let d = u.nrows();
    let mut base = if t < 0 { u.adjoint().to_owned() } else { u.clone() };
    let mut e = t.unsigned_abs();
    let mut acc = linalg::identity(d);
    while e > 0 {
        if e & 1 == 1 {
            acc = &acc * &base;
        }
        base = &base * &base;
        e >>= 1;
    }
    acc
}

/// `e^{itH}` through the eigenbasis of `H`.
pub(crate) fn flow_unitary(h: &CMat, t: f64) -> Result<CMat> {
    let (vals, v) = linalg::hermitian_eigen(h.as_ref())?;
    let phases: Vec<C64> = vals.iter().map(|&l| C64::from_polar(1.0, t * l)).collect();
    Ok(&v * linalg::from_diag(&phases) * v.adjoint())
}
