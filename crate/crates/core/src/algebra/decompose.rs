use std::cmp::Ordering;
use std::f64::consts::PI;
use std::ops::Range;

use faer::{Mat, MatRef};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Character, CovariantSystem, FactorKind, FiniteGroup, IrrepLabel};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};

/// One isotypic subspace `H_σ`.
#[derive(Debug, Clone)]
pub struct IsotypicBlock {
    pub label: Character,
    /// `δ(σ, 1)`.
    pub energy: f64,
    /// `dim H_σ = m(σ) d(σ)`.
    pub rank: usize,
    /// Number of irreducible summands `m(σ)`.
    pub multiplicity: usize,
    /// Dimension `d(σ)` of each irreducible summand.
    pub irrep_dim: usize,
    /// First column of this block in the decomposition basis.
    pub offset: usize,
}

impl IsotypicBlock {
    pub fn columns(&self) -> Range<usize> {
        self.offset..self.offset + self.rank
    }

    /// Columns of the `j`-th irreducible summand.
    pub fn summand_columns(&self, j: usize) -> Range<usize> {
        let start = self.offset + j * self.irrep_dim;
        start..start + self.irrep_dim
    }
}

/// `C^d = ⊕_σ H_σ` with a fixed orthonormal basis adapted to every block and
/// every irreducible summand.
#[derive(Debug, Clone)]
pub struct IsotypicDecomposition {
    dim: usize,
    blocks: Vec<IsotypicBlock>,
    basis: CMat,
    clustering_tol: f64,
    kinds: Vec<FactorKind>,
    group: Option<Vec<CMat>>,
    column_block: Vec<usize>,
    invariance_residual: f64,
}

impl IsotypicDecomposition {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> &[IsotypicBlock] {
        &self.blocks
    }

    pub fn block(&self, b: usize) -> &IsotypicBlock {
        &self.blocks[b]
    }

    /// Unitary whose columns are the block bases, concatenated in block order.
    pub fn basis(&self) -> &CMat {
        &self.basis
    }

    pub fn block_basis(&self, b: usize) -> MatRef<'_, C64> {
        let blk = &self.blocks[b];
        self.basis.as_ref().subcols(blk.offset, blk.rank)
    }

    pub fn clustering_tol(&self) -> f64 {
        self.clustering_tol
    }

    pub fn factor_kinds(&self) -> &[FactorKind] {
        &self.kinds
    }

    pub fn is_abelian(&self) -> bool {
        self.group.is_none()
    }

    /// Unitaries of the finite part of the action, if any.
    pub fn group_elements(&self) -> Option<&[CMat]> {
        self.group.as_deref()
    }

    /// Block index of every basis column.
    pub fn column_blocks(&self) -> &[usize] {
        &self.column_block
    }

    /// `max_f ‖X_f V − V D_f‖_max` over the abelian generators.
    pub fn invariance_residual(&self) -> f64 {
        self.invariance_residual
    }

    fn energy_slack(&self, e: f64) -> f64 {
        self.clustering_tol.max(1e-12 * e.abs().max(1.0))
    }

    /// Number of blocks with `δ(σ,1) ≤ E`; they form a prefix of
    /// [`blocks`](Self::blocks).
    pub fn blocks_upto(&self, e: f64) -> usize {
        let lim = e + self.energy_slack(e);
        self.blocks.partition_point(|b| b.energy <= lim)
    }

    /// Number of blocks whose columns lie inside the first `cut` columns.
    pub fn blocks_upto_columns(&self, cut: usize) -> usize {
        self.blocks.partition_point(|b| b.offset + b.rank <= cut)
    }

    /// Number of basis columns spanning `⊕_{δ(σ,1) ≤ E} H_σ`.
    pub fn columns_upto(&self, e: f64) -> usize {
        let nb = self.blocks_upto(e);
        if nb == 0 {
            0
        } else {
            self.blocks[nb - 1].offset + self.blocks[nb - 1].rank
        }
    }

    /// `N(E) = Σ_{δ(σ,1) ≤ E} dim H_σ`.
    pub fn count(&self, e: f64) -> usize {
        self.columns_upto(e)
    }

    /// `N*(E) = Σ_{δ(σ,1) ≤ E} m(σ)`.
    pub fn count_star(&self, e: f64) -> usize {
        self.blocks[..self.blocks_upto(e)]
            .iter()
            .map(|b| b.multiplicity)
            .sum()
    }

    /// Distinct block energies in ascending order (energies closer than the
    /// clustering tolerance are identified).
    pub fn energy_levels(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for b in &self.blocks {
            match out.last() {
                Some(&last) if b.energy - last <= self.energy_slack(last) => {}
                _ => out.push(b.energy),
            }
        }
        out
    }

    /// `V* A V`: matrix elements in the decomposition basis.
    pub fn to_eigenbasis(&self, a: MatRef<'_, C64>) -> CMat {
        self.basis.adjoint() * a * &self.basis
    }

    /// `V B V*`.
    pub fn from_eigenbasis(&self, b: MatRef<'_, C64>) -> CMat {
        &self.basis * b * self.basis.adjoint()
    }

    /// Total number of irreducible summands, i.e. of normal ergodic states.
    pub fn state_count(&self) -> usize {
        self.blocks.iter().map(|b| b.multiplicity).sum()
    }

    /// Character distance between two blocks (abelian components only).
    pub fn block_distance(&self, a: usize, b: usize) -> f64 {
        self.blocks[a]
            .label
            .distance(&self.blocks[b].label, &self.kinds)
    }

    /// Smallest `max_f |χ_f(σ) − χ_f(τ)|` over pairs of blocks with distinct
    /// abelian labels; `None` if there is at most one such label.
    pub fn character_gap(&self) -> Option<f64> {
        let mut gap: Option<f64> = None;
        for i in 0..self.blocks.len() {
            for j in 0..i {
                let diff = self.blocks[i]
                    .label
                    .difference(&self.blocks[j].label, &self.kinds);
                let m = diff.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
                if m > self.clustering_tol {
                    gap = Some(gap.map_or(m, |g| g.min(m)));
                }
            }
        }
        gap
    }
}

struct Piece {
    abelian: Vec<f64>,
    irrep: Option<FiniteSplit>,
    basis: Option<CMat>,
}

#[derive(Clone)]
struct FiniteSplit {
    chars: Vec<C64>,
    irrep_dim: usize,
    multiplicity: usize,
}

/// Decomposes `C^d` into isotypic blocks of the system's action.
///
/// Abelian factors are diagonalised one after another on the subspaces found
/// so far; eigenvalues (or phases, with wrap-around) closer than
/// `clustering_tol` are merged. A finite part is then split with a random
/// central element and a random commutant element.
pub fn decompose_isotypic(
    system: &CovariantSystem,
    clustering_tol: f64,
) -> Result<IsotypicDecomposition> {
    if !(clustering_tol.is_finite() && clustering_tol >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "clustering tolerance must be finite and non-negative, got {clustering_tol}"
        )));
    }
    let dim = system.dim();
    let action = system.action();
    let mut pieces = vec![Piece {
        abelian: Vec::new(),
        irrep: None,
        basis: None,
    }];

    for factor in &action.factors {
        let mut next = Vec::new();
        for piece in pieces {
            let restricted = match &piece.basis {
                None => factor.matrix.clone(),
                Some(q) => q.adjoint() * &factor.matrix * q,
            };
            let (values, vecs) = match factor.kind {
                FactorKind::Cyclic => {
                    let e = linalg::unitary_eigen(restricted.as_ref())?;
                    let ph = e.phases.iter().map(|&t| linalg::wrap_phase(t)).collect();
                    (ph, e.vectors)
                }
                FactorKind::Flow => linalg::hermitian_eigen(restricted.as_ref())?,
            };
            let clusters = match factor.kind {
                FactorKind::Cyclic => circular_clusters(&values, clustering_tol),
                FactorKind::Flow => linear_clusters(&values, clustering_tol),
            };
            for (members, label) in clusters {
                let local = Mat::from_fn(vecs.nrows(), members.len(), |i, j| {
                    vecs[(i, members[j])]
                });
                let basis = match &piece.basis {
                    None => local,
                    Some(q) => q * &local,
                };
                let mut abelian = piece.abelian.clone();
                abelian.push(label);
                next.push(Piece {
                    abelian,
                    irrep: None,
                    basis: Some(basis),
                });
            }
        }
        pieces = next;
    }

    if let Some(group) = &action.finite {
        let classes = group.conjugacy_classes();
        let mut next = Vec::new();
        for piece in pieces {
            let q = piece.basis.unwrap_or_else(|| linalg::identity(dim));
            for (split, local) in split_finite(group, &classes, &q)? {
                next.push(Piece {
                    abelian: piece.abelian.clone(),
                    irrep: Some(split),
                    basis: Some(&q * &local),
                });
            }
        }
        pieces = next;
    }

    // Identify irreps across pieces and give them a canonical order.
    let irrep_table = canonical_irreps(&pieces);

    let mut blocks: Vec<(IsotypicBlock, CMat)> = pieces
        .into_iter()
        .map(|p| {
            let basis = p.basis.unwrap_or_else(|| linalg::identity(dim));
            let (irrep, irrep_dim, multiplicity) = match &p.irrep {
                None => (None, 1, basis.ncols()),
                Some(s) => {
                    let index = irrep_table
                        .iter()
                        .position(|t| same_irrep(t, s))
                        .expect("every irrep is tabulated");
                    (
                        Some(IrrepLabel {
                            index,
                            dim: s.irrep_dim,
                            trivial: is_trivial(&s.chars),
                        }),
                        s.irrep_dim,
                        s.multiplicity,
                    )
                }
            };
            let label = Character {
                abelian: p.abelian,
                irrep,
            };
            let energy = label.energy();
            (
                IsotypicBlock {
                    label,
                    energy,
                    rank: basis.ncols(),
                    multiplicity,
                    irrep_dim,
                    offset: 0,
                },
                basis,
            )
        })
        .collect();

    blocks.sort_by(|(a, _), (b, _)| {
        a.energy
            .total_cmp(&b.energy)
            .then_with(|| a.label.lex_cmp(&b.label))
    });

    let mut offset = 0;
    let mut column_block = Vec::with_capacity(dim);
    for (i, (blk, _)) in blocks.iter_mut().enumerate() {
        blk.offset = offset;
        offset += blk.rank;
        column_block.extend(std::iter::repeat_n(i, blk.rank));
    }
    if offset != dim {
        return Err(Error::NumericalFailure(format!(
            "decomposition spans {offset} of {dim} dimensions"
        )));
    }
    let basis = Mat::from_fn(dim, dim, |i, j| {
        let b = column_block[j];
        let (blk, q) = &blocks[b];
        q[(i, j - blk.offset)]
    });
    let orth = linalg::orthonormality_residual(basis.as_ref());
    let tol = system.tolerances();
    if orth > tol.orth * (dim as f64).sqrt().max(1.0) * 10.0 {
        return Err(Error::NumericalFailure(format!(
            "block bases are not orthonormal (residual {orth:.2e})"
        )));
    }
    let blocks: Vec<IsotypicBlock> = blocks.into_iter().map(|(b, _)| b).collect();

    let mut invariance_residual = 0.0f64;
    for (f, factor) in action.factors.iter().enumerate() {
        let xv = &factor.matrix * &basis;
        for j in 0..dim {
            let l = blocks[column_block[j]].label.abelian[f];
            let ev = match factor.kind {
                FactorKind::Cyclic => C64::from_polar(1.0, l),
                FactorKind::Flow => C64::new(l, 0.0),
            };
            for i in 0..dim {
                invariance_residual =
                    invariance_residual.max((xv[(i, j)] - ev * basis[(i, j)]).norm());
            }
        }
    }

    Ok(IsotypicDecomposition {
        dim,
        blocks,
        basis,
        clustering_tol,
        kinds: action.factor_kinds(),
        group: action.finite.as_ref().map(|g| g.elements.clone()),
        column_block,
        invariance_residual,
    })
}

fn linear_clusters(values: &[f64], tol: f64) -> Vec<(Vec<usize>, f64)> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    linalg::cluster_sorted(&sorted, tol)
        .into_iter()
        .map(|r| {
            let members: Vec<usize> = order[r.clone()].to_vec();
            let mean = sorted[r.clone()].iter().sum::<f64>() / r.len() as f64;
            (members, mean)
        })
        .collect()
}

/// Clusters of phases on the circle; the label of a cluster is the argument
/// of the mean of `e^{iθ}`, in `(-π, π]`.
fn circular_clusters(phases: &[f64], tol: f64) -> Vec<(Vec<usize>, f64)> {
    let mut order: Vec<usize> = (0..phases.len()).collect();
    order.sort_by(|&a, &b| phases[a].total_cmp(&phases[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| phases[i]).collect();
    let mut ranges = linalg::cluster_sorted(&sorted, tol);
    let mut groups: Vec<Vec<usize>> = ranges.iter().map(|r| order[r.clone()].to_vec()).collect();
    if ranges.len() > 1 {
        let first = sorted[0];
        let last = sorted[sorted.len() - 1];
        if first + 2.0 * PI - last <= tol {
            let tail = groups.pop().unwrap();
            ranges.pop();
            groups[0].extend(tail);
        }
    }
    groups
        .into_iter()
        .map(|members| {
            let z: C64 = members
                .iter()
                .map(|&i| C64::from_polar(1.0, phases[i]))
                .sum();
            let mut label = linalg::wrap_phase(z.arg());
            if (label + PI).abs() <= tol {
                label = PI;
            }
            (members, label)
        })
        .collect()
}

const CHAR_TOL: f64 = 1e-6;

fn is_trivial(chars: &[C64]) -> bool {
    chars.iter().all(|c| (c - linalg::ONE).norm() < CHAR_TOL)
}

fn same_irrep(a: &FiniteSplit, b: &FiniteSplit) -> bool {
    a.irrep_dim == b.irrep_dim
        && a.chars
            .iter()
            .zip(&b.chars)
            .all(|(x, y)| (x - y).norm() < CHAR_TOL)
}

fn canonical_irreps(pieces: &[Piece]) -> Vec<FiniteSplit> {
    let mut table: Vec<FiniteSplit> = Vec::new();
    for p in pieces {
        if let Some(s) = &p.irrep {
            if !table.iter().any(|t| same_irrep(t, s)) {
                table.push(s.clone());
            }
        }
    }
    let key = |c: &C64| ((c.re / 1e-9).round(), (c.im / 1e-9).round());
    table.sort_by(|a, b| {
        is_trivial(&b.chars)
            .cmp(&is_trivial(&a.chars))
            .then(a.irrep_dim.cmp(&b.irrep_dim))
            .then_with(|| {
                for (x, y) in a.chars.iter().zip(&b.chars) {
                    let (kx, ky) = (key(x), key(y));
                    match kx.0.total_cmp(&ky.0).then(kx.1.total_cmp(&ky.1)) {
                        Ordering::Equal => {}
                        o => return o,
                    }
                }
                Ordering::Equal
            })
    });
    table
}

const FINITE_ATTEMPTS: u64 = 4;

/// Splits the invariant subspace spanned by `q` into isotypic components of
/// the finite group, each with a basis ordered summand by summand. Returned
/// bases are in local coordinates (columns of length `q.ncols()`).
fn split_finite(
    group: &FiniteGroup,
    classes: &[Vec<usize>],
    q: &CMat,
) -> Result<Vec<(FiniteSplit, CMat)>> {
    let order = group.order();
    let k = q.ncols();
    let reps: Vec<CMat> = group
        .elements
        .iter()
        .map(|u| q.adjoint() * u * q)
        .collect();
    let mut last_err = None;
    for attempt in 0..FINITE_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(0x1507_0000 + attempt);
        let mut central = linalg::zeros(k, k);
        let mut scale = 0.0;
        for class in classes {
            let a: f64 = rng.random_range(1.0..2.0);
            let b: f64 = rng.random_range(1.0..2.0);
            scale += (a + b) * class.len() as f64;
            for &g in class {
                let r = &reps[g];
                central += Mat::from_fn(k, k, |i, j| {
                    let x = r[(i, j)];
                    let y = r[(j, i)].conj();
                    (x + y) * (0.5 * a) + (x - y) * C64::new(0.0, -0.5 * b)
                });
            }
        }
        match resolve_blocks(&central, scale, &reps, order, &mut rng) {
            Ok(out) => return Ok(out),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::NumericalFailure("finite-group split".into())))
}

fn resolve_blocks(
    central: &CMat,
    scale: f64,
    reps: &[CMat],
    order: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(FiniteSplit, CMat)>> {
    let k = central.nrows();
    let (vals, vecs) = linalg::hermitian_eigen(central.as_ref())?;
    let mut out = Vec::new();
    for range in linalg::cluster_sorted(&vals, 1e-8 * scale) {
        let r = range.len();
        let p = vecs.as_ref().subcols(range.start, r).to_owned();
        let local: Vec<CMat> = reps.iter().map(|u| p.adjoint() * u * &p).collect();
        let traces: Vec<C64> = local.iter().map(|s| linalg::trace(s.as_ref())).collect();
        let m2 = traces.iter().map(|t| t.norm_sqr()).sum::<f64>() / order as f64;
        let m = m2.sqrt().round();
        if m < 1.0 || (m2.sqrt() - m).abs() > 1e-6 * m {
            return Err(Error::NumericalFailure(format!(
                "isotypic component has non-integral multiplicity sqrt({m2:.6})"
            )));
        }
        let m = m as usize;
        if r % m != 0 {
            return Err(Error::NumericalFailure(format!(
                "component rank {r} is not a multiple of multiplicity {m}"
            )));
        }
        let d = r / m;
        let chars: Vec<C64> = traces.iter().map(|t| t / m as f64).collect();
        // Π = (d/|G|) Σ conj(χ(g)) U_g must be the identity on the component
        // and annihilate its complement.
        let mut proj = linalg::zeros(k, k);
        for (u, c) in reps.iter().zip(&chars) {
            proj += linalg::scale(u.as_ref(), c.conj() * (d as f64 / order as f64));
        }
        let want = &p * p.adjoint();
        let res = linalg::max_abs_diff(proj.as_ref(), want.as_ref());
        if res > 1e-8 {
            return Err(Error::NumericalFailure(format!(
                "character projection mismatch {res:.2e}"
            )));
        }
        let local_basis = if m == 1 || d == 1 {
            linalg::identity(r)
        } else {
            irreducible_split(&local, m, d, rng)?
        };
        out.push((
            FiniteSplit {
                chars,
                irrep_dim: d,
                multiplicity: m,
            },
            &p * &local_basis,
        ));
    }
    Ok(out)
}

/// Basis of an isotypic component ordered so that consecutive runs of `d`
/// columns span irreducible summands.
fn irreducible_split(local: &[CMat], m: usize, d: usize, rng: &mut ChaCha8Rng) -> Result<CMat> {
    let r = m * d;
    let y = linalg::random_hermitian(rng, r);
    let mut avg = linalg::zeros(r, r);
    for s in local {
        avg += s.adjoint() * &y * s;
    }
    let avg = linalg::scale(avg.as_ref(), C64::new(1.0 / local.len() as f64, 0.0));
    let (vals, vecs) = linalg::hermitian_eigen(avg.as_ref())?;
    let spread = vals.last().unwrap() - vals.first().unwrap();
    let clusters = linalg::cluster_sorted(&vals, 1e-8 * spread.max(1.0));
    if clusters.len() != m || clusters.iter().any(|c| c.len() != d) {
        return Err(Error::NumericalFailure(
            "commutant element did not separate irreducible summands".into(),
        ));
    }
    Ok(vecs)
}
