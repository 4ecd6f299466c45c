use faer::MatRef;
use serde::Serialize;

use crate::algebra::{averaging_kernel, group_average, FactorKind, IsotypicDecomposition};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};

/// `ω_E(⟨A⟩_T* A)` over a grid of cutoffs and averaging times.
#[derive(Debug, Clone, Serialize)]
pub struct IteratedLimitTable {
    pub e_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    /// `values[e][t]`.
    pub values: Vec<Vec<[f64; 2]>>,
    /// `T = ∞` column: `ω_E(⟨A⟩* A)` with the exact block compression.
    pub exact: Vec<[f64; 2]>,
    /// `|ω(A)|²`.
    pub target: f64,
    /// Largest `E`, scanning `T`: the row `values[last]`.
    pub e_then_t: Vec<[f64; 2]>,
    /// `T = ∞`, scanning `E`: the column `exact`.
    pub t_then_e: Vec<[f64; 2]>,
}

impl IteratedLimitTable {
    /// `|value at (E_max, T_max) − |ω(A)|²|`.
    pub fn e_then_t_gap(&self) -> f64 {
        let [re, im] = *self.e_then_t.last().expect("nonempty grid");
        (C64::new(re, im) - self.target).norm()
    }

    /// `|value at (T = ∞, E_max) − |ω(A)|²|`.
    pub fn t_then_e_gap(&self) -> f64 {
        let [re, im] = *self.t_then_e.last().expect("nonempty grid");
        (C64::new(re, im) - self.target).norm()
    }
}

fn check_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument(format!("{name} grid is empty")));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(format!("{name} grid must be increasing")));
    }
    Ok(())
}

/// Scans `ω_E(⟨A⟩_T* A)` and reports both iterated readouts against
/// `|ω(A)|²`.
pub fn iterated_limit_scan(
    decomp: &IsotypicDecomposition,
    a: MatRef<'_, C64>,
    omega: C64,
    t_grid: &[f64],
    e_grid: &[f64],
) -> Result<IteratedLimitTable> {
    check_grid("T", t_grid)?;
    check_grid("E", e_grid)?;
    if t_grid[0] <= 0.0 {
        return Err(Error::InvalidArgument("T must be positive".into()));
    }
    let cuts: Vec<usize> = e_grid.iter().map(|&e| decomp.columns_upto(e)).collect();
    if cuts[0] == 0 {
        return Err(Error::EmptyEnsemble { cutoff: e_grid[0] });
    }
    let avg = group_average(decomp, a)?;
    let at = decomp.to_eigenbasis(a);
    let bt = if decomp.is_abelian() {
        at.clone()
    } else {
        decomp.to_eigenbasis(avg.as_ref())
    };
    let d = decomp.dim();
    let kinds = decomp.factor_kinds();
    let labels: Vec<&[f64]> = decomp
        .column_blocks()
        .iter()
        .map(|&b| decomp.block(b).label.abelian.as_slice())
        .collect();
    let max_cut = *cuts.last().unwrap();

    let readout = |col: &dyn Fn(usize) -> C64| -> Vec<[f64; 2]> {
        let mut prefix = Vec::with_capacity(max_cut);
        let mut acc = linalg::ZERO;
        for i in 0..max_cut {
            acc += col(i);
            prefix.push(acc);
        }
        cuts.iter()
            .map(|&c| {
                let v = prefix[c - 1] / c as f64;
                [v.re, v.im]
            })
            .collect()
    };

    let mut by_t: Vec<Vec<[f64; 2]>> = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        if kinds.contains(&FactorKind::Cyclic) && t.fract() != 0.0 {
            return Err(Error::InvalidArgument(format!(
                "Z-action averages need integer T, got {t}"
            )));
        }
        let col = |i: usize| -> C64 {
            let mut s = linalg::ZERO;
            for j in 0..d {
                let mut k = linalg::ONE;
                for (f, kind) in kinds.iter().enumerate() {
                    k *= averaging_kernel(*kind, t, labels[i][f] - labels[j][f]);
                }
                s += (bt[(j, i)] * k).conj() * at[(j, i)];
            }
            s
        };
        by_t.push(readout(&col));
    }
    let cb = decomp.column_blocks();
    let exact_col = |i: usize| -> C64 {
        let blk = decomp.block(cb[i]);
        blk.columns()
            .map(|j| bt[(j, i)].conj() * at[(j, i)])
            .sum()
    };
    let exact = readout(&exact_col);
    let values: Vec<Vec<[f64; 2]>> = (0..e_grid.len())
        .map(|e| by_t.iter().map(|row| row[e]).collect())
        .collect();
    Ok(IteratedLimitTable {
        e_grid: e_grid.to_vec(),
        t_grid: t_grid.to_vec(),
        e_then_t: values.last().unwrap().clone(),
        t_then_e: exact.clone(),
        values,
        exact,
        target: omega.norm_sqr(),
    })
}

fn label_distance(a: &[f64], b: &[f64], kinds: &[FactorKind]) -> f64 {
    let mut s = 0.0;
    for ((x, y), k) in a.iter().zip(b).zip(kinds) {
        let d = match k {
            FactorKind::Cyclic => linalg::wrap_phase(x - y),
            FactorKind::Flow => x - y,
        };
        s += d * d;
    }
    s.sqrt()
}

/// `(1/N(E)) Σ_{i≠j, both ≤ E, |χ_i − χ_j| ≤ δ} |⟨Aφ_i, φ_j⟩|²`.
pub fn offdiagonal_sum(
    decomp: &IsotypicDecomposition,
    e: f64,
    delta: f64,
    a: MatRef<'_, C64>,
) -> Result<f64> {
    if !decomp.is_abelian() {
        return Err(Error::UnsupportedAction);
    }
    if delta.is_nan() || delta < 0.0 {
        return Err(Error::InvalidArgument(format!("δ must be nonnegative, got {delta}")));
    }
    crate::algebra::check_dims(decomp, a)?;
    let cut = decomp.columns_upto(e);
    if cut == 0 {
        return Err(Error::EmptyEnsemble { cutoff: e });
    }
    let at = decomp.to_eigenbasis(a);
    Ok(offdiagonal_from_eigenbasis(decomp, &at, cut, delta))
}

pub(crate) fn offdiagonal_from_eigenbasis(
    decomp: &IsotypicDecomposition,
    at: &CMat,
    cut: usize,
    delta: f64,
) -> f64 {
    let kinds = decomp.factor_kinds();
    let cb = decomp.column_blocks();
    let nb = decomp.blocks_upto_columns(cut);
    let mut within = vec![false; nb * nb];
    for p in 0..nb {
        for q in 0..nb {
            within[p * nb + q] = label_distance(
                &decomp.block(p).label.abelian,
                &decomp.block(q).label.abelian,
                kinds,
            ) <= delta;
        }
    }
    let mut s = 0.0;
    for j in 0..cut {
        for i in 0..cut {
            if i != j && within[cb[i] * nb + cb[j]] {
                s += at[(i, j)].norm_sqr();
            }
        }
    }
    s / cut as f64
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralAtom {
    /// Character difference `χ_j − χ_i` (phases wrapped into `(-π, π]`).
    pub position: Vec<f64>,
    pub mass: f64,
}

/// Finite-`E` spectral measure of an observable.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralMeasure {
    pub observable: String,
    pub cutoff: f64,
    pub n_e: usize,
    /// Atoms sorted by position.
    pub atoms: Vec<SpectralAtom>,
    /// `ω_E(A*A)`.
    pub total_mass: f64,
    pub merge_tol: f64,
}

impl SpectralMeasure {
    pub fn with_name(mut self, name: &str) -> Self {
        self.observable = name.to_string();
        self
    }

    pub fn pair(&self, f: impl Fn(&[f64]) -> C64) -> C64 {
        self.atoms.iter().map(|a| f(&a.position) * a.mass).sum()
    }

    /// `Σ mass · e^{i g·x}`, which equals `ω_E(α_g(A)* A)`.
    pub fn autocorrelation(&self, g: &[f64]) -> C64 {
        self.pair(|x| {
            let phase: f64 = x.iter().zip(g).map(|(a, b)| a * b).sum();
            C64::from_polar(1.0, phase)
        })
    }

    /// Mass of the atom at the origin, `ω_E(⟨A⟩* A)`.
    pub fn mass_at_zero(&self) -> f64 {
        self.atoms
            .iter()
            .filter(|a| a.position.iter().all(|x| x.abs() <= self.merge_tol))
            .map(|a| a.mass)
            .sum()
    }
}

/// Atoms `(χ_j − χ_i, |Ã_ji|²/N(E))` over `i ≤ E` and all `j`, merged within
/// the decomposition's clustering tolerance.
pub fn empirical_spectral_measure(
    decomp: &IsotypicDecomposition,
    e: f64,
    a: MatRef<'_, C64>,
) -> Result<SpectralMeasure> {
    if !decomp.is_abelian() {
        return Err(Error::UnsupportedAction);
    }
    crate::algebra::check_dims(decomp, a)?;
    let cut = decomp.columns_upto(e);
    if cut == 0 {
        return Err(Error::EmptyEnsemble { cutoff: e });
    }
    let at = decomp.to_eigenbasis(a);
    let d = decomp.dim();
    let kinds = decomp.factor_kinds();
    let k = kinds.len();
    let nb = decomp.blocks().len();
    let cb = decomp.column_blocks();
    // Aggregate over block pairs first: positions depend only on labels.
    let mut pair_mass = vec![0.0; nb * nb];
    for i in 0..cut {
        for j in 0..d {
            pair_mass[cb[i] * nb + cb[j]] += at[(j, i)].norm_sqr();
        }
    }
    // rounding-level entries (|x|² ~ ε²) are not atoms
    let floor = 1e-24 * pair_mass.iter().sum::<f64>();
    let mut raw: Vec<(Vec<f64>, f64)> = Vec::new();
    for p in 0..nb {
        for q in 0..nb {
            let m = pair_mass[p * nb + q];
            if m <= floor {
                continue;
            }
            let lp = &decomp.block(p).label.abelian;
            let lq = &decomp.block(q).label.abelian;
            let pos: Vec<f64> = (0..k)
                .map(|f| match kinds[f] {
                    FactorKind::Cyclic => linalg::wrap_phase(lq[f] - lp[f]),
                    FactorKind::Flow => lq[f] - lp[f],
                })
                .collect();
            raw.push((pos, m / cut as f64));
        }
    }
    let tol = decomp.clustering_tol().max(1e-12);
    raw.sort_by(|a, b| {
        a.0.iter()
            .zip(&b.0)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut atoms: Vec<SpectralAtom> = Vec::new();
    let mut anchor: Option<Vec<f64>> = None;
    let mut members = 0usize;
    for (pos, m) in raw {
        let joins = anchor
            .as_ref()
            .is_some_and(|a| a.iter().zip(&pos).all(|(x, y)| (x - y).abs() <= tol));
        if joins {
            let atom = atoms.last_mut().unwrap();
            members += 1;
            for (acc, x) in atom.position.iter_mut().zip(&pos) {
                *acc += (x - *acc) / members as f64;
            }
            atom.mass += m;
        } else {
            anchor = Some(pos.clone());
            members = 1;
            atoms.push(SpectralAtom { position: pos, mass: m });
        }
    }
    // ±π are the same point on the circle.
    if k == 1 && kinds[0] == FactorKind::Cyclic && atoms.len() > 1 {
        let first = atoms[0].position[0];
        let last = atoms[atoms.len() - 1].position[0];
        if first + 2.0 * std::f64::consts::PI - last <= tol {
            let head = atoms.remove(0);
            atoms.last_mut().unwrap().mass += head.mass;
        }
    }
    for atom in &mut atoms {
        for x in &mut atom.position {
            if x.abs() <= tol {
                *x = 0.0;
            }
        }
    }
    let total_mass = atoms.iter().map(|a| a.mass).sum();
    Ok(SpectralMeasure {
        observable: String::new(),
        cutoff: e,
        n_e: cut,
        atoms,
        total_mass,
        merge_tol: tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{block_compress, time_average, CovariantSystem, GroupAction};
    use crate::states::{microcanonical, EnsembleKind};
    use faer::Mat;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_cyclic(seed: u64, d: usize) -> (IsotypicDecomposition, CMat) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = linalg::random_unitary(&mut rng, d);
        let a = linalg::random_gaussian_matrix(&mut rng, d, d);
        (
            CovariantSystem::new(GroupAction::cyclic(u)).unwrap().decompose().unwrap(),
            a,
        )
    }

    #[test]
    fn two_level_offdiagonal_hand_value() {
        let dec = CovariantSystem::new(GroupAction::flow(linalg::from_real_diag(&[0.0, 0.1])))
            .unwrap()
            .decompose()
            .unwrap();
        let a = Mat::from_fn(2, 2, |i, j| if i != j { linalg::ONE } else { linalg::ZERO });
        assert!((offdiagonal_sum(&dec, 1.0, 0.5, a.as_ref()).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(offdiagonal_sum(&dec, 1.0, 0.0, a.as_ref()).unwrap(), 0.0);
    }

    #[test]
    fn scan_matches_direct_evaluation() {
        let (dec, a) = random_cyclic(21, 7);
        let omega = C64::new(0.1, -0.2);
        let t_grid = [1.0, 5.0, 40.0];
        let levels = dec.energy_levels();
        let e_grid = [levels[2], levels[4], *levels.last().unwrap()];
        let table = iterated_limit_scan(&dec, a.as_ref(), omega, &t_grid, &e_grid).unwrap();
        for (ei, &e) in e_grid.iter().enumerate() {
            let ens = microcanonical(&dec, e, EnsembleKind::OmegaE).unwrap();
            for (ti, &t) in t_grid.iter().enumerate() {
                let at = time_average(&dec, a.as_ref(), t).unwrap();
                let want = ens.evaluate(&dec, (at.adjoint() * &a).as_ref());
                let [re, im] = table.values[ei][ti];
                assert!((C64::new(re, im) - want).norm() < 1e-12);
            }
            let c = block_compress(&dec, a.as_ref()).unwrap();
            let want = ens.evaluate(&dec, (c.adjoint() * &a).as_ref());
            let [re, im] = table.exact[ei];
            assert!((C64::new(re, im) - want).norm() < 1e-12);
        }
    }

    #[test]
    fn spectral_measure_reproduces_autocorrelation() {
        let (dec, a) = random_cyclic(22, 6);
        let u = dec.from_eigenbasis(
            linalg::from_diag(
                &dec.column_blocks()
                    .iter()
                    .map(|&b| C64::from_polar(1.0, dec.block(b).label.abelian[0]))
                    .collect::<Vec<_>>(),
            )
            .as_ref(),
        );
        let e = dec.energy_levels()[3];
        let m = empirical_spectral_measure(&dec, e, a.as_ref()).unwrap();
        let ens = microcanonical(&dec, e, EnsembleKind::OmegaE).unwrap();
        let mut ug = linalg::identity(6);
        for g in 0..5 {
            let ag = ug.adjoint() * &a * &ug;
            let want = ens.evaluate(&dec, (ag.adjoint() * &a).as_ref());
            assert!((m.autocorrelation(&[g as f64]) - want).norm() < 1e-12);
            ug = &ug * &u;
        }
        let total = ens.evaluate(&dec, (a.adjoint() * &a).as_ref()).re;
        assert!((m.total_mass - total).abs() < 1e-12 * total);
        assert!(m.atoms.iter().all(|x| x.mass >= 0.0));
    }

    #[test]
    fn identity_measure_is_unit_atom_at_zero() {
        let (dec, _) = random_cyclic(23, 5);
        let m = empirical_spectral_measure(&dec, 10.0, linalg::identity(5).as_ref()).unwrap();
        assert_eq!(m.atoms.len(), 1);
        assert!((m.mass_at_zero() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn offdiagonal_conservation() {
        let (dec, a) = random_cyclic(24, 8);
        let e = dec.energy_levels()[5];
        let cut = dec.columns_upto(e);
        let at = dec.to_eigenbasis(a.as_ref());
        let off = offdiagonal_sum(&dec, e, f64::INFINITY, a.as_ref()).unwrap();
        let diag: f64 = (0..cut).map(|i| at[(i, i)].norm_sqr()).sum::<f64>() / cut as f64;
        let total: f64 = (0..cut)
            .flat_map(|i| (0..cut).map(move |j| (i, j)))
            .map(|(i, j)| at[(i, j)].norm_sqr())
            .sum::<f64>()
            / cut as f64;
        assert!((off + diag - total).abs() < 1e-12 * total);
    }
}
