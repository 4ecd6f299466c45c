//! Test-side oracles: systems with planted spectral data, and brute-force
//! references that never go through the library's decomposition.
#![allow(dead_code)]

use qergo::algebra::{CovariantSystem, GroupAction};
use qergo::linalg::{self, CMat, C64};
use rand::Rng;

/// `U = W diag(e^{iθ}) W*` (or `H = W diag(λ) W*`) with known levels.
pub struct Planted {
    pub w: CMat,
    /// Level of every column of `w`.
    pub level_of: Vec<usize>,
    pub levels: Vec<f64>,
    pub flow: bool,
    pub generator: CMat,
}

impl Planted {
    pub fn dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn system(&self) -> CovariantSystem {
        let action = if self.flow {
            GroupAction::flow(self.generator.clone())
        } else {
            GroupAction::cyclic(self.generator.clone())
        };
        CovariantSystem::new(action).expect("planted system")
    }

    pub fn projector(&self, level: usize) -> CMat {
        let d = self.dim();
        let cols: Vec<usize> = (0..d).filter(|&j| self.level_of[j] == level).collect();
        CMat::from_fn(d, d, |r, c| {
            cols.iter().map(|&k| self.w[(r, k)] * self.w[(c, k)].conj()).sum()
        })
    }

    /// `Σ_k P_k A P_k`.
    pub fn compress(&self, a: &CMat) -> CMat {
        let mut out = linalg::zeros(self.dim(), self.dim());
        for k in 0..self.levels.len() {
            let p = self.projector(k);
            out += &p * a * &p;
        }
        out
    }

    /// Smallest gap between distinct levels (phases measured on the circle).
    pub fn gap(&self) -> f64 {
        let mut g = f64::INFINITY;
        for (i, &x) in self.levels.iter().enumerate() {
            for &y in &self.levels[i + 1..] {
                let d = if self.flow {
                    (x - y).abs()
                } else {
                    (C64::from_polar(1.0, x) - C64::from_polar(1.0, y)).norm()
                };
                g = g.min(d);
            }
        }
        g
    }

    /// Brute-force `(1/T) Σ_{t<T} U^{t*} A U^t` for cyclic systems; the
    /// closed-form `(1/T) ∫_0^T e^{-iHt} A e^{iHt} dt` in the planted basis
    /// for flows.
    pub fn time_average(&self, a: &CMat, t: usize) -> CMat {
        let d = self.dim();
        if !self.flow {
            let mut acc = linalg::zeros(d, d);
            let mut ut = linalg::identity(d);
            for _ in 0..t {
                acc += ut.adjoint() * a * &ut;
                ut = &ut * &self.generator;
            }
            return linalg::scale(acc.as_ref(), C64::new(1.0 / t as f64, 0.0));
        }
        let b = self.w.adjoint() * a * &self.w;
        let tf = t as f64;
        let k = CMat::from_fn(d, d, |i, j| {
            let x = (self.levels[self.level_of[j]] - self.levels[self.level_of[i]]) * tf;
            let kern = if x.abs() < 1e-6 {
                C64::new(1.0 - x * x / 6.0, x / 2.0)
            } else {
                (C64::from_polar(1.0, x) - linalg::ONE) / C64::new(0.0, x)
            };
            b[(i, j)] * kern
        });
        &self.w * k * self.w.adjoint()
    }
}

/// Random levels at least `sep` apart; every column gets a random level, so
/// multiplicities are common.
pub fn planted<R: Rng + ?Sized>(rng: &mut R, d: usize, flow: bool) -> Planted {
    let n_levels = rng.random_range(1..=d);
    let sep = 0.05;
    let mut levels: Vec<f64> = Vec::new();
    while levels.len() < n_levels {
        let x = if flow {
            rng.random_range(-3.0..3.0)
        } else {
            rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)
        };
        let far = levels.iter().all(|&y| {
            let diff: f64 = x - y;
            let circ = if flow { diff.abs() } else { 2.0 * (diff / 2.0).sin().abs() };
            circ >= sep
        });
        if far {
            levels.push(x);
        }
    }
    let mut level_of: Vec<usize> = (0..d).map(|j| if j < n_levels { j } else { rng.random_range(0..n_levels) }).collect();
    // shuffle so repeated levels are not always last
    for i in (1..d).rev() {
        let j = rng.random_range(0..=i);
        level_of.swap(i, j);
    }
    let w = linalg::random_unitary(rng, d);
    let diag: Vec<C64> = level_of
        .iter()
        .map(|&k| {
            if flow {
                C64::new(levels[k], 0.0)
            } else {
                C64::from_polar(1.0, levels[k])
            }
        })
        .collect();
    let mut generator = &w * linalg::from_diag(&diag) * w.adjoint();
    if flow {
        generator = linalg::hermitian_part(generator.as_ref());
    }
    Planted {
        w,
        level_of,
        levels,
        flow,
        generator,
    }
}

pub fn rel_diff(a: &CMat, b: &CMat) -> f64 {
    linalg::max_abs_diff(a.as_ref(), b.as_ref()) / linalg::max_abs(b.as_ref()).max(1.0)
}

/// Dense `T(m, n)` straight from `T[k, k+m] = exp(iπ(mn + 2nk)/N)`, with
/// the phase reduced in integers.
pub fn weyl_dense(size: usize, m: i64, n: i64) -> CMat {
    let nn = size as i64;
    CMat::from_fn(size, size, |k, l| {
        if (k as i64 + m).rem_euclid(nn) as usize != l {
            return linalg::ZERO;
        }
        let e = (m * n + 2 * n * k as i64).rem_euclid(2 * nn);
        C64::from_polar(1.0, std::f64::consts::PI * e as f64 / size as f64)
    })
}

/// Eigenvalues of a Hermitian matrix below `tol · max(1, largest)`.
pub fn nullity(h: &CMat, tol: f64) -> usize {
    let (vals, _) = linalg::hermitian_eigen(h.as_ref()).expect("eigen");
    let top = vals.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    vals.iter().filter(|v| v.abs() <= tol * top).count()
}
