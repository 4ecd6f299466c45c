//! Dense complex linear algebra helpers on top of `faer`.
//!
//! Everything in the crate works with [`CMat`], a heap-allocated column-major
//! complex matrix. The eigen routines here return orthonormal eigenvectors
//! together with eigenvalues (Hermitian case) or eigenphases in `(-π, π]`
//! (unitary case).

use std::f64::consts::PI;

use faer::{Mat, MatRef, Side};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = num_complex::Complex64;
pub type CMat = Mat<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Width of the cos-groups used by [`unitary_eigen`] before resolving the
/// phases inside a group. Eigenvector error scales as `eps / COS_GROUP_TOL`.
const COS_GROUP_TOL: f64 = 1e-4;

pub fn identity(d: usize) -> CMat {
    Mat::identity(d, d)
}

pub fn zeros(r: usize, c: usize) -> CMat {
    Mat::zeros(r, c)
}

pub fn from_diag(values: &[C64]) -> CMat {
    let d = values.len();
    Mat::from_fn(d, d, |i, j| if i == j { values[i] } else { ZERO })
}

pub fn from_real_diag(values: &[f64]) -> CMat {
    let d = values.len();
    Mat::from_fn(d, d, |i, j| if i == j { C64::new(values[i], 0.0) } else { ZERO })
}

pub fn adjoint(a: MatRef<'_, C64>) -> CMat {
    a.adjoint().to_owned()
}

pub fn trace(a: MatRef<'_, C64>) -> C64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)]).sum()
}

pub fn scale(a: MatRef<'_, C64>, s: C64) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s)
}

/// Largest entry modulus.
pub fn max_abs(a: MatRef<'_, C64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].norm());
        }
    }
    m
}

pub fn frobenius(a: MatRef<'_, C64>) -> f64 {
    a.norm_l2()
}

/// Operator (spectral) norm.
pub fn op_norm(a: MatRef<'_, C64>) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    match a.singular_values() {
        Ok(s) => s.into_iter().fold(0.0, f64::max),
        Err(_) => frobenius(a),
    }
}

pub fn max_abs_diff(a: MatRef<'_, C64>, b: MatRef<'_, C64>) -> f64 {
    assert_eq!(a.nrows(), b.nrows());
    assert_eq!(a.ncols(), b.ncols());
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    m
}

/// `‖A − A*‖_max`.
pub fn hermiticity_residual(a: MatRef<'_, C64>) -> f64 {
    let n = a.nrows();
    let mut m = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            m = m.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    m
}

/// `‖U*U − I‖_max`.
pub fn unitarity_residual(u: MatRef<'_, C64>) -> f64 {
    let g = u.adjoint() * u;
    max_abs_diff(g.as_ref(), identity(u.ncols()).as_ref())
}

/// `‖Q*Q − I‖_max` for a column set.
pub fn orthonormality_residual(q: MatRef<'_, C64>) -> f64 {
    unitarity_residual(q)
}

pub fn hermitian_part(a: MatRef<'_, C64>) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5)
}

pub fn commutator(a: MatRef<'_, C64>, b: MatRef<'_, C64>) -> CMat {
    a * b - b * a
}

/// Hilbert–Schmidt inner product `Tr(a* b)`.
pub fn hs_inner(a: MatRef<'_, C64>, b: MatRef<'_, C64>) -> C64 {
    let mut s = ZERO;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            s += a[(i, j)].conj() * b[(i, j)];
        }
    }
    s
}

/// Maps a real angle into `(-π, π]`.
pub fn wrap_phase(theta: f64) -> f64 {
    let mut t = theta.rem_euclid(2.0 * PI);
    if t > PI {
        t -= 2.0 * PI;
    }
    t
}

/// Eigendecomposition of a Hermitian matrix: ascending eigenvalues and
/// orthonormal eigenvectors as columns.
pub fn hermitian_eigen(h: MatRef<'_, C64>) -> Result<(Vec<f64>, CMat)> {
    let n = h.nrows();
    if n == 0 {
        return Ok((Vec::new(), zeros(0, 0)));
    }
    let sym = hermitian_part(h);
    let evd = sym
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::NumericalFailure(format!("hermitian eigensolver: {e:?}")))?;
    let vals = evd.S().column_vector().iter().map(|z| z.re).collect();
    Ok((vals, evd.U().to_owned()))
}

/// Single-linkage clustering of sorted values: returns index ranges of
/// consecutive runs whose neighbouring gaps are `<= tol`.
pub fn cluster_sorted(values: &[f64], tol: f64) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    if values.is_empty() {
        return out;
    }
    let mut start = 0;
    for i in 1..values.len() {
        if values[i] - values[i - 1] > tol {
            out.push(start..i);
            start = i;
        }
    }
    out.push(start..values.len());
    out
}

/// Modified Gram–Schmidt, applied twice. Columns with vanishing residual norm
/// are dropped.
pub fn orthonormalize_columns(q: MatRef<'_, C64>) -> CMat {
    let n = q.nrows();
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(q.ncols());
    for j in 0..q.ncols() {
        let mut v: Vec<C64> = (0..n).map(|i| q[(i, j)]).collect();
        let norm0 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for _ in 0..2 {
            for c in &cols {
                let proj: C64 = c.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                for (vi, ci) in v.iter_mut().zip(c) {
                    *vi -= proj * ci;
                }
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-8 * norm0.max(f64::MIN_POSITIVE) {
            for vi in &mut v {
                *vi /= norm;
            }
            cols.push(v);
        }
    }
    Mat::from_fn(n, cols.len(), |i, j| cols[j][i])
}

/// One eigenpair family of a unitary: the phase of each column of `vectors`.
#[derive(Debug, Clone)]
pub struct UnitaryEigen {
    pub phases: Vec<f64>,
    pub vectors: CMat,
}

/// Eigendecomposition of a unitary matrix.
///
/// The Hermitian part `(U + U*)/2` is diagonalised first; its eigenvalues are
/// `cos θ`. Eigenvalues are grouped with a coarse tolerance, and each group
/// (which contains `θ` and `−θ`, and any near-degenerate phases) is resolved by
/// diagonalising the small restriction of `U` to the group.
pub fn unitary_eigen(u: MatRef<'_, C64>) -> Result<UnitaryEigen> {
    let n = u.nrows();
    if n == 0 {
        return Ok(UnitaryEigen {
            phases: Vec::new(),
            vectors: zeros(0, 0),
        });
    }
    let (cosines, w) = hermitian_eigen(hermitian_part(u).as_ref())?;
    let uw = u * &w;
    let mut phases = vec![0.0; n];
    let mut vectors = zeros(n, n);
    for group in cluster_sorted(&cosines, COS_GROUP_TOL) {
        let k = group.len();
        let wg = w.as_ref().subcols(group.start, k);
        let uwg = uw.as_ref().subcols(group.start, k);
        if k == 1 {
            let z: C64 = (0..n).map(|i| wg[(i, 0)].conj() * uwg[(i, 0)]).sum();
            phases[group.start] = z.arg();
            for i in 0..n {
                vectors[(i, group.start)] = wg[(i, 0)];
            }
            continue;
        }
        let restricted = wg.adjoint() * uwg;
        let (local_phases, local_vecs) = small_normal_eigen(restricted.as_ref())?;
        let lifted = wg * &local_vecs;
        for (c, ph) in local_phases.iter().enumerate() {
            phases[group.start + c] = *ph;
            for i in 0..n {
                vectors[(i, group.start + c)] = lifted[(i, c)];
            }
        }
    }
    Ok(UnitaryEigen { phases, vectors })
}

/// Eigenphases and orthonormal eigenvectors of a small (nearly) unitary
/// matrix.
fn small_normal_eigen(r: MatRef<'_, C64>) -> Result<(Vec<f64>, CMat)> {
    let k = r.nrows();
    let evd = r
        .eigen()
        .map_err(|e| Error::NumericalFailure(format!("restricted eigensolver: {e:?}")))?;
    let vals: Vec<C64> = evd.S().column_vector().iter().copied().collect();
    let vecs = evd.U().to_owned();
    let mut order: Vec<usize> = (0..k).collect();
    let ph: Vec<f64> = vals.iter().map(|z| z.arg()).collect();
    order.sort_by(|&a, &b| ph[a].total_cmp(&ph[b]));
    let reordered = Mat::from_fn(k, k, |i, j| vecs[(i, order[j])]);
    // Orthonormalise in cluster order: within a cluster this picks a basis of
    // the joint eigenspace, across clusters it removes O(eps/gap) overlap.
    let q = orthonormalize_columns(reordered.as_ref());
    if q.ncols() != k {
        return Err(Error::NumericalFailure(
            "restricted unitary has a defective eigenbasis".into(),
        ));
    }
    // Re-read phases from the Rayleigh quotients of the orthonormal vectors.
    let rq = q.adjoint() * r * &q;
    let phases = (0..k).map(|i| rq[(i, i)].arg()).collect();
    Ok((phases, q))
}

/// Generator for reproducible random test matrices.
pub fn random_gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, r: usize, c: usize) -> CMat {
    Mat::from_fn(r, c, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    })
}

pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, d: usize) -> CMat {
    let g = random_gaussian_matrix(rng, d, d);
    hermitian_part(g.as_ref())
}

/// Haar-distributed unitary (QR of a complex Ginibre matrix with phase fix).
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, d: usize) -> CMat {
    let g = random_gaussian_matrix(rng, d, d);
    orthonormalize_columns(g.as_ref())
}

/// Unitary `V diag(e^{iθ}) V*` with prescribed phases and a Haar-random basis.
pub fn unitary_with_phases<R: Rng + ?Sized>(rng: &mut R, phases: &[f64]) -> CMat {
    let v = random_unitary(rng, phases.len());
    let diag: Vec<C64> = phases.iter().map(|&t| C64::from_polar(1.0, t)).collect();
    &v * from_diag(&diag) * v.adjoint()
}

/// Hermitian `V diag(λ) V*` with prescribed eigenvalues and a Haar-random basis.
pub fn hermitian_with_spectrum<R: Rng + ?Sized>(rng: &mut R, values: &[f64]) -> CMat {
    let v = random_unitary(rng, values.len());
    let h = &v * from_real_diag(values) * v.adjoint();
    hermitian_part(h.as_ref())
}
