//! Weyl–Heisenberg translations on `C^N` and quantized torus symbols.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};

/// A monomial matrix `M[k, col[k]] = phase[k]`, the shape of every `T(m, n)`.
#[derive(Debug, Clone)]
pub struct Monomial {
    pub col: Vec<usize>,
    pub phase: Vec<C64>,
}

impl Monomial {
    pub fn dim(&self) -> usize {
        self.col.len()
    }

    pub fn to_dense(&self) -> CMat {
        let n = self.dim();
        let mut out = linalg::zeros(n, n);
        for k in 0..n {
            out[(k, self.col[k])] = self.phase[k];
        }
        out
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        (0..self.dim()).map(|k| self.phase[k] * x[self.col[k]]).collect()
    }

    /// `M* x`.
    pub fn apply_adjoint(&self, x: &[C64]) -> Vec<C64> {
        let mut out = vec![linalg::ZERO; self.dim()];
        for k in 0..self.dim() {
            out[self.col[k]] = self.phase[k].conj() * x[k];
        }
        out
    }

    /// `M · B`.
    pub fn left_mul(&self, b: &CMat) -> CMat {
        CMat::from_fn(self.dim(), b.ncols(), |k, j| self.phase[k] * b[(self.col[k], j)])
    }

    /// `B · M`.
    pub fn right_mul(&self, b: &CMat) -> CMat {
        let mut out = linalg::zeros(b.nrows(), self.dim());
        for k in 0..self.dim() {
            let (c, p) = (self.col[k], self.phase[k]);
            for i in 0..b.nrows() {
                out[(i, c)] = b[(i, k)] * p;
            }
        }
        out
    }

    pub fn scale(&mut self, s: C64) {
        for p in &mut self.phase {
            *p *= s;
        }
    }
}

/// `T(m, n) = e^{iπmn/N} V^n U^m` with `(Uf)(k) = f(k+1)` and
/// `(Vf)(k) = e^{2πik/N} f(k)`, as a monomial:
/// `T[k, k+m] = exp(iπ(mn + 2nk)/N)`.
pub fn weyl_monomial(size: usize, m: i64, n: i64) -> Monomial {
    assert!(size > 0, "weyl_monomial: N must be positive");
    let nn = size as i128;
    let two_n = 2 * nn;
    let (m, n) = (m as i128, n as i128);
    let mn = (m * n).rem_euclid(two_n);
    let shift = m.rem_euclid(nn) as usize;
    let mut col = Vec::with_capacity(size);
    let mut phase = Vec::with_capacity(size);
    for k in 0..size {
        // exponent mod 2N keeps the phase exact for large frequencies
        let e = (mn + 2 * n.rem_euclid(nn) * k as i128).rem_euclid(two_n);
        col.push((k + shift) % size);
        phase.push(C64::from_polar(1.0, std::f64::consts::PI * e as f64 / size as f64));
    }
    Monomial { col, phase }
}

pub fn weyl_operator(size: usize, m: i64, n: i64) -> CMat {
    weyl_monomial(size, m, n).to_dense()
}

/// Finite Fourier series `f(q, p) = Σ c_{m,n} e(m, n)` on the torus, with
/// `Op_N(f) = Σ c_{m,n} T(m, n)`. Frequency `m` moves momentum (shift),
/// `n` multiplies by `e^{2πinq}` (clock).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusSymbol {
    pub name: String,
    pub coefficients: Vec<(i64, i64, C64)>,
}

impl TorusSymbol {
    pub fn new(name: impl Into<String>, coefficients: Vec<(i64, i64, C64)>) -> Self {
        let mut merged: Vec<(i64, i64, C64)> = Vec::new();
        for (m, n, c) in coefficients {
            match merged.iter_mut().find(|(a, b, _)| *a == m && *b == n) {
                Some(e) => e.2 += c,
                None => merged.push((m, n, c)),
            }
        }
        merged.sort_by_key(|&(m, n, _)| (m, n));
        Self {
            name: name.into(),
            coefficients: merged,
        }
    }

    /// Rows `[m, n, re, im]` as in experiment configs.
    pub fn from_rows(name: impl Into<String>, rows: &[[f64; 4]]) -> Result<Self> {
        let mut coeffs = Vec::with_capacity(rows.len());
        for r in rows {
            if r[0].fract() != 0.0 || r[1].fract() != 0.0 || !r[2].is_finite() || !r[3].is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "fourier row {r:?}: frequencies must be integers and coefficients finite"
                )));
            }
            coeffs.push((r[0] as i64, r[1] as i64, C64::new(r[2], r[3])));
        }
        Ok(Self::new(name, coeffs))
    }

    pub fn constant(c: f64) -> Self {
        Self::new("one", vec![(0, 0, C64::new(c, 0.0))])
    }

    /// `cos(2π(m q + n p))`-type cosine of a single mode:
    /// `(T(a, b) + T(−a, −b))/2`.
    pub fn cosine(name: impl Into<String>, a: i64, b: i64) -> Self {
        let h = C64::new(0.5, 0.0);
        Self::new(name, vec![(a, b, h), (-a, -b, h)])
    }

    /// `cos 2πq`.
    pub fn cos_q() -> Self {
        Self::cosine("cos_q", 0, 1)
    }

    /// `cos 2πp`.
    pub fn cos_p() -> Self {
        Self::cosine("cos_p", 1, 0)
    }

    /// Built-in symbols, by name.
    pub fn named(name: &str) -> Option<Self> {
        let h = C64::new(0.5, 0.0);
        let q = C64::new(0.25, 0.0);
        Some(match name {
            "one" => Self::constant(1.0),
            "cos_q" => Self::cos_q(),
            "cos_p" => Self::cos_p(),
            "cos_q_plus_p" => Self::cosine("cos_q_plus_p", 1, 1),
            "sin_q" => Self::new(
                "sin_q",
                vec![(0, 1, C64::new(0.0, -0.5)), (0, -1, C64::new(0.0, 0.5))],
            ),
            // cos²2πq = 1/2 + cos 4πq / 2
            "cos2_q" => Self::new("cos2_q", vec![(0, 0, h), (0, 2, q), (0, -2, q)]),
            _ => return None,
        })
    }

    pub fn catalog() -> Vec<Self> {
        ["one", "cos_q", "cos_p", "cos_q_plus_p", "sin_q", "cos2_q"]
            .iter()
            .map(|n| Self::named(n).unwrap())
            .collect()
    }

    /// `∫_{T²} f = c_{0,0}`.
    pub fn classical_average(&self) -> C64 {
        self.coefficients
            .iter()
            .filter(|(m, n, _)| *m == 0 && *n == 0)
            .map(|t| t.2)
            .sum()
    }

    /// `c_{−m,−n} = conj(c_{m,n})` for every frequency.
    pub fn is_real(&self) -> bool {
        self.coefficients.iter().all(|&(m, n, c)| {
            let partner = self
                .coefficients
                .iter()
                .find(|t| t.0 == -m && t.1 == -n)
                .map_or(linalg::ZERO, |t| t.2);
            (partner - c.conj()).norm() <= 1e-14 * c.norm().max(1.0)
        })
    }

    pub fn l1_norm(&self) -> f64 {
        self.coefficients.iter().map(|t| t.2.norm()).sum()
    }

    pub fn max_frequency(&self) -> i64 {
        self.coefficients
            .iter()
            .map(|t| t.0.abs().max(t.1.abs()))
            .max()
            .unwrap_or(0)
    }
}

/// `Op_N(f) = Σ c_{m,n} T(m, n)`; frequencies must satisfy `2|m|, 2|n| < N`.
pub fn quantize_symbol(size: usize, f: &TorusSymbol) -> Result<CMat> {
    if size == 0 {
        return Err(Error::InvalidArgument("N must be positive".into()));
    }
    for &(m, n, _) in &f.coefficients {
        if 2 * m.unsigned_abs() >= size as u64 || 2 * n.unsigned_abs() >= size as u64 {
            return Err(Error::Aliasing { m, n, size });
        }
    }
    let mut out = linalg::zeros(size, size);
    for &(m, n, c) in &f.coefficients {
        let t = weyl_monomial(size, m, n);
        for k in 0..size {
            out[(k, t.col[k])] += c * t.phase[k];
        }
    }
    if f.is_real() {
        // exact Hermitian symmetry, not just to rounding
        out = linalg::hermitian_part(out.as_ref());
    }
    Ok(out)
}
