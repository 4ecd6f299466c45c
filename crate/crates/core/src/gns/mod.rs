//! Gelfand–Segal construction for states on finite-dimensional matrix
//! *-algebras carrying a group action.
//!
//! Quotient coordinates are orthonormal for `⟨A, B⟩ = ω(B* A)`; the null
//! ideal is the numerical kernel of the Gram matrix.

use faer::{Mat, MatRef};
use serde::Serialize;

use crate::algebra::{FactorKind, GroupAction, GroupElement};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};

/// A unital *-subalgebra of `M_d`, given by a linear basis, together with a
/// group action that leaves it invariant.
#[derive(Debug, Clone)]
pub struct FiniteStarAlgebra {
    dim: usize,
    basis: Vec<CMat>,
    action: GroupAction,
    /// Pseudo-inverse of the Hilbert–Schmidt Gram matrix (unused when the
    /// basis is orthonormal).
    hs_pinv: Option<CMat>,
}

const SPAN_TOL: f64 = 1e-10;

impl FiniteStarAlgebra {
    /// `M_d` with the matrix-unit basis `E_ij`, ordered row-major.
    pub fn full_matrix(action: GroupAction) -> Self {
        let d = action.dim();
        let basis = (0..d * d)
            .map(|k| {
                let mut e = linalg::zeros(d, d);
                e[(k / d, k % d)] = linalg::ONE;
                e
            })
            .collect();
        Self {
            dim: d,
            basis,
            action,
            hs_pinv: None,
        }
    }

    /// Diagonal matrices `E_ii`. The action must map diagonal matrices to
    /// diagonal matrices.
    pub fn diagonal(action: GroupAction) -> Result<Self> {
        let d = action.dim();
        let basis = (0..d)
            .map(|k| {
                let mut e = linalg::zeros(d, d);
                e[(k, k)] = linalg::ONE;
                e
            })
            .collect();
        let alg = Self {
            dim: d,
            basis,
            action,
            hs_pinv: None,
        };
        alg.check_action_invariance()?;
        Ok(alg)
    }

    /// `C · I`.
    pub fn scalars(action: GroupAction) -> Self {
        let d = action.dim();
        let s = 1.0 / (d as f64).sqrt();
        Self {
            dim: d,
            basis: vec![linalg::scale(linalg::identity(d).as_ref(), C64::new(s, 0.0))],
            action,
            hs_pinv: None,
        }
    }

    /// Arbitrary basis; checked for independence, unit, adjoint and product
    /// closure, and invariance under the action's generators.
    pub fn from_basis(basis: Vec<CMat>, action: GroupAction) -> Result<Self> {
        let d = action.dim();
        if basis.is_empty() {
            return Err(Error::InvalidArgument("empty algebra basis".into()));
        }
        for b in &basis {
            if b.nrows() != d || b.ncols() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: b.nrows(),
                });
            }
        }
        let n = basis.len();
        let gram = Mat::from_fn(n, n, |i, j| linalg::hs_inner(basis[i].as_ref(), basis[j].as_ref()));
        let (vals, vecs) = linalg::hermitian_eigen(gram.as_ref())?;
        let top = vals.last().copied().unwrap_or(0.0);
        if vals[0] <= 1e-12 * top {
            return Err(Error::InvalidArgument("algebra basis is linearly dependent".into()));
        }
        let inv: Vec<C64> = vals.iter().map(|&v| C64::new(1.0 / v, 0.0)).collect();
        let pinv = &vecs * linalg::from_diag(&inv) * vecs.adjoint();
        let alg = Self {
            dim: d,
            basis,
            action,
            hs_pinv: Some(pinv),
        };
        alg.coefficients(linalg::identity(d).as_ref())
            .map_err(|_| Error::InvalidArgument("algebra does not contain the identity".into()))?;
        for (i, a) in alg.basis.iter().enumerate() {
            alg.coefficients(a.adjoint().to_owned().as_ref())
                .map_err(|_| Error::InvalidArgument(format!("basis element {i}: adjoint not in span")))?;
            for (j, b) in alg.basis.iter().enumerate() {
                alg.coefficients((a * b).as_ref()).map_err(|_| {
                    Error::InvalidArgument(format!("product of basis elements {i}, {j} not in span"))
                })?;
            }
        }
        alg.check_action_invariance()?;
        Ok(alg)
    }

    fn check_action_invariance(&self) -> Result<()> {
        for g in self.generator_maps() {
            for (i, b) in self.basis.iter().enumerate() {
                let img = g.apply(b);
                self.coefficients(img.as_ref()).map_err(|_| {
                    Error::InvalidAction(format!("action moves basis element {i} out of the algebra"))
                })?;
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn basis(&self) -> &[CMat] {
        &self.basis
    }

    pub fn action(&self) -> &GroupAction {
        &self.action
    }

    /// Coefficients of `X` in the basis; fails if `X` is not in the span.
    pub fn coefficients(&self, x: MatRef<'_, C64>) -> Result<Vec<C64>> {
        let r: Vec<C64> = self
            .basis
            .iter()
            .map(|b| linalg::hs_inner(b.as_ref(), x))
            .collect();
        let c = match &self.hs_pinv {
            None => r,
            Some(p) => (0..r.len())
                .map(|i| (0..r.len()).map(|j| p[(i, j)] * r[j]).sum())
                .collect(),
        };
        let mut rec = linalg::zeros(self.dim, self.dim);
        for (ci, b) in c.iter().zip(&self.basis) {
            if *ci != linalg::ZERO {
                rec += linalg::scale(b.as_ref(), *ci);
            }
        }
        let res = linalg::max_abs_diff(rec.as_ref(), x);
        if res > SPAN_TOL * linalg::max_abs(x).max(1.0) {
            return Err(Error::NotInAlgebra(res));
        }
        Ok(c)
    }

    /// Linear maps of the algebra induced by the generators of the action.
    fn generator_maps(&self) -> Vec<GeneratorMap<'_>> {
        let mut out = Vec::new();
        for f in &self.action.factors {
            out.push(match f.kind {
                FactorKind::Cyclic => GeneratorMap::Step(&f.matrix),
                FactorKind::Flow => GeneratorMap::Derivation(&f.matrix),
            });
        }
        if let Some(g) = &self.action.finite {
            out.extend(g.elements.iter().map(GeneratorMap::Step));
        }
        out
    }
}

enum GeneratorMap<'a> {
    /// `B ↦ U* B U`.
    Step(&'a CMat),
    /// `B ↦ i[B, H]`, the derivative of `e^{-itH} B e^{itH}` at `t = 0`.
    Derivation(&'a CMat),
}

impl GeneratorMap<'_> {
    fn apply(&self, b: &CMat) -> CMat {
        match self {
            GeneratorMap::Step(u) => u.adjoint() * b * *u,
            GeneratorMap::Derivation(h) => {
                let c = linalg::commutator(b.as_ref(), h.as_ref());
                linalg::scale(c.as_ref(), C64::new(0.0, 1.0))
            }
        }
    }
}

/// Represented generator of the action on the quotient.
#[derive(Debug, Clone)]
pub enum GnsGenerator {
    /// `U_ω(1)` for a cyclic factor.
    Step(CMat),
    /// Anti-Hermitian `L` with `U_ω(t) = e^{tL}` for a flow factor.
    Flow(CMat),
    /// `U_ω(g)` for a finite-group element.
    Finite(CMat),
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct GnsResiduals {
    pub state_reproduction: f64,
    pub vacuum_invariance: f64,
    pub covariance: f64,
    pub unitarity: f64,
    /// Numerical rank of `{π(b)Ω}` minus the quotient dimension (0 when Ω is
    /// cyclic).
    pub cyclicity_defect: usize,
}

impl GnsResiduals {
    pub fn max_residual(&self) -> f64 {
        self.state_reproduction
            .max(self.vacuum_invariance)
            .max(self.covariance)
            .max(self.unitarity)
    }
}

/// `(ℋ_ω, π_ω, U_ω, Ω)` with the invariant projector `E_ω`.
#[derive(Debug, Clone)]
pub struct GnsTriple {
    algebra: FiniteStarAlgebra,
    density: CMat,
    pub quotient_dim: usize,
    pub null_rank: usize,
    /// Algebra coefficients → quotient coordinates (`r × n`).
    pub iso: CMat,
    /// Quotient coordinates → algebra coefficients (a right inverse of `iso`).
    pub lift: CMat,
    /// `π_ω(b_a)` for every basis element.
    pub pi: Vec<CMat>,
    pub omega: Vec<C64>,
    pub generators: Vec<GnsGenerator>,
    /// Projector onto the `U_ω`-invariant vectors.
    pub e_omega: CMat,
    invariant_basis: CMat,
    pub residuals: GnsResiduals,
}

#[derive(Debug, Clone, Serialize)]
pub struct GnsSummary {
    pub quotient_dim: usize,
    pub null_rank: usize,
    pub vacuum_rank: usize,
    pub g_abelian_certificate: f64,
    pub residuals: GnsResiduals,
}

/// Builds the GNS triple of the state `ω = Tr(ρ ·)` on `algebra`.
pub fn gns_construct(algebra: &FiniteStarAlgebra, rho: MatRef<'_, C64>, null_tol: f64) -> Result<GnsTriple> {
    let d = algebra.dim;
    if rho.nrows() != d || rho.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: rho.nrows(),
        });
    }
    if linalg::hermiticity_residual(rho) > 1e-12 {
        return Err(Error::InvalidState("density matrix is not Hermitian".into()));
    }
    let (rv, _) = linalg::hermitian_eigen(rho)?;
    if rv[0] < -1e-12 {
        return Err(Error::InvalidState(format!(
            "density matrix has negative eigenvalue {:.3e}",
            rv[0]
        )));
    }
    let tr = linalg::trace(rho);
    if (tr - linalg::ONE).norm() > 1e-10 {
        return Err(Error::InvalidState(format!("trace is {tr}, not 1")));
    }
    let state = |x: &CMat| linalg::hs_inner(rho, x.as_ref());
    let maps = algebra.generator_maps();
    for g in &maps {
        for (i, b) in algebra.basis.iter().enumerate() {
            let img = g.apply(b);
            let drift = match g {
                GeneratorMap::Step(_) => (state(&img) - state(b)).norm(),
                GeneratorMap::Derivation(_) => state(&img).norm(),
            };
            if drift > 1e-10 * linalg::max_abs(b.as_ref()).max(1.0) {
                return Err(Error::InvalidState(format!(
                    "state is not invariant (basis element {i} drifts by {drift:.2e})"
                )));
            }
        }
    }

    let basis = &algebra.basis;
    let n = basis.len();
    let rho_owned = rho.to_owned();
    let brho: Vec<CMat> = basis.iter().map(|b| b * &rho_owned).collect();
    // G_ij = ω(b_i* b_j) = Tr(b_i* b_j ρ)
    let gram = Mat::from_fn(n, n, |i, j| linalg::hs_inner(basis[i].as_ref(), brho[j].as_ref()));
    let gram = linalg::hermitian_part(gram.as_ref());
    let (gv, gw) = linalg::hermitian_eigen(gram.as_ref())?;
    let top = *gv.last().unwrap();
    if top <= 0.0 {
        return Err(Error::NumericalFailure("Gram matrix vanishes".into()));
    }
    if gv[0] < -1e-10 * top {
        return Err(Error::NumericalFailure(format!(
            "Gram matrix is not positive: eigenvalues in [{:.3e}, {:.3e}]",
            gv[0], top
        )));
    }
    let keep: Vec<usize> = (0..n).filter(|&i| gv[i] > null_tol * top).collect();
    let r = keep.len();
    let iso = Mat::from_fn(r, n, |a, b| gw[(b, keep[a])].conj() * gv[keep[a]].sqrt());
    let lift = Mat::from_fn(n, r, |b, a| gw[(b, keep[a])] / gv[keep[a]].sqrt());

    let coeff_matrix = |f: &dyn Fn(&CMat) -> CMat| -> Result<CMat> {
        let cols: Vec<Vec<C64>> = basis
            .iter()
            .map(|b| algebra.coefficients(f(b).as_ref()))
            .collect::<Result<_>>()?;
        Ok(Mat::from_fn(n, n, |i, j| cols[j][i]))
    };
    let push = |m: &CMat| -> CMat { &iso * m * &lift };

    let mut pi = Vec::with_capacity(n);
    for a in basis {
        let left = coeff_matrix(&|b: &CMat| a * b)?;
        pi.push(push(&left));
    }
    let omega_c = algebra.coefficients(linalg::identity(d).as_ref())?;
    let omega: Vec<C64> = (0..r)
        .map(|i| (0..n).map(|j| iso[(i, j)] * omega_c[j]).sum())
        .collect();

    let mut generators = Vec::with_capacity(maps.len());
    let mut coeff_maps = Vec::with_capacity(maps.len());
    for g in &maps {
        let m = coeff_matrix(&|b: &CMat| g.apply(b))?;
        let q = push(&m);
        generators.push(match g {
            GeneratorMap::Derivation(_) => GnsGenerator::Flow(q),
            GeneratorMap::Step(_) => GnsGenerator::Step(q),
        });
        coeff_maps.push(m);
    }
    // Relabel finite-group generators.
    let nf = algebra.action.factors.len();
    for gen in generators.iter_mut().skip(nf) {
        if let GnsGenerator::Step(m) = gen {
            *gen = GnsGenerator::Finite(m.clone());
        }
    }

    // E_ω: kernel of Σ X*X with X = U − I (steps) or L (flows).
    let mut acc = linalg::zeros(r, r);
    for gen in &generators {
        let x = match gen {
            GnsGenerator::Step(u) | GnsGenerator::Finite(u) => {
                let mut x = u.clone();
                for i in 0..r {
                    x[(i, i)] -= linalg::ONE;
                }
                x
            }
            GnsGenerator::Flow(l) => l.clone(),
        };
        acc += x.adjoint() * &x;
    }
    let (ev, ew) = linalg::hermitian_eigen(acc.as_ref())?;
    let scale = ev.last().copied().unwrap_or(0.0).max(1.0);
    let inv_cols: Vec<usize> = (0..r).filter(|&i| ev[i] <= 1e-9 * scale).collect();
    let invariant_basis = Mat::from_fn(r, inv_cols.len(), |i, j| ew[(i, inv_cols[j])]);
    let e_omega = &invariant_basis * invariant_basis.adjoint();

    let mut triple = GnsTriple {
        algebra: algebra.clone(),
        density: rho_owned,
        quotient_dim: r,
        null_rank: n - r,
        iso,
        lift,
        pi,
        omega,
        generators,
        e_omega,
        invariant_basis,
        residuals: GnsResiduals::default(),
    };
    triple.residuals = triple.compute_residuals(&coeff_maps)?;
    Ok(triple)
}

impl GnsTriple {
    pub fn algebra(&self) -> &FiniteStarAlgebra {
        &self.algebra
    }

    pub fn density(&self) -> &CMat {
        &self.density
    }

    /// `ω(A) = Tr(ρ A)`.
    pub fn state(&self, a: MatRef<'_, C64>) -> C64 {
        linalg::hs_inner(self.density.as_ref(), a)
    }

    /// `ψ_A = π_ω(A)Ω`, the image of `A` in the quotient.
    pub fn psi(&self, a: MatRef<'_, C64>) -> Result<Vec<C64>> {
        let c = self.algebra.coefficients(a)?;
        Ok((0..self.quotient_dim)
            .map(|i| (0..c.len()).map(|j| self.iso[(i, j)] * c[j]).sum())
            .collect())
    }

    /// `π_ω(A)` for `A` in the algebra.
    pub fn represent(&self, a: MatRef<'_, C64>) -> Result<CMat> {
        let c = self.algebra.coefficients(a)?;
        let r = self.quotient_dim;
        let mut out = linalg::zeros(r, r);
        for (ci, p) in c.iter().zip(&self.pi) {
            if *ci != linalg::ZERO {
                out += linalg::scale(p.as_ref(), *ci);
            }
        }
        Ok(out)
    }

    /// `U_ω(g)`.
    pub fn unitary(&self, g: &GroupElement) -> Result<CMat> {
        let nf = self.algebra.action.factors.len();
        if g.abelian.len() != nf {
            return Err(Error::InvalidArgument(format!(
                "group element has {} abelian components, action has {nf}",
                g.abelian.len()
            )));
        }
        let r = self.quotient_dim;
        let mut u = linalg::identity(r);
        for (gen, &t) in self.generators.iter().zip(&g.abelian) {
            let f = match gen {
                GnsGenerator::Step(s) => {
                    if t.fract() != 0.0 {
                        return Err(Error::InvalidArgument(format!("Z-action element {t} is not an integer")));
                    }
                    let base = if t < 0.0 { s.adjoint().to_owned() } else { s.clone() };
                    let mut p = linalg::identity(r);
                    for _ in 0..(t.abs() as u64) {
                        p = &p * &base;
                    }
                    p
                }
                GnsGenerator::Flow(l) => {
                    // L = −iK with K Hermitian
                    let k = linalg::scale(l.as_ref(), C64::new(0.0, 1.0));
                    let (mu, w) = linalg::hermitian_eigen(k.as_ref())?;
                    let ph: Vec<C64> = mu.iter().map(|&m| C64::from_polar(1.0, -t * m)).collect();
                    &w * linalg::from_diag(&ph) * w.adjoint()
                }
                GnsGenerator::Finite(_) => unreachable!("finite generators follow the abelian ones"),
            };
            u = &u * &f;
        }
        if let Some(k) = g.finite {
            match self.generators.get(nf + k) {
                Some(GnsGenerator::Finite(m)) => u = &u * m,
                _ => return Err(Error::InvalidArgument(format!("no finite group element {k}"))),
            }
        }
        Ok(u)
    }

    pub fn vacuum_rank(&self) -> usize {
        self.invariant_basis.ncols()
    }

    /// `max_{a,b} ‖[E π(b_a) E, E π(b_b) E]‖`; exactly 0 when `rank E ≤ 1`.
    pub fn check_g_abelian(&self) -> f64 {
        if self.vacuum_rank() <= 1 {
            return 0.0;
        }
        let k = &self.invariant_basis;
        let comp: Vec<CMat> = self.pi.iter().map(|p| k.adjoint() * p * k).collect();
        let mut worst = 0.0f64;
        for i in 0..comp.len() {
            for j in 0..i {
                let c = linalg::commutator(comp[i].as_ref(), comp[j].as_ref());
                if linalg::max_abs(c.as_ref()) > 0.0 {
                    worst = worst.max(linalg::op_norm(c.as_ref()));
                }
            }
        }
        worst
    }

    /// `(⟨ψ_A, E_ω ψ_A⟩, |ω(A)|²)`.
    pub fn vacuum_average_identity(&self, a: MatRef<'_, C64>) -> Result<(f64, f64)> {
        let psi = self.psi(a)?;
        let k = &self.invariant_basis;
        let mut lhs = 0.0;
        for j in 0..k.ncols() {
            let p: C64 = (0..psi.len()).map(|i| k[(i, j)].conj() * psi[i]).sum();
            lhs += p.norm_sqr();
        }
        let w: C64 = self
            .omega
            .iter()
            .zip(&psi)
            .map(|(o, p)| o.conj() * p)
            .sum();
        Ok((lhs, w.norm_sqr()))
    }

    pub fn summary(&self) -> GnsSummary {
        GnsSummary {
            quotient_dim: self.quotient_dim,
            null_rank: self.null_rank,
            vacuum_rank: self.vacuum_rank(),
            g_abelian_certificate: self.check_g_abelian(),
            residuals: self.residuals,
        }
    }

    fn compute_residuals(&self, coeff_maps: &[CMat]) -> Result<GnsResiduals> {
        let r = self.quotient_dim;
        let n = self.pi.len();
        let mut res = GnsResiduals::default();
        let om = &self.omega;
        let apply = |m: &CMat, v: &[C64]| -> Vec<C64> {
            (0..m.nrows())
                .map(|i| (0..v.len()).map(|j| m[(i, j)] * v[j]).sum())
                .collect()
        };
        for (a, p) in self.pi.iter().enumerate() {
            let pv = apply(p, om);
            let v: C64 = om.iter().zip(&pv).map(|(x, y)| x.conj() * y).sum();
            let want = self.state(self.algebra.basis[a].as_ref());
            res.state_reproduction = res.state_reproduction.max((v - want).norm());
        }
        for (gen, cm) in self.generators.iter().zip(coeff_maps) {
            let (m, is_flow) = match gen {
                GnsGenerator::Step(u) | GnsGenerator::Finite(u) => (u, false),
                GnsGenerator::Flow(l) => (l, true),
            };
            let mv = apply(m, om);
            let drift = mv
                .iter()
                .zip(om)
                .map(|(x, y)| if is_flow { x.norm() } else { (x - y).norm() })
                .fold(0.0, f64::max);
            res.vacuum_invariance = res.vacuum_invariance.max(drift);
            if is_flow {
                let s = m + m.adjoint();
                res.unitarity = res.unitarity.max(linalg::max_abs(s.as_ref()));
            } else {
                res.unitarity = res.unitarity.max(linalg::unitarity_residual(m.as_ref()));
            }
            for a in 0..n {
                // π(g(b_a)) = Σ_c cm[c, a] π(b_c)
                let mut want = linalg::zeros(r, r);
                for c in 0..n {
                    if cm[(c, a)] != linalg::ZERO {
                        want += linalg::scale(self.pi[c].as_ref(), cm[(c, a)]);
                    }
                }
                let got = if is_flow {
                    linalg::commutator(m.as_ref(), self.pi[a].as_ref())
                } else {
                    m * &self.pi[a] * m.adjoint()
                };
                res.covariance = res.covariance.max(linalg::max_abs_diff(got.as_ref(), want.as_ref()));
            }
        }
        let span = Mat::from_fn(r, n, |i, a| {
            (0..r).map(|j| self.pi[a][(i, j)] * om[j]).sum::<C64>()
        });
        let sv = span.singular_values().map_err(|e| Error::NumericalFailure(format!("{e:?}")))?;
        let top = sv.first().copied().unwrap_or(0.0);
        let rank = sv.iter().filter(|&&s| s > 1e-10 * top.max(1e-300)).count();
        res.cyclicity_defect = r - rank.min(r);
        Ok(res)
    }
}

/// `g ↦ ⟨U_ω(g) ψ_A, ψ_A⟩ = ω(α_g(A)* A)` over a grid of group elements.
pub fn gns_autocorrelation(
    triple: &GnsTriple,
    a: MatRef<'_, C64>,
    grid: &[GroupElement],
) -> Result<Vec<C64>> {
    let psi = triple.psi(a)?;
    grid.iter()
        .map(|g| {
            let u = triple.unitary(g)?;
            let mut s = linalg::ZERO;
            for i in 0..psi.len() {
                let ui: C64 = (0..psi.len()).map(|j| u[(i, j)] * psi[j]).sum();
                s += ui.conj() * psi[i];
            }
            Ok(s)
        })
        .collect()
}

/// Discrete Fourier masses of an autocorrelation sampled at `g = 0..L−1`:
/// `(x_k, (1/L) Σ_g c(g) e^{−i g x_k})` with `x_k = 2πk/L` wrapped into
/// `(-π, π]`, sorted by position.
pub fn fourier_masses(samples: &[C64]) -> Vec<(f64, C64)> {
    let l = samples.len();
    let mut out: Vec<(f64, C64)> = (0..l)
        .map(|k| {
            let x = 2.0 * std::f64::consts::PI * k as f64 / l as f64;
            let m: C64 = samples
                .iter()
                .enumerate()
                .map(|(g, c)| c * C64::from_polar(1.0, -(g as f64) * x))
                .sum();
            (linalg::wrap_phase(x), m / l as f64)
        })
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}
