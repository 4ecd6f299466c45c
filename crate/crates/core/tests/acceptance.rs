//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any fails.
//!
//!     cargo test -p qergo --test acceptance            # all
//!     cargo test -p qergo --test acceptance -- 4 8     # a subset

mod common;

use std::time::{Duration, Instant};

use common::{nullity, planted, rel_diff, weyl_dense};
use qergo::algebra::{block_compress, time_average, GroupAction};
use qergo::ergodicity::{extract_density_one, qe_defect, schwartz_chain, variance_s2_with, ExtractionSchedule, StateBasis};
use qergo::gns::{gns_construct, FiniteStarAlgebra};
use qergo::linalg::{self, CMat, C64};
use qergo::models::{
    eigenvalue_fraction, family_sweep, gue_hamiltonian, semicircle_mass, torus_propagator, weyl_monomial, Diagnostic,
    MapMatrix, ModelFamily, ObservableSpec, SweepOptions, SweepReport, CAT_MAP, SHEAR,
};
use qergo::states::EnsembleKind;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_s: u64) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_s as f64, || {
        format!("runtime {:.1} s exceeds {limit_s} s", elapsed.as_secs_f64())
    })
}

fn oracle_slope(points: &[(usize, f64)]) -> f64 {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| (p.0 as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn oracle_median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn sweep(family: ModelFamily, diags: Vec<Diagnostic>, windows: Vec<(usize, usize)>) -> Result<SweepReport, String> {
    let opts = SweepOptions {
        jobs: 1,
        windows,
        ..Default::default()
    };
    let r = family_sweep(&family, &diags, &opts).map_err(|e| e.to_string())?;
    if let Some((n, e)) = r.failures().first() {
        return Err(format!("N = {n}: {e}"));
    }
    Ok(r)
}

fn full_variance(r: &SweepReport, n: usize, obs: &str) -> f64 {
    r.size(n)
        .and_then(|s| s.observable(obs))
        .and_then(|o| o.full_variance())
        .unwrap_or(f64::NAN)
}

// 1: block compression, completeness, time averages, qe_defect = S₂
fn criterion_1() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let tol = 1e-10;
    let (mut worst_id, mut worst_ta, mut worst_bound): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for k in 0..200 {
        let d = rng.random_range(1..=64);
        let p = planted(&mut rng, d, k % 2 == 1);
        let decomp = p.system().decompose().map_err(|e| format!("system {k}: {e}"))?;
        let a = linalg::random_gaussian_matrix(&mut rng, d, d);
        let c = block_compress(&decomp, a.as_ref()).map_err(|e| e.to_string())?;
        let cc = block_compress(&decomp, c.as_ref()).map_err(|e| e.to_string())?;
        ensure(rel_diff(&cc, &c) <= tol, || format!("system {k}: compression not idempotent"))?;
        ensure(rel_diff(&c, &p.compress(&a)) <= tol, || format!("system {k}: compression differs from planted projectors"))?;
        let pos = a.adjoint() * &a;
        let cp = block_compress(&decomp, pos.as_ref()).map_err(|e| e.to_string())?;
        let (vals, _) = linalg::hermitian_eigen(linalg::hermitian_part(cp.as_ref()).as_ref()).map_err(|e| e.to_string())?;
        let scale = linalg::max_abs(pos.as_ref()).max(1.0);
        ensure(vals[0] >= -tol * scale, || format!("system {k}: compression of A*A has eigenvalue {}", vals[0]))?;
        let mut sum = linalg::zeros(d, d);
        for b in 0..decomp.blocks().len() {
            let q = decomp.block_basis(b);
            sum += q * q.adjoint();
        }
        ensure(rel_diff(&sum, &linalg::identity(d)) <= tol, || format!("system {k}: Σ Π_σ ≠ I"))?;

        let norm_a = linalg::frobenius(a.as_ref());
        for t in [1usize, 3, 17, 64] {
            let lib = time_average(&decomp, a.as_ref(), t as f64).map_err(|e| e.to_string())?;
            let brute = p.time_average(&a, t);
            let r = rel_diff(&lib, &brute);
            worst_ta = worst_ta.max(r);
            ensure(r <= tol, || format!("system {k}, T = {t}: time average off by {r:.2e}"))?;
            if p.levels.len() > 1 {
                let dev = linalg::frobenius((&lib - &c).as_ref());
                let bound = norm_a * 2.0 / (t as f64 * p.gap());
                worst_bound = worst_bound.max(dev / bound);
                ensure(dev <= bound * (1.0 + tol) + tol, || {
                    format!("system {k}, T = {t}: ‖⟨A⟩_T − ⟨A⟩‖ = {dev:.3e} above bound {bound:.3e}")
                })?;
            }
        }

        let h = linalg::hermitian_part(a.as_ref());
        let omega = linalg::trace(h.as_ref()) / d as f64;
        for &e in &decomp.energy_levels() {
            let s2 = variance_s2_with(&decomp, e, h.as_ref(), omega, EnsembleKind::OmegaE, StateBasis::Adapted)
                .map_err(|x| x.to_string())?;
            let qd = qe_defect(&decomp, e, h.as_ref(), omega).map_err(|x| x.to_string())?;
            let r = (s2 - qd).abs() / qd.abs().max(1e-300);
            let r = if qd.abs() < 1e-300 { (s2 - qd).abs() } else { r };
            worst_id = worst_id.max(r);
            ensure(r <= tol, || format!("system {k}, E = {e}: S₂ = {s2:.15e}, defect = {qd:.15e}"))?;
        }
    }
    Ok(format!(
        "200 systems: max rel (S₂ − defect) {worst_id:.1e}, time-average vs brute force {worst_ta:.1e}, deviation/bound ≤ {worst_bound:.2}"
    ))
}

// 2: Schwartz chain on a (T, E) grid
fn criterion_2() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut points = 0;
    let mut worst = f64::NEG_INFINITY;
    for k in 0..50 {
        let d = rng.random_range(1..=32);
        let p = planted(&mut rng, d, k % 3 == 2);
        let decomp = p.system().decompose().map_err(|e| e.to_string())?;
        let a = linalg::random_gaussian_matrix(&mut rng, d, d);
        let omega = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        for t in [1.0, 2.0, 5.0, 10.0, 50.0] {
            for &e in &decomp.energy_levels() {
                let (lhs, rhs) = schwartz_chain(&decomp, a.as_ref(), omega, t, e).map_err(|x| x.to_string())?;
                let excess = lhs - rhs;
                worst = worst.max(excess / rhs.abs().max(1.0));
                points += 1;
                ensure(excess <= 1e-12 * rhs.abs().max(1.0), || {
                    format!("system {k}, T = {t}, E = {e}: {lhs:.15e} > {rhs:.15e}")
                })?;
            }
        }
    }
    Ok(format!("50 systems, {points} grid points, zero violations (max relative excess {worst:.1e})"))
}

/// Brute-force count of invariant vectors in the GNS space: in coordinates
/// of the algebra, `dim ker Q − dim ker G` with `G = ρ(b_i* b_j)` and
/// `Q = L* G L`, `L = α − id`.
fn brute_vacuum_rank(basis: &[CMat], coords: &dyn Fn(&CMat) -> Vec<C64>, u: &CMat, rho: &CMat) -> usize {
    let n = basis.len();
    let g = CMat::from_fn(n, n, |i, j| linalg::trace((rho * basis[i].adjoint() * &basis[j]).as_ref()));
    let mut l = linalg::zeros(n, n);
    for (j, b) in basis.iter().enumerate() {
        let moved = u.adjoint() * b * u - b;
        for (i, z) in coords(&moved).into_iter().enumerate() {
            l[(i, j)] = z;
        }
    }
    let q = l.adjoint() * &g * &l;
    let q = linalg::hermitian_part(q.as_ref());
    let g = linalg::hermitian_part(g.as_ref());
    nullity(&q, 1e-9) - nullity(&g, 1e-9)
}

fn full_basis(d: usize) -> Vec<CMat> {
    let mut out = Vec::new();
    for i in 0..d {
        for j in 0..d {
            let mut e = linalg::zeros(d, d);
            e[(i, j)] = linalg::ONE;
            out.push(e);
        }
    }
    out
}

// 3: GNS triples on full matrix algebras and the diagonal subalgebra
fn criterion_3() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut cases = 0;
    let mut worst: f64 = 0.0;
    for d in [2usize, 3, 4, 6] {
        let full = full_basis(d);
        let full_coords = |x: &CMat| -> Vec<C64> { (0..d * d).map(|k| x[(k / d, k % d)]).collect() };
        let diag_basis: Vec<CMat> = (0..d)
            .map(|i| {
                let mut e = linalg::zeros(d, d);
                e[(i, i)] = linalg::ONE;
                e
            })
            .collect();
        let diag_coords = |x: &CMat| -> Vec<C64> { (0..d).map(|i| x[(i, i)]).collect() };
        for rep in 0..3 {
            let p = planted(&mut rng, d, false);
            let u = p.generator.clone();
            let alg = FiniteStarAlgebra::full_matrix(GroupAction::cyclic(u.clone()));

            // (a) vector state in one eigenspace
            let lvl = p.level_of[0];
            let mut psi = vec![linalg::ZERO; d];
            for j in (0..d).filter(|&j| p.level_of[j] == lvl) {
                let c = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                for (i, x) in psi.iter_mut().enumerate() {
                    *x += c * p.w[(i, j)];
                }
            }
            let nrm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let rho_vec = CMat::from_fn(d, d, |i, j| psi[i] * psi[j].conj() / (nrm * nrm));
            let mult = p.level_of.iter().filter(|&&l| l == lvl).count();

            // (b) trace state
            let rho_tr = linalg::scale(linalg::identity(d).as_ref(), C64::new(1.0 / d as f64, 0.0));
            let sum_m2: usize = (0..p.levels.len())
                .map(|k| p.level_of.iter().filter(|&&l| l == k).count().pow(2))
                .sum();

            // (c) diagonal subalgebra under a phased permutation
            let mut perm: Vec<usize> = (0..d).collect();
            for i in (1..d).rev() {
                let j = rng.random_range(0..=i);
                perm.swap(i, j);
            }
            let mut up = linalg::zeros(d, d);
            for i in 0..d {
                up[(i, perm[i])] = C64::from_polar(1.0, rng.random_range(-3.0..3.0));
            }
            let mut cycle_of = vec![usize::MAX; d];
            let mut cycles = 0;
            for s in 0..d {
                if cycle_of[s] == usize::MAX {
                    let mut i = s;
                    while cycle_of[i] == usize::MAX {
                        cycle_of[i] = cycles;
                        i = perm[i];
                    }
                    cycles += 1;
                }
            }
            // one cycle carries no weight when there are several
            let weights: Vec<f64> = (0..cycles)
                .map(|c| if cycles > 1 && c == rep % cycles { 0.0 } else { rng.random_range(0.1..1.0) })
                .collect();
            let raw: Vec<f64> = (0..d).map(|i| weights[cycle_of[i]]).collect();
            let total: f64 = raw.iter().sum();
            let rho_diag = linalg::from_real_diag(&raw.iter().map(|x| x / total).collect::<Vec<_>>());
            let live_cycles = weights.iter().filter(|&&w| w > 0.0).count();
            let support = raw.iter().filter(|&&w| w > 0.0).count();
            let diag_alg = FiniteStarAlgebra::diagonal(GroupAction::cyclic(up.clone())).map_err(|e| e.to_string())?;

            let runs: [(&str, &FiniteStarAlgebra, &CMat, &[CMat], &dyn Fn(&CMat) -> Vec<C64>, &CMat, usize, usize); 3] = [
                ("vector", &alg, &rho_vec, &full, &full_coords, &u, mult, d),
                ("trace", &alg, &rho_tr, &full, &full_coords, &u, sum_m2, d * d),
                ("diagonal", &diag_alg, &rho_diag, &diag_basis, &diag_coords, &up, live_cycles, support),
            ];
            for (what, a, rho, basis, coords, uu, expected, qdim) in runs {
                let t = gns_construct(a, rho.as_ref(), 1e-10).map_err(|e| format!("d = {d} {what}: {e}"))?;
                let r = &t.residuals;
                worst = worst.max(r.max_residual());
                ensure(r.max_residual() <= 1e-10 && r.cyclicity_defect == 0, || {
                    format!("d = {d} {what}: residuals {r:?}")
                })?;
                let brute = brute_vacuum_rank(basis, coords, uu, rho);
                ensure(t.vacuum_rank() == brute && brute == expected, || {
                    format!("d = {d} {what}: vacuum rank {} vs brute force {brute} vs expected {expected}", t.vacuum_rank())
                })?;
                ensure(t.quotient_dim == qdim, || format!("d = {d} {what}: quotient dim {} ≠ {qdim}", t.quotient_dim))?;
                cases += 1;
            }
        }
    }
    Ok(format!("{cases} triples, max residual {worst:.1e}, vacuum ranks match brute force"))
}

fn apply(a: &MapMatrix, v: (i64, i64)) -> (i64, i64) {
    (a[0][0] * v.0 + a[0][1] * v.1, a[1][0] * v.0 + a[1][1] * v.1)
}

// 4: Weyl relations and Egorov
fn criterion_4() -> Check {
    let mut worst_rel: f64 = 0.0;
    for size in 1..=32usize {
        let nn = size as i64;
        let mons: Vec<_> = (0..2 * nn)
            .flat_map(|m| (0..2 * nn).map(move |n| (m, n)))
            .map(|(m, n)| weyl_monomial(size, m, n))
            .collect();
        let at = |m: i64, n: i64| &mons[(m * 2 * nn + n) as usize];
        for m in 0..nn {
            for n in 0..nn {
                let tv = at(m, n);
                let dense = weyl_dense(size, m, n);
                worst_rel = worst_rel.max(linalg::max_abs_diff(tv.to_dense().as_ref(), dense.as_ref()));
                for m2 in 0..nn {
                    for n2 in 0..nn {
                        let tw = at(m2, n2);
                        let sum = at(m + m2, n + n2);
                        let phase = C64::from_polar(1.0, std::f64::consts::PI * ((m * n2 - n * m2) as f64) / size as f64);
                        for k in 0..size {
                            let c = tv.col[k];
                            let prod = tv.phase[k] * tw.phase[c];
                            if tw.col[c] != sum.col[k] {
                                return Err(format!("N = {size}: T({m},{n})T({m2},{n2}) has the wrong support"));
                            }
                            worst_rel = worst_rel.max((prod - phase * sum.phase[k]).norm());
                        }
                    }
                }
            }
        }
    }
    ensure(worst_rel <= 1e-10, || format!("Weyl relation residual {worst_rel:.2e}"))?;

    let mut worst_eg: f64 = 0.0;
    for (name, map) in [("cat", CAT_MAP), ("shear", SHEAR)] {
        for size in [8usize, 16, 64, 256] {
            let (m, check) = torus_propagator(size, &map).map_err(|e| format!("{name} N = {size}: {e}"))?;
            worst_eg = worst_eg.max(check.egorov_residual);
            let md = m.adjoint();
            for p in -3..=3i64 {
                for q in -3..=3i64 {
                    let lhs = &m * weyl_dense(size, p, q) * &md;
                    let (ap, aq) = apply(&map, (p, q));
                    let rhs = weyl_dense(size, ap, aq);
                    let phi = linalg::hs_inner(rhs.as_ref(), lhs.as_ref()) / size as f64;
                    let r = linalg::max_abs_diff(lhs.as_ref(), linalg::scale(rhs.as_ref(), phi).as_ref())
                        .max((phi.norm() - 1.0).abs());
                    worst_eg = worst_eg.max(r);
                }
            }
            worst_eg = worst_eg.max(linalg::unitarity_residual(m.as_ref()));
        }
    }
    ensure(worst_eg <= 1e-10, || format!("Egorov residual {worst_eg:.2e}"))?;
    Ok(format!(
        "Weyl relations exhaustive for N ≤ 32 (residual {worst_rel:.1e}); Egorov residual {worst_eg:.1e} for cat and shear"
    ))
}

// 5: cat-map variance trend and extraction
fn criterion_5() -> Check {
    let sizes: Vec<usize> = (60..=68).chain(960..=1088).collect();
    let family = ModelFamily::cat_map(sizes.clone())
        .with_observable(ObservableSpec::symbol("cos_q"))
        .with_observable(ObservableSpec::symbol("cos_p"));
    let diags = vec![
        Diagnostic::variance(),
        Diagnostic::Extraction {
            schedule: None,
            root_variance_multiple: Some(3.0),
        },
    ];
    let r = sweep(family, diags, vec![(60, 68), (960, 1088)])?;
    let mut out = Vec::new();
    for obs in ["cos_q", "cos_p"] {
        let lo = oracle_median(sizes.iter().filter(|&&n| n <= 68).map(|&n| full_variance(&r, n, obs)).collect());
        let hi = oracle_median(sizes.iter().filter(|&&n| n >= 960).map(|&n| full_variance(&r, n, obs)).collect());
        let lib_lo = r.window(obs, "variance_s2", 60, 68).and_then(|w| w.median);
        let lib_hi = r.window(obs, "variance_s2", 960, 1088).and_then(|w| w.median);
        ensure(lib_lo == Some(lo) && lib_hi == Some(hi), || format!("{obs}: window medians disagree with recomputation"))?;
        ensure(hi <= 0.25 * lo, || format!("{obs}: median {hi:.3e} > 0.25 × {lo:.3e}"))?;
        let mut min_density: f64 = 1.0;
        for &n in &sizes {
            let x = r
                .size(n)
                .and_then(|s| s.observable(obs))
                .and_then(|o| o.extraction.clone())
                .ok_or_else(|| format!("{obs}, N = {n}: no extraction"))?;
            min_density = min_density.min(x.final_density);
            ensure(x.final_density >= 0.9, || format!("{obs}, N = {n}: density {:.4}", x.final_density))?;
            ensure(x.sup_deviation <= 3.0 * x.root_variance, || {
                format!("{obs}, N = {n}: sup {:.4} > 3 × {:.4}", x.sup_deviation, x.root_variance)
            })?;
        }
        out.push(format!("{obs} ratio {:.3}, min density {min_density:.3}", hi / lo));
    }
    Ok(out.join("; "))
}

// 6: shear control
fn criterion_6() -> Check {
    let sizes = vec![64usize, 256, 1024];
    let family = ModelFamily::shear(sizes.clone()).with_observable(ObservableSpec::symbol("cos_p"));
    let r = sweep(family, vec![Diagnostic::variance()], Vec::new())?;
    let pts: Vec<(usize, f64)> = sizes.iter().map(|&n| (n, full_variance(&r, n, "cos_p"))).collect();
    for &(n, v) in &pts {
        ensure(v >= 0.05, || format!("N = {n}: S₂ = {v:.4}"))?;
    }
    let slope = oracle_slope(&pts);
    let lib = r.trend("cos_p", "variance_s2").and_then(|t| t.slope).unwrap_or(f64::NAN);
    ensure((lib - slope).abs() <= 1e-9, || format!("library slope {lib} vs {slope}"))?;
    ensure(slope.abs() < 0.1, || format!("slope {slope:.4}"))?;
    Ok(format!(
        "S₂ = {}; slope {slope:.4}",
        pts.iter().map(|p| format!("{:.3}", p.1)).collect::<Vec<_>>().join(", ")
    ))
}

fn scan_diags() -> Vec<Diagnostic> {
    vec![
        Diagnostic::IteratedLimit {
            t_grid: None,
            t_multiples: Some(vec![10.0, 100.0, 1000.0]),
            e_grid: None,
            e_fractions: Some(vec![0.5, 1.0]),
        },
        Diagnostic::SpectralMeasure,
    ]
}

// 7: iterated limits and the atom at zero
fn criterion_7() -> Check {
    let cat_sizes = vec![64usize, 128, 256, 512, 1024];
    let cat = sweep(
        ModelFamily::cat_map(cat_sizes.clone())
            .with_observable(ObservableSpec::symbol("cos_q"))
            .with_observable(ObservableSpec::symbol("cos_p")),
        scan_diags(),
        Vec::new(),
    )?;
    let shear_sizes = vec![256usize, 1024];
    let shear = sweep(
        ModelFamily::shear(shear_sizes.clone()).with_observable(ObservableSpec::symbol("cos_p")),
        scan_diags(),
        Vec::new(),
    )?;
    let obs_of = |r: &SweepReport, n: usize, o: &str| r.size(n).and_then(|s| s.observable(o)).cloned();
    let mut cat_gap_256 = 0.0f64;
    for o in ["cos_q", "cos_p"] {
        let mut prev = (f64::INFINITY, f64::INFINITY);
        for &n in &cat_sizes {
            let rep = obs_of(&cat, n, o).ok_or("missing cat report")?;
            let it = rep.iterated_limit.ok_or("no scan")?;
            let gaps = (it.e_then_t_gap(), it.t_then_e_gap());
            ensure(gaps.0 < prev.0 && gaps.1 < prev.1, || format!("cat {o}: gaps not decreasing at N = {n}: {gaps:?} after {prev:?}"))?;
            prev = gaps;
            if n == 256 {
                cat_gap_256 = cat_gap_256.max(gaps.1);
            }
            let sm = rep.spectral_measure.ok_or("no spectral measure")?;
            if n >= 512 {
                ensure(sm.excess <= 0.02, || format!("cat {o}, N = {n}: atom excess {:.4}", sm.excess))?;
            }
        }
    }
    let mut shear_gap_256 = f64::NAN;
    let mut min_excess = f64::INFINITY;
    for &n in &shear_sizes {
        let rep = obs_of(&shear, n, "cos_p").ok_or("missing shear report")?;
        let it = rep.iterated_limit.ok_or("no scan")?;
        if n == 256 {
            shear_gap_256 = it.t_then_e_gap();
        }
        let sm = rep.spectral_measure.ok_or("no spectral measure")?;
        min_excess = min_excess.min(sm.excess);
        ensure(sm.excess >= 0.05, || format!("shear N = {n}: atom excess {:.4}", sm.excess))?;
    }
    ensure(shear_gap_256 >= 10.0 * cat_gap_256, || {
        format!("shear gap {shear_gap_256:.3e} < 10 × cat gap {cat_gap_256:.3e}")
    })?;
    Ok(format!(
        "cat gaps decreasing; N = 256 T-then-E gap shear {shear_gap_256:.3e} vs cat {cat_gap_256:.3e}; shear atom excess ≥ {min_excess:.3}"
    ))
}

// 8: planted bad sets
fn criterion_8() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 20_000;
    let schedule = ExtractionSchedule {
        thresholds: vec![0.5, 0.3, 0.2],
        density_targets: None,
    };
    let mut out = Vec::new();
    for beta in [0.01, 0.05, 0.1] {
        for random in [false, true] {
            let period = (1.0 / beta as f64).round() as usize;
            let bad: Vec<bool> = (0..n)
                .map(|i| if random { rng.random_bool(beta) } else { i % period == period - 1 })
                .collect();
            let evals: Vec<C64> = bad
                .iter()
                .map(|&b| {
                    let dev = if b { rng.random_range(1.0..2.0) } else { rng.random_range(0.0..0.4) };
                    let ang: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                    C64::from_polar(dev, ang) + C64::new(0.3, 0.0)
                })
                .collect();
            let res = extract_density_one(&[evals.clone()], &[C64::new(0.3, 0.0)], &schedule).map_err(|e| e.to_string())?;
            // brute force: selected set is exactly the good set
            let good: Vec<usize> = (0..n).filter(|&i| !bad[i]).collect();
            ensure(res.selected == good, || format!("β = {beta}: selected set differs from the planted good set"))?;
            let density = res.selected.len() as f64 / n as f64;
            ensure((res.final_density - density).abs() < 1e-12, || format!("β = {beta}: reported density {}", res.final_density))?;
            ensure((res.final_density - (1.0 - beta)).abs() <= 0.02, || {
                format!("β = {beta}: density {:.4}", res.final_density)
            })?;
            let above = res
                .selected
                .iter()
                .filter(|&&i| (evals[i] - C64::new(0.3, 0.0)).norm_sqr() >= schedule.thresholds[2])
                .count();
            ensure(above == 0, || format!("β = {beta}: {above} selected deviations above threshold"))?;
            if random {
                out.push(format!("β {beta}: {:.4}", res.final_density));
            }
        }
    }
    Ok(format!("densities {}", out.join(", ")))
}

// 9: GUE surrogate
fn criterion_9() -> Check {
    let sizes = vec![128usize, 256, 512, 1024];
    let family = ModelFamily::gue(sizes.clone(), 7).with_observable(ObservableSpec::builtin("sign_split"));
    let r = sweep(family, vec![Diagnostic::variance()], Vec::new())?;
    let pts: Vec<(usize, f64)> = sizes.iter().map(|&n| (n, full_variance(&r, n, "sign_split"))).collect();
    let slope = oracle_slope(&pts);
    ensure(slope < -0.5, || format!("slope {slope:.4}"))?;
    // midpoint rule for (1/2π)∫_{-1}^{1} √(4 − x²) dx
    let steps = 200_000;
    let h = 2.0 / steps as f64;
    let quad: f64 = (0..steps)
        .map(|i| {
            let x = -1.0 + (i as f64 + 0.5) * h;
            (4.0 - x * x).sqrt() / (2.0 * std::f64::consts::PI) * h
        })
        .sum();
    ensure((semicircle_mass(-1.0, 1.0) - quad).abs() < 1e-8, || format!("semicircle mass vs quadrature {quad}"))?;
    let (vals, _) = linalg::hermitian_eigen(gue_hamiltonian(1024, 7).as_ref()).map_err(|e| e.to_string())?;
    let frac = eigenvalue_fraction(&vals, -1.0, 1.0);
    ensure((0.58..=0.64).contains(&frac), || format!("fraction in [−1, 1] = {frac:.4}"))?;
    Ok(format!("slope {slope:.3}; semicircle mass {quad:.4}, empirical {frac:.4} at d = 1024"))
}

struct Criterion {
    id: u32,
    title: &'static str,
    limit_s: Option<u64>,
    run: fn() -> Check,
}

const CRITERIA: &[Criterion] = &[
    Criterion { id: 1, title: "exact identities", limit_s: Some(60), run: criterion_1 },
    Criterion { id: 2, title: "Schwartz chain", limit_s: None, run: criterion_2 },
    Criterion { id: 3, title: "GNS triples", limit_s: Some(60), run: criterion_3 },
    Criterion { id: 4, title: "Weyl relations and Egorov", limit_s: Some(120), run: criterion_4 },
    Criterion { id: 5, title: "cat-map variance trend and extraction", limit_s: Some(1200), run: criterion_5 },
    Criterion { id: 6, title: "shear non-ergodicity control", limit_s: None, run: criterion_6 },
    Criterion { id: 7, title: "iterated limits and atom at zero", limit_s: None, run: criterion_7 },
    Criterion { id: 8, title: "extraction on planted bad sets", limit_s: Some(10), run: criterion_8 },
    Criterion { id: 9, title: "GUE surrogate", limit_s: None, run: criterion_9 },
];

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        return;
    }
    let wanted: Vec<u32> = args.iter().filter_map(|a| a.parse().ok()).collect();
    // the kernels are sequential everywhere, so timings match single-threaded runs
    faer::set_global_parallelism(faer::Par::Seq);
    let mut failed = 0;
    for c in CRITERIA.iter().filter(|c| wanted.is_empty() || wanted.contains(&c.id)) {
        let start = Instant::now();
        let res = (c.run)();
        let elapsed = start.elapsed();
        let res = res.and_then(|msg| match c.limit_s {
            Some(l) => within(elapsed, l).map(|_| msg),
            None => Ok(msg),
        });
        let (tag, msg) = match res {
            Ok(m) => ("PASS", m),
            Err(m) => {
                failed += 1;
                ("FAIL", m)
            }
        };
        println!("criterion {} {tag}: {}: {msg} ({:.1} s)", c.id, c.title, elapsed.as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
