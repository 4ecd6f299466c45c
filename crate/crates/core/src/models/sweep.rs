use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ModelFamily, PropagatorCheck};
use crate::algebra::{spectrum_summary, IsotypicDecomposition, SpectrumSummary, Tolerances};
use crate::ergodicity::{
    empirical_spectral_measure, extract_density_one, iterated_limit_scan, qe_defect, schwartz_chain,
    variance_s2_with, ExtractionSchedule, IteratedLimitTable, StateBasis, VarianceRow,
};
use crate::error::{Error, Result};
use crate::gns::{gns_construct, FiniteStarAlgebra, GnsSummary};
use crate::linalg::{self, C64};
use crate::states::{ensemble_rows, localized_ensemble, microcanonical, state_values, EnsembleKind, EnsembleRow, Ray};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GnsAlgebraKind {
    FullMatrix,
    Diagonal,
    Scalars,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GnsStateKind {
    /// `Tr(·)/d`.
    Trace,
    /// `ω_E` at `E = e_fraction · E_max`.
    Ensemble { e_fraction: f64 },
}

/// Largest dimension accepted for the GNS construction on `M_d`
/// (`d⁶` storage for the represented basis).
pub const GNS_FULL_MATRIX_MAX_DIM: usize = 12;

/// GNS invariants are reported against this bound.
pub const GNS_RESIDUAL_TOL: f64 = 1e-10;

/// Diagnostics run on every member of a sweep.
///
/// Energy cutoffs come from `e_grid` (absolute) or `e_fractions` (of the
/// top level); the default is the top level alone. Times come from `t_grid`
/// or `t_multiples` (of the dimension).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Diagnostic {
    /// `S₂` and the defect at every cutoff.
    Variance {
        #[serde(default)]
        e_grid: Option<Vec<f64>>,
        #[serde(default)]
        e_fractions: Option<Vec<f64>>,
        #[serde(default)]
        ensemble: EnsembleKind,
        #[serde(default)]
        basis: StateBasis,
    },
    /// Density-one extraction over the states in energy order. With
    /// `root_variance_multiple = c` the single threshold is `c² · S₂(E_max)`
    /// on squared deviations.
    Extraction {
        #[serde(default)]
        schedule: Option<ExtractionSchedule>,
        #[serde(default)]
        root_variance_multiple: Option<f64>,
    },
    IteratedLimit {
        #[serde(default)]
        t_grid: Option<Vec<f64>>,
        #[serde(default)]
        t_multiples: Option<Vec<f64>>,
        #[serde(default)]
        e_grid: Option<Vec<f64>>,
        #[serde(default)]
        e_fractions: Option<Vec<f64>>,
    },
    SpectralMeasure,
    Spectrum,
    /// `ω_E(A)` rows, and `ω_E^L(A)` when a ray is given.
    Ensembles {
        #[serde(default)]
        e_grid: Option<Vec<f64>>,
        #[serde(default)]
        e_fractions: Option<Vec<f64>>,
        #[serde(default)]
        ensemble: EnsembleKind,
        #[serde(default)]
        ray: Option<Ray>,
    },
    /// Both sides of the Schwartz chain on a `(T, E)` grid.
    Schwartz {
        #[serde(default)]
        t_grid: Option<Vec<f64>>,
        #[serde(default)]
        t_multiples: Option<Vec<f64>>,
        #[serde(default)]
        e_grid: Option<Vec<f64>>,
        #[serde(default)]
        e_fractions: Option<Vec<f64>>,
    },
    Gns {
        algebra: GnsAlgebraKind,
        state: GnsStateKind,
    },
}

fn check_increasing(name: &str, g: &Option<Vec<f64>>, upper: Option<f64>) -> Result<()> {
    if let Some(g) = g {
        if g.is_empty() {
            return Err(Error::Config(format!("{name} must not be empty")));
        }
        if g.iter().any(|x| !(x.is_finite() && *x > 0.0) || upper.is_some_and(|u| *x > u)) {
            let range = match upper {
                Some(u) => format!("(0, {u}]"),
                None => "(0, ∞)".into(),
            };
            return Err(Error::Config(format!("{name} entries must lie in {range}")));
        }
        if g.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config(format!("{name} must be strictly increasing")));
        }
    }
    Ok(())
}

fn check_energy(e_grid: &Option<Vec<f64>>, e_fractions: &Option<Vec<f64>>) -> Result<()> {
    if e_grid.is_some() && e_fractions.is_some() {
        return Err(Error::Config("give either e_grid or e_fractions".into()));
    }
    if let Some(g) = e_grid {
        if g.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::Config("e_grid entries must be finite and nonnegative".into()));
        }
        if g.is_empty() || g.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("e_grid must be nonempty and strictly increasing".into()));
        }
    }
    check_increasing("e_fractions", e_fractions, Some(1.0))
}

fn check_time(t_grid: &Option<Vec<f64>>, t_multiples: &Option<Vec<f64>>) -> Result<()> {
    if t_grid.is_some() == t_multiples.is_some() {
        return Err(Error::Config("give exactly one of t_grid, t_multiples".into()));
    }
    check_increasing("t_grid", t_grid, None)?;
    check_increasing("t_multiples", t_multiples, None)
}

impl Diagnostic {
    pub fn variance() -> Self {
        Diagnostic::Variance {
            e_grid: None,
            e_fractions: None,
            ensemble: EnsembleKind::OmegaE,
            basis: StateBasis::Fixed,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Diagnostic::Variance { .. } => "variance",
            Diagnostic::Extraction { .. } => "extraction",
            Diagnostic::IteratedLimit { .. } => "iterated_limit",
            Diagnostic::SpectralMeasure => "spectral_measure",
            Diagnostic::Spectrum => "spectrum",
            Diagnostic::Ensembles { .. } => "ensembles",
            Diagnostic::Schwartz { .. } => "schwartz",
            Diagnostic::Gns { .. } => "gns",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Diagnostic::Variance {
                e_grid, e_fractions, ..
            } => check_energy(e_grid, e_fractions),
            Diagnostic::Ensembles {
                e_grid,
                e_fractions,
                ensemble,
                ..
            } => {
                if *ensemble == EnsembleKind::Localized {
                    return Err(Error::Config(
                        "ensembles: use ray for localized ensembles, ensemble must be omega_e or omega_tilde_e".into(),
                    ));
                }
                check_energy(e_grid, e_fractions)
            }
            Diagnostic::Extraction {
                schedule,
                root_variance_multiple,
            } => {
                if schedule.is_some() && root_variance_multiple.is_some() {
                    return Err(Error::Config(
                        "extraction takes either schedule or root_variance_multiple".into(),
                    ));
                }
                if let Some(c) = root_variance_multiple {
                    if !(c.is_finite() && *c > 0.0) {
                        return Err(Error::Config("root_variance_multiple must be positive".into()));
                    }
                }
                if let Some(s) = schedule {
                    if s.thresholds.is_empty()
                        || s.thresholds.iter().any(|t| !(t.is_finite() && *t > 0.0))
                        || s.thresholds.windows(2).any(|w| w[1] >= w[0])
                    {
                        return Err(Error::Config(
                            "extraction thresholds must be positive and strictly decreasing".into(),
                        ));
                    }
                }
                Ok(())
            }
            Diagnostic::IteratedLimit {
                t_grid,
                t_multiples,
                e_grid,
                e_fractions,
            }
            | Diagnostic::Schwartz {
                t_grid,
                t_multiples,
                e_grid,
                e_fractions,
            } => {
                check_time(t_grid, t_multiples)?;
                check_energy(e_grid, e_fractions)
            }
            Diagnostic::Gns { state, .. } => match state {
                GnsStateKind::Ensemble { e_fraction } if !(*e_fraction > 0.0 && *e_fraction <= 1.0) => {
                    Err(Error::Config("gns state e_fraction must lie in (0, 1]".into()))
                }
                _ => Ok(()),
            },
            Diagnostic::SpectralMeasure | Diagnostic::Spectrum => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExtractionSummary {
    pub thresholds: Vec<f64>,
    pub root_variance: f64,
    pub selected: usize,
    pub total: usize,
    pub final_density: f64,
    pub achieved: bool,
    /// `max_{n ∈ S} |ρ_n(A) − ω(A)|`.
    pub sup_deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralSummary {
    pub atoms: usize,
    pub total_mass: f64,
    pub mass_at_zero: f64,
    /// `|ω(A)|²`.
    pub target: f64,
    /// `mass_at_zero − |ω(A)|²`.
    pub excess: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SchwartzRow {
    pub e: f64,
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SchwartzSummary {
    pub rows: Vec<SchwartzRow>,
    /// `max(lhs − rhs)` over the grid.
    pub max_excess: f64,
    pub violations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnsembleSummary {
    pub rows: Vec<EnsembleRow>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub localized: Vec<EnsembleRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ObservableReport {
    pub name: String,
    pub omega: [f64; 2],
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub variance: Vec<VarianceRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extraction: Option<ExtractionSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterated_limit: Option<IteratedLimitTable>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectral_measure: Option<SpectralSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ensembles: Option<EnsembleSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schwartz: Option<SchwartzSummary>,
}

impl ObservableReport {
    /// `S₂` at the largest cutoff of the variance rows.
    pub fn full_variance(&self) -> Option<f64> {
        self.variance.last().map(|r| r.s2)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VacuumRow {
    pub observable: String,
    /// `⟨ψ_A, E_ω ψ_A⟩`; absent when `A` is not in the algebra.
    pub lhs: Option<f64>,
    /// `|ω(A)|²`.
    pub rhs: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GnsReport {
    pub algebra: GnsAlgebraKind,
    pub state: GnsStateKind,
    pub summary: GnsSummary,
    pub within_tolerance: bool,
    pub vacuum_identity: Vec<VacuumRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SizeReport {
    pub size: usize,
    pub tolerances: Tolerances,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub blocks: usize,
    pub states: usize,
    pub max_multiplicity: usize,
    pub invariance_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub propagator: Option<PropagatorCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gns: Option<GnsReport>,
    pub observables: Vec<ObservableReport>,
}

impl SizeReport {
    pub fn observable(&self, name: &str) -> Option<&ObservableReport> {
        self.observables.iter().find(|o| o.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendVerdict {
    Decaying,
    Flat,
    Growing,
    /// Every value is at rounding level; no fit is attempted.
    Vanishing,
    InsufficientData,
}

/// Least-squares fit `log y = slope · log N + intercept`.
#[derive(Debug, Clone, Serialize)]
pub struct TrendFit {
    pub observable: String,
    pub quantity: String,
    pub points: usize,
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub verdict: TrendVerdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct WindowMedian {
    pub observable: String,
    pub quantity: String,
    pub lo: usize,
    pub hi: usize,
    pub count: usize,
    pub median: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub family: String,
    pub sizes: Vec<usize>,
    pub modeling_note: String,
    pub tolerances: Tolerances,
    pub per_size: Vec<SizeReport>,
    pub trends: Vec<TrendFit>,
    pub windows: Vec<WindowMedian>,
}

impl SweepReport {
    pub fn size(&self, n: usize) -> Option<&SizeReport> {
        self.per_size.iter().find(|r| r.size == n)
    }

    pub fn trend(&self, observable: &str, quantity: &str) -> Option<&TrendFit> {
        self.trends
            .iter()
            .find(|t| t.observable == observable && t.quantity == quantity)
    }

    pub fn window(&self, observable: &str, quantity: &str, lo: usize, hi: usize) -> Option<&WindowMedian> {
        self.windows
            .iter()
            .find(|w| w.observable == observable && w.quantity == quantity && w.lo == lo && w.hi == hi)
    }

    pub fn failures(&self) -> Vec<(usize, &str)> {
        self.per_size
            .iter()
            .filter_map(|r| r.error.as_deref().map(|e| (r.size, e)))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    /// Worker threads; 0 uses the global rayon pool.
    pub jobs: usize,
    pub tolerances: Tolerances,
    /// Inclusive size windows for medians.
    pub windows: Vec<(usize, usize)>,
    /// Slopes with `|slope| ≤ flat_slope` are reported flat.
    pub flat_slope: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            jobs: 0,
            tolerances: Tolerances::default(),
            windows: Vec::new(),
            flat_slope: 0.1,
        }
    }
}

pub const MODELING_NOTE: &str =
    "each size N is a separate system; the index N stands in for the energy E, and decay rates are fitted across N";

/// Instantiates every size (in parallel), runs the diagnostics, and fits
/// trends. Failures are recorded per size; the sweep continues.
pub fn family_sweep(family: &ModelFamily, diagnostics: &[Diagnostic], opts: &SweepOptions) -> Result<SweepReport> {
    family.validate()?;
    for d in diagnostics {
        d.validate()?;
    }
    for &(lo, hi) in &opts.windows {
        if lo > hi {
            return Err(Error::Config(format!("window [{lo}, {hi}] is empty")));
        }
    }
    let sizes = family.effective_sizes();
    let run = || -> Vec<SizeReport> {
        sizes
            .par_iter()
            .map(|&n| run_size(family, n, diagnostics, opts.tolerances))
            .collect()
    };
    let per_size = if opts.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(opts.jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(run)
    } else {
        run()
    };

    let mut trends = Vec::new();
    let mut windows = Vec::new();
    for spec in &family.observables {
        for quantity in ["variance_s2", "qe_defect"] {
            let pts: Vec<(usize, f64)> = per_size
                .iter()
                .filter(|r| r.error.is_none())
                .filter_map(|r| {
                    let row = r.observable(&spec.name)?.variance.last()?;
                    Some((r.size, if quantity == "variance_s2" { row.s2 } else { row.qe_defect }))
                })
                .collect();
            if pts.is_empty() {
                continue;
            }
            trends.push(fit_trend(&spec.name, quantity, &pts, opts.flat_slope));
            for &(lo, hi) in &opts.windows {
                let mut v: Vec<f64> = pts
                    .iter()
                    .filter(|(n, _)| lo <= *n && *n <= hi)
                    .map(|p| p.1)
                    .collect();
                windows.push(WindowMedian {
                    observable: spec.name.clone(),
                    quantity: quantity.into(),
                    lo,
                    hi,
                    count: v.len(),
                    median: median(&mut v),
                });
            }
        }
    }
    Ok(SweepReport {
        family: family.kind.name().into(),
        sizes,
        modeling_note: MODELING_NOTE.into(),
        tolerances: opts.tolerances,
        per_size,
        trends,
        windows,
    })
}

pub fn median(v: &mut [f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Ordinary least squares on `(log N, log y)`; nonpositive `y` are skipped.
pub fn loglog_slope(points: &[(usize, f64)]) -> Option<(f64, f64)> {
    let xy: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.1 > 0.0 && p.0 > 0)
        .map(|&(n, y)| ((n as f64).ln(), y.ln()))
        .collect();
    if xy.len() < 2 {
        return None;
    }
    let k = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / k;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Variances of O(1) observables below this are rounding noise.
pub const VANISHING_FLOOR: f64 = 1e-20;

fn fit_trend(name: &str, quantity: &str, pts: &[(usize, f64)], flat: f64) -> TrendFit {
    let vanishing = !pts.is_empty() && pts.iter().all(|p| p.1.abs() <= VANISHING_FLOOR);
    let fit = if vanishing { None } else { loglog_slope(pts) };
    let verdict = match fit {
        None if vanishing => TrendVerdict::Vanishing,
        None => TrendVerdict::InsufficientData,
        Some((s, _)) if s < -flat => TrendVerdict::Decaying,
        Some((s, _)) if s > flat => TrendVerdict::Growing,
        Some(_) => TrendVerdict::Flat,
    };
    TrendFit {
        observable: name.into(),
        quantity: quantity.into(),
        points: pts.len(),
        slope: fit.map(|f| f.0),
        intercept: fit.map(|f| f.1),
        verdict,
    }
}

pub(crate) fn run_size(family: &ModelFamily, n: usize, diagnostics: &[Diagnostic], tol: Tolerances) -> SizeReport {
    let mut report = SizeReport {
        size: n,
        tolerances: tol,
        error: None,
        blocks: 0,
        states: 0,
        max_multiplicity: 0,
        invariance_residual: 0.0,
        propagator: None,
        spectrum: None,
        gns: None,
        observables: Vec::new(),
    };
    if let Err(e) = fill_size(family, n, diagnostics, tol, &mut report) {
        report.error = Some(e.to_string());
    }
    report
}

fn top_level(decomp: &IsotypicDecomposition) -> f64 {
    decomp.energy_levels().last().copied().unwrap_or(0.0)
}

fn cutoffs(decomp: &IsotypicDecomposition, grid: &Option<Vec<f64>>, fractions: &Option<Vec<f64>>) -> Vec<f64> {
    let emax = top_level(decomp);
    match (grid, fractions) {
        (Some(g), _) => g.clone(),
        (None, Some(f)) => f
            .iter()
            .map(|&x| if x == 1.0 { emax } else { x * emax })
            .collect(),
        (None, None) => vec![emax],
    }
}

fn times(dim: usize, grid: &Option<Vec<f64>>, multiples: &Option<Vec<f64>>) -> Vec<f64> {
    match (grid, multiples) {
        (Some(t), _) => t.clone(),
        (None, Some(m)) => m.iter().map(|x| x * dim as f64).collect(),
        (None, None) => Vec::new(),
    }
}

fn fill_size(
    family: &ModelFamily,
    n: usize,
    diagnostics: &[Diagnostic],
    tol: Tolerances,
    report: &mut SizeReport,
) -> Result<()> {
    let inst = family.instantiate(n, tol)?;
    report.propagator = inst.propagator;
    let decomp = inst.system.decompose()?;
    report.blocks = decomp.blocks().len();
    report.states = decomp.state_count();
    report.max_multiplicity = decomp.blocks().iter().map(|b| b.multiplicity).max().unwrap_or(0);
    report.invariance_residual = decomp.invariance_residual();
    let emax = top_level(&decomp);
    let dim = inst.system.dim();

    for obs in inst.system.observables() {
        // without a declared average, use the normalized trace (ω_E at the top cutoff)
        let omega = inst
            .system
            .classical_average(&obs.name)
            .unwrap_or_else(|| linalg::trace(obs.matrix.as_ref()) / dim as f64);
        let a = obs.matrix.as_ref();
        let mut or = ObservableReport {
            name: obs.name.clone(),
            omega: [omega.re, omega.im],
            variance: Vec::new(),
            extraction: None,
            iterated_limit: None,
            spectral_measure: None,
            ensembles: None,
            schwartz: None,
        };
        for d in diagnostics {
            match d {
                Diagnostic::Variance {
                    e_grid,
                    e_fractions,
                    ensemble,
                    basis,
                } => {
                    for e in cutoffs(&decomp, e_grid, e_fractions) {
                        or.variance.push(VarianceRow {
                            e,
                            s2: variance_s2_with(&decomp, e, a, omega, *ensemble, *basis)?,
                            qe_defect: qe_defect(&decomp, e, a, omega)?,
                            n_e: match ensemble {
                                EnsembleKind::OmegaTildeE => decomp.count_star(e),
                                _ => decomp.count(e),
                            },
                        });
                    }
                }
                Diagnostic::Extraction {
                    schedule,
                    root_variance_multiple,
                } => {
                    let values = state_values(&decomp, a);
                    let v = variance_s2_with(&decomp, emax, a, omega, EnsembleKind::OmegaE, StateBasis::Fixed)?;
                    let sched = match (schedule, root_variance_multiple) {
                        (Some(s), _) => s.clone(),
                        (None, Some(c)) => ExtractionSchedule {
                            thresholds: vec![(c * c * v).max(f64::MIN_POSITIVE)],
                            density_targets: None,
                        },
                        (None, None) => ExtractionSchedule::default(),
                    };
                    let res = extract_density_one(std::slice::from_ref(&values), &[omega], &sched)?;
                    let sup = res
                        .selected
                        .iter()
                        .map(|&i| (values[i] - omega).norm())
                        .fold(0.0, f64::max);
                    or.extraction = Some(ExtractionSummary {
                        thresholds: sched.thresholds.clone(),
                        root_variance: v.sqrt(),
                        selected: res.selected.len(),
                        total: values.len(),
                        final_density: res.final_density,
                        achieved: res.achieved,
                        sup_deviation: sup,
                    });
                }
                Diagnostic::IteratedLimit {
                    t_grid,
                    t_multiples,
                    e_grid,
                    e_fractions,
                } => {
                    let ts = times(dim, t_grid, t_multiples);
                    let es = cutoffs(&decomp, e_grid, e_fractions);
                    or.iterated_limit = Some(iterated_limit_scan(&decomp, a, omega, &ts, &es)?);
                }
                Diagnostic::SpectralMeasure => {
                    let m = empirical_spectral_measure(&decomp, emax, a)?;
                    let target = omega.norm_sqr();
                    let at0 = m.mass_at_zero();
                    or.spectral_measure = Some(SpectralSummary {
                        atoms: m.atoms.len(),
                        total_mass: m.total_mass,
                        mass_at_zero: at0,
                        target,
                        excess: at0 - target,
                    });
                }
                Diagnostic::Ensembles {
                    e_grid,
                    e_fractions,
                    ensemble,
                    ray,
                } => {
                    let es = cutoffs(&decomp, e_grid, e_fractions);
                    let rows = ensemble_rows(&decomp, &obs.name, a, &es, *ensemble)?;
                    let mut localized = Vec::new();
                    if let Some(ray) = ray {
                        for &e in &es {
                            // below the first ray block the ensemble is empty; skip
                            let ens = match localized_ensemble(&decomp, |s| ray.contains(s), e) {
                                Ok(ens) => ens,
                                Err(Error::EmptyRay { .. }) => continue,
                                Err(err) => return Err(err),
                            };
                            let v = ens.evaluate(&decomp, a);
                            localized.push(EnsembleRow {
                                e,
                                kind: EnsembleKind::Localized,
                                observable: obs.name.clone(),
                                value_re: v.re,
                                value_im: v.im,
                                n_e: ens.normalization,
                            });
                        }
                    }
                    or.ensembles = Some(EnsembleSummary { rows, localized });
                }
                Diagnostic::Schwartz {
                    t_grid,
                    t_multiples,
                    e_grid,
                    e_fractions,
                } => {
                    let mut rows = Vec::new();
                    for t in times(dim, t_grid, t_multiples) {
                        for e in cutoffs(&decomp, e_grid, e_fractions) {
                            let (lhs, rhs) = schwartz_chain(&decomp, a, omega, t, e)?;
                            rows.push(SchwartzRow { e, t, lhs, rhs });
                        }
                    }
                    let max_excess = rows.iter().map(|r| r.lhs - r.rhs).fold(f64::NEG_INFINITY, f64::max);
                    let violations = rows
                        .iter()
                        .filter(|r| r.lhs > r.rhs + 1e-12 * r.rhs.abs().max(1.0))
                        .count();
                    or.schwartz = Some(SchwartzSummary {
                        rows,
                        max_excess,
                        violations,
                    });
                }
                Diagnostic::Spectrum | Diagnostic::Gns { .. } => {}
            }
        }
        report.observables.push(or);
    }
    for d in diagnostics {
        match d {
            Diagnostic::Spectrum => report.spectrum = Some(spectrum_summary(&decomp)),
            Diagnostic::Gns { algebra, state } => {
                report.gns = Some(run_gns(&inst.system, &decomp, *algebra, state, tol)?);
            }
            _ => {}
        }
    }
    Ok(())
}

fn run_gns(
    system: &crate::algebra::CovariantSystem,
    decomp: &IsotypicDecomposition,
    algebra: GnsAlgebraKind,
    state: &GnsStateKind,
    tol: Tolerances,
) -> Result<GnsReport> {
    let d = system.dim();
    let action = system.action().clone();
    let alg = match algebra {
        GnsAlgebraKind::FullMatrix => {
            if d > GNS_FULL_MATRIX_MAX_DIM {
                return Err(Error::InvalidArgument(format!(
                    "gns on the full matrix algebra is limited to d ≤ {GNS_FULL_MATRIX_MAX_DIM} (got {d})"
                )));
            }
            FiniteStarAlgebra::full_matrix(action)
        }
        GnsAlgebraKind::Diagonal => FiniteStarAlgebra::diagonal(action)?,
        GnsAlgebraKind::Scalars => FiniteStarAlgebra::scalars(action),
    };
    let rho = match state {
        GnsStateKind::Trace => linalg::scale(linalg::identity(d).as_ref(), C64::new(1.0 / d as f64, 0.0)),
        GnsStateKind::Ensemble { e_fraction } => {
            let e = if *e_fraction == 1.0 {
                top_level(decomp)
            } else {
                e_fraction * top_level(decomp)
            };
            microcanonical(decomp, e, EnsembleKind::OmegaE)?.density(decomp)
        }
    };
    let triple = gns_construct(&alg, rho.as_ref(), tol.null)?;
    let summary = triple.summary();
    let within_tolerance = summary.residuals.max_residual() <= GNS_RESIDUAL_TOL && summary.residuals.cyclicity_defect == 0;
    let vacuum_identity = system
        .observables()
        .iter()
        .map(|o| match triple.vacuum_average_identity(o.matrix.as_ref()) {
            Ok((l, r)) => VacuumRow {
                observable: o.name.clone(),
                lhs: Some(l),
                rhs: Some(r),
            },
            Err(_) => VacuumRow {
                observable: o.name.clone(),
                lhs: None,
                rhs: None,
            },
        })
        .collect();
    Ok(GnsReport {
        algebra,
        state: state.clone(),
        summary,
        within_tolerance,
        vacuum_identity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::ComplexMatrixJson;
    use crate::models::ObservableSpec;

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(usize, f64)> = [8usize, 16, 32, 64].iter().map(|&n| (n, 3.0 / n as f64)).collect();
        let (s, c) = loglog_slope(&pts).unwrap();
        assert!((s + 1.0).abs() < 1e-12);
        assert!((c - 3f64.ln()).abs() < 1e-12);
        assert!(loglog_slope(&pts[..1]).is_none());
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&mut []), None);
    }

    #[test]
    fn single_size_has_no_fit() {
        let f = ModelFamily::shear(vec![16]).with_observable(ObservableSpec::symbol("cos_p"));
        let r = family_sweep(&f, &[Diagnostic::variance()], &SweepOptions::default()).unwrap();
        let t = r.trend("cos_p", "variance_s2").unwrap();
        assert_eq!(t.verdict, TrendVerdict::InsufficientData);
        assert!(r.failures().is_empty());
    }

    #[test]
    fn constant_symbol_has_zero_defect() {
        let f = ModelFamily::shear(vec![8, 12]).with_observable(ObservableSpec::symbol("one"));
        let r = family_sweep(&f, &[Diagnostic::variance()], &SweepOptions::default()).unwrap();
        for s in &r.per_size {
            let row = &s.observable("one").unwrap().variance[0];
            assert!(row.s2 < 1e-24 && row.qe_defect < 1e-24);
        }
        assert_eq!(r.trend("one", "variance_s2").unwrap().verdict, TrendVerdict::Vanishing);
    }

    #[test]
    fn per_size_failure_is_isolated() {
        let mut f = ModelFamily::gue(vec![3, 4], 1);
        f.observables.push(ObservableSpec {
            name: "m".into(),
            matrix: Some(ComplexMatrixJson::from_matrix(&linalg::identity(3))),
            ..Default::default()
        });
        // validation would reject a matrix observable on two sizes; run the
        // members directly
        let reports: Vec<SizeReport> = [3usize, 4]
            .iter()
            .map(|&n| run_size(&f, n, &[Diagnostic::variance()], Tolerances::default()))
            .collect();
        assert!(reports[0].error.is_none());
        assert!(reports[1].error.is_some());
    }

    #[test]
    fn gns_on_small_cat_map() {
        let f = ModelFamily::cat_map(vec![5]).with_observable(ObservableSpec::symbol("cos_q"));
        let d = Diagnostic::Gns {
            algebra: GnsAlgebraKind::FullMatrix,
            state: GnsStateKind::Trace,
        };
        let r = family_sweep(&f, &[d], &SweepOptions::default()).unwrap();
        let g = r.per_size[0].gns.as_ref().unwrap();
        assert!(g.within_tolerance);
        // trace state: E_ω projects onto the commutant, of dimension Σ m²
        assert_eq!(g.summary.vacuum_rank, r.per_size[0].blocks);
    }

    #[test]
    fn decreasing_grid_rejected() {
        let d = Diagnostic::Variance {
            e_grid: Some(vec![2.0, 1.0]),
            e_fractions: None,
            ensemble: EnsembleKind::OmegaE,
            basis: StateBasis::Fixed,
        };
        assert!(d.validate().is_err());
    }
}
