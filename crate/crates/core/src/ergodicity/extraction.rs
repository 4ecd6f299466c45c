use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::C64;

/// Thresholds `ε_1 > ε_2 > …` on squared deviations, and density targets
/// for the nested sets `S'_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionSchedule {
    pub thresholds: Vec<f64>,
    /// Target density of `S'_j`; defaults to `1 − 2^{−j}`.
    #[serde(default)]
    pub density_targets: Option<Vec<f64>>,
}

impl ExtractionSchedule {
    /// The `1/k` ladder, `k = 1..=levels`.
    pub fn ladder(levels: usize) -> Self {
        Self {
            thresholds: (1..=levels).map(|k| 1.0 / k as f64).collect(),
            density_targets: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.thresholds.is_empty() {
            return Err(Error::InvalidArgument("empty threshold schedule".into()));
        }
        if self.thresholds.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::InvalidArgument("thresholds must be positive".into()));
        }
        if self.thresholds.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidArgument(
                "thresholds must be strictly decreasing".into(),
            ));
        }
        if let Some(t) = &self.density_targets {
            if t.iter().any(|x| !(0.0..=1.0).contains(x)) {
                return Err(Error::InvalidArgument("density targets must lie in [0, 1]".into()));
            }
        }
        Ok(())
    }

    fn target(&self, j: usize) -> f64 {
        match &self.density_targets {
            Some(t) if j < t.len() => t[j],
            Some(t) => *t.last().unwrap_or(&1.0),
            None => 1.0 - 0.5f64.powi(j as i32 + 1),
        }
    }
}

impl Default for ExtractionSchedule {
    fn default() -> Self {
        Self::ladder(256)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExtractionResult {
    /// Selected indices (0-based, strictly increasing).
    pub selected: Vec<usize>,
    /// `#(S ∩ [0, n]) / (n + 1)` for every `n`.
    pub density_profile: Vec<f64>,
    /// Per observable, `sup_{k ∈ S, k ≥ n} |ρ_k(A_j) − ω(A_j)|` for every `n`
    /// (0 when no selected index remains).
    pub sup_deviation_profile: Vec<Vec<f64>>,
    pub thresholds: Vec<f64>,
    /// Per observable, the breakpoints `ℓ_k` (`None` when the level's bad set
    /// never becomes sparse within the data).
    pub breakpoints: Vec<Vec<Option<usize>>>,
    /// `N_j` for the nested sets; `None` when the density target is missed.
    pub splice_points: Vec<Option<usize>>,
    /// Whether every density target was met.
    pub achieved: bool,
    pub final_density: f64,
}

/// Finite-scale diagonal extraction of a density-one subsequence.
///
/// `evaluations[j][n] = ρ_n(A_j)`, `targets[j] = ω(A_j)`. For each observable
/// the bad set `J_k = {n : |ρ_n − ω|² ≥ ε_k}` is removed on the stretch
/// `(ℓ_{k−1}, ℓ_k]`, where `ℓ_k` is the point past which `J_k` has density
/// `< ε_k`; the resulting sets
/// are intersected and spliced at the points where their density first stays
/// above the targets.
pub fn extract_density_one(
    evaluations: &[Vec<C64>],
    targets: &[C64],
    schedule: &ExtractionSchedule,
) -> Result<ExtractionResult> {
    schedule.validate()?;
    if evaluations.is_empty() || evaluations.len() != targets.len() {
        return Err(Error::InvalidArgument(format!(
            "{} observables but {} targets",
            evaluations.len(),
            targets.len()
        )));
    }
    let n = evaluations[0].len();
    if evaluations.iter().any(|row| row.len() != n) {
        return Err(Error::InvalidArgument("ragged evaluation matrix".into()));
    }
    if evaluations.iter().flatten().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::InvalidArgument("non-finite evaluation".into()));
    }
    let eps = &schedule.thresholds;
    let devs: Vec<Vec<f64>> = evaluations
        .iter()
        .zip(targets)
        .map(|(row, &w)| row.iter().map(|z| (z - w).norm_sqr()).collect())
        .collect();

    let mut breakpoints = Vec::with_capacity(devs.len());
    let mut nested = vec![true; n];
    let mut nested_sets: Vec<Vec<bool>> = Vec::with_capacity(devs.len());
    for dev in &devs {
        let ell = level_breakpoints(dev, eps);
        // level of index i (1-based position i+1): first k with i+1 <= ℓ_k
        let mut keep = vec![true; n];
        let mut k = 0;
        for i in 0..n {
            while k + 1 < eps.len() && ell[k].is_some_and(|l| i + 1 > l) {
                k += 1;
            }
            if dev[i] >= eps[k] {
                keep[i] = false;
            }
        }
        for i in 0..n {
            nested[i] &= keep[i];
        }
        nested_sets.push(nested.clone());
        breakpoints.push(ell);
    }

    // N_j: smallest N with density of S'_j >= target for all N' >= N.
    let mut splice_points: Vec<Option<usize>> = Vec::with_capacity(nested_sets.len());
    let mut prev = 0usize;
    for (j, set) in nested_sets.iter().enumerate() {
        let target = schedule.target(j);
        let p = stays_above(set, target).map(|p| p.max(prev));
        if let Some(p) = p {
            prev = p;
        }
        splice_points.push(p);
        if p.is_none() {
            break;
        }
    }
    let achieved =
        splice_points.len() == nested_sets.len() && splice_points.iter().all(|p| p.is_some());

    // S_∞ ∩ [N_j, N_{j+1}) = S'_j ∩ [N_j, N_{j+1}); S'_1 before N_1.
    let mut selected = Vec::new();
    let mut level = 0usize;
    for i in 0..n {
        while level + 1 < nested_sets.len()
            && splice_points
                .get(level + 1)
                .copied()
                .flatten()
                .is_some_and(|p| i + 1 >= p)
        {
            level += 1;
        }
        if nested_sets[level][i] {
            selected.push(i);
        }
    }

    let mut density_profile = Vec::with_capacity(n);
    let mut is_sel = vec![false; n];
    for &i in &selected {
        is_sel[i] = true;
    }
    let mut count = 0usize;
    for (i, &s) in is_sel.iter().enumerate() {
        count += s as usize;
        density_profile.push(count as f64 / (i + 1) as f64);
    }
    let sup_deviation_profile = devs
        .iter()
        .map(|dev| {
            let mut out = vec![0.0; n];
            let mut run = 0.0f64;
            for i in (0..n).rev() {
                if is_sel[i] {
                    run = run.max(dev[i].sqrt());
                }
                out[i] = run;
            }
            out
        })
        .collect();
    let final_density = density_profile.last().copied().unwrap_or(1.0);
    Ok(ExtractionResult {
        selected,
        density_profile,
        sup_deviation_profile,
        thresholds: eps.clone(),
        breakpoints,
        splice_points,
        achieved,
        final_density,
    })
}

/// `ℓ_k`: smallest `L ≥ 1` such that `#(J_k ∩ [1, L']) / L' < ε_k` for every
/// `L' ≥ L` in the data, made nondecreasing in `k`; once a level fails, all
/// finer levels fail too.
fn level_breakpoints(dev: &[f64], eps: &[f64]) -> Vec<Option<usize>> {
    let n = dev.len();
    let mut out = Vec::with_capacity(eps.len());
    let mut prev = 1usize;
    let mut failed = false;
    for &e in eps {
        if failed || n == 0 {
            out.push(if n == 0 { Some(1) } else { None });
            continue;
        }
        let mut cum = Vec::with_capacity(n);
        let mut c = 0usize;
        for &d in dev {
            c += (d >= e) as usize;
            cum.push(c);
        }
        let mut l = None;
        for big_l in (1..=n).rev() {
            if (cum[big_l - 1] as f64) / (big_l as f64) < e {
                l = Some(big_l);
            } else {
                break;
            }
        }
        match l {
            Some(l) => {
                prev = prev.max(l);
                out.push(Some(prev));
            }
            None => {
                failed = true;
                out.push(None);
            }
        }
    }
    out
}

/// Smallest `N ≥ 1` with `#(set ∩ [1, N']) / N' ≥ target` for all `N' ≥ N`.
fn stays_above(set: &[bool], target: f64) -> Option<usize> {
    let n = set.len();
    if n == 0 {
        return Some(1);
    }
    let mut cum = Vec::with_capacity(n);
    let mut c = 0usize;
    for &s in set {
        c += s as usize;
        cum.push(c);
    }
    let mut best = None;
    for big_n in (1..=n).rev() {
        if (cum[big_n - 1] as f64) / (big_n as f64) >= target {
            best = Some(big_n);
        } else {
            break;
        }
    }
    best
}
