//! Fixture systems: quantized torus maps, GUE surrogates, user systems, and
//! sweeps over a family of sizes.
//!
//! In a sweep the size `N` plays the role of the energy: each member is a
//! separate system, and trends are read across `N`.

mod gue;
mod propagator;
mod sweep;
mod weyl;

pub use gue::{eigenvalue_fraction, gue_hamiltonian, gue_matrix, gue_system, gue_system_with, semicircle_mass, sign_split};
pub use propagator::{
    cat_propagator, egorov_residual, shear_propagator, torus_propagator, MapMatrix, PropagatorCheck, CAT_MAP,
    EGOROV_TOL, SHEAR,
};
pub use sweep::{
    family_sweep, loglog_slope, median, Diagnostic, EnsembleSummary, ExtractionSummary, GnsAlgebraKind,
    GnsReport, GnsStateKind, ObservableReport, SchwartzSummary, SizeReport, SpectralSummary, SweepOptions,
    SweepReport, TrendFit, TrendVerdict, WindowMedian, MODELING_NOTE, VANISHING_FLOOR,
};
pub use weyl::{quantize_symbol, weyl_monomial, weyl_operator, Monomial, TorusSymbol};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::algebra::{ComplexMatrixJson, CovariantSystem, GroupAction, Observable, SystemJson, Tolerances};
use crate::error::{Error, Result};
use crate::linalg::{self, C64};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilyKind {
    CatMap {
        #[serde(default = "default_cat")]
        matrix: MapMatrix,
    },
    Shear {
        #[serde(default = "default_shear")]
        matrix: MapMatrix,
    },
    Gue,
    SingleSystem {
        system: SystemJson,
    },
}

fn default_cat() -> MapMatrix {
    CAT_MAP
}

fn default_shear() -> MapMatrix {
    SHEAR
}

impl FamilyKind {
    pub fn name(&self) -> &'static str {
        match self {
            FamilyKind::CatMap { .. } => "cat_map",
            FamilyKind::Shear { .. } => "shear",
            FamilyKind::Gue => "gue",
            FamilyKind::SingleSystem { .. } => "single_system",
        }
    }
}

/// One observable of a family. Exactly one of `fourier`, `symbol`,
/// `matrix`, `builtin` is given; a bare `name` that matches a catalog
/// symbol or builtin is accepted as shorthand.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fourier: Option<Vec<[f64; 4]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symbol: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<ComplexMatrixJson>,
    /// Only with `matrix`; defaults to the normalized trace.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classical_average: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
}

pub const BUILTINS: &[&str] = &["sign_split"];

enum Source {
    Symbol(TorusSymbol),
    Matrix(ComplexMatrixJson, Option<[f64; 2]>),
    Builtin(String),
}

impl ObservableSpec {
    pub fn symbol(name: &str) -> Self {
        Self {
            name: name.into(),
            symbol: Some(name.into()),
            ..Default::default()
        }
    }

    pub fn builtin(name: &str) -> Self {
        Self {
            name: name.into(),
            builtin: Some(name.into()),
            ..Default::default()
        }
    }

    fn source(&self) -> Result<Source> {
        let given = [
            self.fourier.is_some(),
            self.symbol.is_some(),
            self.matrix.is_some(),
            self.builtin.is_some(),
        ]
        .iter()
        .filter(|b| **b)
        .count();
        if given > 1 {
            return Err(Error::Config(format!(
                "observable {}: give only one of fourier, symbol, matrix, builtin",
                self.name
            )));
        }
        if self.classical_average.is_some() && self.matrix.is_none() {
            return Err(Error::Config(format!(
                "observable {}: classical_average is only accepted with matrix",
                self.name
            )));
        }
        if let Some(rows) = &self.fourier {
            return Ok(Source::Symbol(TorusSymbol::from_rows(self.name.clone(), rows)?));
        }
        if let Some(m) = &self.matrix {
            return Ok(Source::Matrix(m.clone(), self.classical_average));
        }
        let key = self
            .symbol
            .as_deref()
            .or(self.builtin.as_deref())
            .unwrap_or(&self.name);
        if self.builtin.is_none() {
            if let Some(mut s) = TorusSymbol::named(key) {
                s.name = self.name.clone();
                return Ok(Source::Symbol(s));
            }
        }
        if self.symbol.is_none() && BUILTINS.contains(&key) {
            return Ok(Source::Builtin(key.to_string()));
        }
        Err(Error::Config(format!("observable {}: unknown symbol or builtin {key:?}", self.name)))
    }
}

/// A list of sizes of one model kind with its observables.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFamily {
    #[serde(flatten)]
    pub kind: FamilyKind,
    #[serde(default)]
    pub sizes: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub observables: Vec<ObservableSpec>,
}

/// One instantiated member of a family.
#[derive(Debug, Clone)]
pub struct Instance {
    pub size: usize,
    pub system: CovariantSystem,
    pub propagator: Option<PropagatorCheck>,
}

fn trace(m: &MapMatrix) -> i64 {
    m[0][0] + m[1][1]
}

fn det(m: &MapMatrix) -> i64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

impl ModelFamily {
    pub fn new(kind: FamilyKind, sizes: Vec<usize>) -> Self {
        Self {
            kind,
            sizes,
            seed: None,
            observables: Vec::new(),
        }
    }

    pub fn cat_map(sizes: Vec<usize>) -> Self {
        Self::new(FamilyKind::CatMap { matrix: CAT_MAP }, sizes)
    }

    pub fn shear(sizes: Vec<usize>) -> Self {
        Self::new(FamilyKind::Shear { matrix: SHEAR }, sizes)
    }

    pub fn gue(sizes: Vec<usize>, seed: u64) -> Self {
        let mut f = Self::new(FamilyKind::Gue, sizes);
        f.seed = Some(seed);
        f
    }

    pub fn with_observable(mut self, spec: ObservableSpec) -> Self {
        self.observables.push(spec);
        self
    }

    /// Effective sizes: the system dimension for `single_system`.
    pub fn effective_sizes(&self) -> Vec<usize> {
        match &self.kind {
            FamilyKind::SingleSystem { system } if self.sizes.is_empty() => vec![system.dim],
            _ => self.sizes.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            FamilyKind::CatMap { matrix } => {
                if det(matrix) != 1 {
                    return Err(Error::Config(format!("cat_map matrix {matrix:?} must have determinant 1")));
                }
                if trace(matrix).abs() <= 2 {
                    return Err(Error::Config(format!(
                        "cat_map matrix {matrix:?} is not hyperbolic (|trace| must exceed 2)"
                    )));
                }
            }
            FamilyKind::Shear { matrix } => {
                if det(matrix) != 1 || trace(matrix).abs() != 2 {
                    return Err(Error::Config(format!(
                        "shear matrix {matrix:?} must have determinant 1 and |trace| = 2"
                    )));
                }
            }
            FamilyKind::Gue => {}
            FamilyKind::SingleSystem { system } => {
                if !self.sizes.is_empty() && self.sizes != [system.dim] {
                    return Err(Error::Config(format!(
                        "single_system has dim {}; sizes must be omitted or [{}]",
                        system.dim, system.dim
                    )));
                }
            }
        }
        let sizes = self.effective_sizes();
        if sizes.is_empty() {
            return Err(Error::Config("sizes must not be empty".into()));
        }
        if sizes[0] == 0 {
            return Err(Error::Config("sizes must be positive".into()));
        }
        if sizes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("sizes must be strictly increasing".into()));
        }
        let mut names = BTreeSet::new();
        for o in &self.observables {
            if !names.insert(o.name.as_str()) {
                return Err(Error::Config(format!("duplicate observable name {:?}", o.name)));
            }
            match o.source()? {
                Source::Symbol(s) => {
                    let need = 2 * s.max_frequency() as usize + 1;
                    if sizes[0] < need {
                        return Err(Error::Config(format!(
                            "observable {}: frequency {} aliases at N = {} (need N ≥ {need})",
                            o.name,
                            s.max_frequency(),
                            sizes[0]
                        )));
                    }
                }
                Source::Matrix(..) if sizes.len() > 1 => {
                    return Err(Error::Config(format!(
                        "observable {}: matrix observables need a single size",
                        o.name
                    )));
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Builds the member of size `size` with all observables and their
    /// classical averages.
    pub fn instantiate(&self, size: usize, tol: Tolerances) -> Result<Instance> {
        let (mut system, propagator) = match &self.kind {
            FamilyKind::CatMap { matrix } | FamilyKind::Shear { matrix } => {
                let (m, check) = torus_propagator(size, matrix)?;
                (CovariantSystem::with_tolerances(GroupAction::cyclic(m), tol)?, Some(check))
            }
            FamilyKind::Gue => (gue_system_with(size, self.seed.unwrap_or(0), tol)?, None),
            FamilyKind::SingleSystem { system } => (system.clone().into_system(tol)?, None),
        };
        for spec in &self.observables {
            let (obs, avg) = match spec.source()? {
                Source::Symbol(s) => {
                    let m = quantize_symbol(size, &s)?;
                    (Observable::new(spec.name.clone(), m), s.classical_average())
                }
                Source::Matrix(j, avg) => {
                    let m = j.to_matrix(size)?;
                    let avg = match avg {
                        Some([re, im]) => C64::new(re, im),
                        None => linalg::trace(m.as_ref()) / size as f64,
                    };
                    (Observable::new(spec.name.clone(), m), avg)
                }
                Source::Builtin(b) => match b.as_str() {
                    "sign_split" => {
                        let mut o = sign_split(size);
                        o.name = spec.name.clone();
                        (o, linalg::ZERO)
                    }
                    _ => unreachable!("checked by source()"),
                },
            };
            system.add_observable(obs)?;
            system.set_classical_average(spec.name.clone(), avg);
        }
        Ok(Instance {
            size,
            system,
            propagator,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_json_shape() {
        let f: ModelFamily = serde_json::from_str(
            r#"{"kind":"cat_map","matrix":[[2,1],[1,1]],"sizes":[8,9],
                "observables":[{"name":"c","fourier":[[0,1,0.5,0],[0,-1,0.5,0]]},{"name":"cos_p"}]}"#,
        )
        .unwrap();
        f.validate().unwrap();
        let inst = f.instantiate(9, Tolerances::default()).unwrap();
        assert_eq!(inst.system.observables().len(), 2);
        assert_eq!(inst.system.classical_average("c"), Some(linalg::ZERO));
        let bad: ModelFamily = serde_json::from_str(r#"{"kind":"cat_map","matrix":[[1,1],[0,1]],"sizes":[8]}"#).unwrap();
        assert!(bad.validate().is_err());
        let desc: ModelFamily = serde_json::from_str(r#"{"kind":"shear","sizes":[8,4]}"#).unwrap();
        assert!(desc.validate().is_err());
    }
}
