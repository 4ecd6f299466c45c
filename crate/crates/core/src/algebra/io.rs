use std::collections::BTreeMap;
use std::path::Path;

use faer::Mat;
use serde::{Deserialize, Serialize};

use super::{
    AbelianFactor, CovariantSystem, FactorKind, FiniteGroup, GroupAction, Observable, Tolerances,
};
use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};

/// A dense complex matrix as `[re, im]` pairs, row-major: either flat
/// (`d²` entries) or as a list of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexMatrixJson {
    Nested(Vec<Vec<[f64; 2]>>),
    Flat(Vec<[f64; 2]>),
}

impl ComplexMatrixJson {
    pub fn from_matrix(a: &CMat) -> Self {
        let mut out = Vec::with_capacity(a.nrows() * a.ncols());
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                out.push([a[(i, j)].re, a[(i, j)].im]);
            }
        }
        ComplexMatrixJson::Flat(out)
    }

    pub fn to_matrix(&self, dim: usize) -> Result<CMat> {
        match self {
            ComplexMatrixJson::Flat(v) => {
                if v.len() != dim * dim {
                    return Err(Error::InvalidSystem(format!(
                        "matrix has {} entries, expected {}",
                        v.len(),
                        dim * dim
                    )));
                }
                Ok(Mat::from_fn(dim, dim, |i, j| {
                    let [re, im] = v[i * dim + j];
                    C64::new(re, im)
                }))
            }
            ComplexMatrixJson::Nested(rows) => {
                if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                    return Err(Error::InvalidSystem(format!(
                        "matrix rows must form a {dim}x{dim} array"
                    )));
                }
                Ok(Mat::from_fn(dim, dim, |i, j| {
                    let [re, im] = rows[i][j];
                    C64::new(re, im)
                }))
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FactorJson {
    Z { matrix: ComplexMatrixJson },
    R { generator: ComplexMatrixJson },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ActionJson {
    Z {
        matrix: ComplexMatrixJson,
    },
    R {
        generator: ComplexMatrixJson,
    },
    Product {
        factors: Vec<FactorJson>,
    },
    FiniteGroup {
        matrices: Vec<ComplexMatrixJson>,
        table: Vec<Vec<usize>>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        factors: Vec<FactorJson>,
    },
}

/// JSON form of a [`CovariantSystem`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemJson {
    pub dim: usize,
    pub action: ActionJson,
    #[serde(default)]
    pub observables: BTreeMap<String, ComplexMatrixJson>,
    #[serde(default)]
    pub classical_average: BTreeMap<String, [f64; 2]>,
}

impl SystemJson {
    pub fn into_system(self, tolerances: Tolerances) -> Result<CovariantSystem> {
        let dim = self.dim;
        if dim == 0 {
            return Err(Error::InvalidSystem("dim must be positive".into()));
        }
        let factor = |f: &FactorJson| -> Result<AbelianFactor> {
            Ok(match f {
                FactorJson::Z { matrix } => AbelianFactor::cyclic(matrix.to_matrix(dim)?),
                FactorJson::R { generator } => AbelianFactor::flow(generator.to_matrix(dim)?),
            })
        };
        let action = match &self.action {
            ActionJson::Z { matrix } => GroupAction::cyclic(matrix.to_matrix(dim)?),
            ActionJson::R { generator } => GroupAction::flow(generator.to_matrix(dim)?),
            ActionJson::Product { factors } => {
                if factors.is_empty() {
                    return Err(Error::InvalidAction("product action has no factors".into()));
                }
                GroupAction::product(factors.iter().map(factor).collect::<Result<_>>()?)
            }
            ActionJson::FiniteGroup {
                matrices,
                table,
                factors,
            } => GroupAction::finite_extension(
                FiniteGroup {
                    elements: matrices
                        .iter()
                        .map(|m| m.to_matrix(dim))
                        .collect::<Result<_>>()?,
                    table: table.clone(),
                },
                factors.iter().map(factor).collect::<Result<_>>()?,
            ),
        };
        let mut sys = CovariantSystem::with_tolerances(action, tolerances)?;
        for (name, m) in &self.observables {
            sys.add_observable(Observable::new(name.clone(), m.to_matrix(dim)?))?;
        }
        for (name, [re, im]) in &self.classical_average {
            sys.set_classical_average(name.clone(), C64::new(*re, *im));
        }
        Ok(sys)
    }
}

/// Parses a system document with default tolerances.
pub fn parse_system(text: &str) -> Result<CovariantSystem> {
    let json: SystemJson = serde_json::from_str(text)?;
    json.into_system(Tolerances::default())
}

pub fn load_system(path: impl AsRef<Path>) -> Result<CovariantSystem> {
    parse_system(&std::fs::read_to_string(path)?)
}

pub fn system_to_json(system: &CovariantSystem) -> SystemJson {
    let m = ComplexMatrixJson::from_matrix;
    let factor = |f: &AbelianFactor| match f.kind {
        FactorKind::Cyclic => FactorJson::Z {
            matrix: m(&f.matrix),
        },
        FactorKind::Flow => FactorJson::R {
            generator: m(&f.matrix),
        },
    };
    let action = system.action();
    let action = match (&action.finite, action.factors.as_slice()) {
        (Some(g), fs) => ActionJson::FiniteGroup {
            matrices: g.elements.iter().map(m).collect(),
            table: g.table.clone(),
            factors: fs.iter().map(factor).collect(),
        },
        (None, [f]) => match factor(f) {
            FactorJson::Z { matrix } => ActionJson::Z { matrix },
            FactorJson::R { generator } => ActionJson::R { generator },
        },
        (None, fs) => ActionJson::Product {
            factors: fs.iter().map(factor).collect(),
        },
    };
    SystemJson {
        dim: system.dim(),
        action,
        observables: system
            .observables()
            .iter()
            .map(|o| (o.name.clone(), m(&o.matrix)))
            .collect(),
        classical_average: system
            .classical_averages()
            .iter()
            .map(|(k, v)| (k.clone(), [v.re, v.im]))
            .collect(),
    }
}
