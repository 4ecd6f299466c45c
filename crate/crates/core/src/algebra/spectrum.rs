use serde::Serialize;

use super::IsotypicDecomposition;

/// Multiplicities of one energy level `E_j`.
#[derive(Debug, Clone, Serialize)]
pub struct LevelRow {
    pub energy: f64,
    /// `m(E_j)`: total rank of the blocks at this energy.
    pub m: usize,
    /// `m*(E_j)`: total number of irreducible summands at this energy.
    pub m_star: usize,
    /// `N(E_j)`.
    pub n: usize,
    /// `N*(E_j)`.
    pub n_star: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", content = "constant", rename_all = "snake_case")]
pub enum Regularity {
    /// Smallest `C` with `m(E_{j+1}) ≤ C N(E_j)` and `m*(E_{j+1}) ≤ C N*(E_j)`.
    Regular(f64),
    /// Only one energy level: every `C` works.
    Vacuous,
}

impl Regularity {
    pub fn constant(&self) -> Option<f64> {
        match self {
            Regularity::Regular(c) => Some(*c),
            Regularity::Vacuous => None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumSummary {
    pub levels: Vec<LevelRow>,
    pub regularity: Regularity,
}

impl SpectrumSummary {
    /// `N(E)` as a right-continuous step function.
    pub fn n_at(&self, e: f64) -> usize {
        self.levels
            .iter()
            .take_while(|l| l.energy <= e)
            .last()
            .map_or(0, |l| l.n)
    }

    pub fn n_star_at(&self, e: f64) -> usize {
        self.levels
            .iter()
            .take_while(|l| l.energy <= e)
            .last()
            .map_or(0, |l| l.n_star)
    }
}

/// Level multiplicities, counting functions and the regularity constant.
pub fn spectrum_summary(decomp: &IsotypicDecomposition) -> SpectrumSummary {
    let levels_e = decomp.energy_levels();
    let mut levels = Vec::with_capacity(levels_e.len());
    let (mut n, mut n_star) = (0, 0);
    let mut b = 0;
    let blocks = decomp.blocks();
    for (j, &e) in levels_e.iter().enumerate() {
        let end = match levels_e.get(j + 1) {
            Some(&next) => blocks.partition_point(|blk| blk.energy < next),
            None => blocks.len(),
        };
        let (mut m, mut m_star) = (0, 0);
        for blk in &blocks[b..end] {
            m += blk.rank;
            m_star += blk.multiplicity;
        }
        b = end;
        n += m;
        n_star += m_star;
        levels.push(LevelRow {
            energy: e,
            m,
            m_star,
            n,
            n_star,
        });
    }
    let regularity = if levels.len() < 2 {
        Regularity::Vacuous
    } else {
        let c = levels
            .windows(2)
            .filter(|w| w[0].n > 0)
            .map(|w| {
                (w[1].m as f64 / w[0].n as f64).max(w[1].m_star as f64 / w[0].n_star as f64)
            })
            .fold(0.0, f64::max);
        Regularity::Regular(c)
    };
    SpectrumSummary { levels, regularity }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{CovariantSystem, GroupAction};
    use crate::linalg;

    #[test]
    fn diagonal_flow_levels() {
        let h = linalg::from_real_diag(&[0.0, 1.0, 1.0, 2.0]);
        let dec = CovariantSystem::new(GroupAction::flow(h)).unwrap().decompose().unwrap();
        let s = spectrum_summary(&dec);
        let ms: Vec<usize> = s.levels.iter().map(|l| l.m).collect();
        assert_eq!(ms, vec![1, 2, 1]);
        assert_eq!(s.n_at(1.0), 3);
        assert_eq!(s.n_star_at(1.0), 3);
        assert_eq!(s.n_at(-0.5), 0);
        assert_eq!(s.regularity, Regularity::Regular(2.0));
    }

    #[test]
    fn single_level_is_vacuous() {
        let dec = CovariantSystem::new(GroupAction::cyclic(linalg::identity(4)))
            .unwrap()
            .decompose()
            .unwrap();
        let s = spectrum_summary(&dec);
        assert_eq!(s.levels.len(), 1);
        assert_eq!(s.levels[0].m, 4);
        assert_eq!(s.regularity, Regularity::Vacuous);
    }
}
