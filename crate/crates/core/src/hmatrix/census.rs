use serde::{Deserialize, Serialize};

use super::BlockClass;

/// Block counts by class at one tree level.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelCounts {
    pub level: u32,
    pub s: u64,
    pub e: u64,
    pub v: u64,
    pub lr: u64,
}

impl LevelCounts {
    pub fn total(&self) -> u64 {
        self.s + self.e + self.v + self.lr
    }

    pub(crate) fn add(&mut self, class: BlockClass) {
        match class {
            BlockClass::S => self.s += 1,
            BlockClass::E => self.e += 1,
            BlockClass::V => self.v += 1,
            BlockClass::LR => self.lr += 1,
            BlockClass::Near => {}
        }
    }
}

/// Per-level S/E/V/LR counts of a self-interaction traversal plus work totals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CensusTable {
    pub p: u32,
    pub p0: u32,
    pub levels: Vec<LevelCounts>,
    /// Kernel evaluations spent on non-admissible leaf blocks.
    pub direct_work: u64,
    /// `sum_l LR_l 4^(p-l)`: block dimension summed over low-rank blocks
    /// (multiply by the rank for a cost estimate).
    pub low_rank_work: u64,
}

impl CensusTable {
    /// Fraction-free coverage check: the blocks alive at `level` plus every
    /// earlier low-rank block, each measured in level-`level` cells, tile the
    /// `4^level x 4^level` cell grid, so the result is `16^level`.
    pub fn covered_cells(&self, level: u32) -> u64 {
        self.levels
            .iter()
            .take_while(|c| c.level <= level)
            .map(|c| {
                let weight = 16u64.pow(level - c.level);
                if c.level == level {
                    c.total()
                } else {
                    c.lr * weight
                }
            })
            .sum()
    }

    /// Census of pairs visited by a traversal plan (grid-mode self interaction).
    pub fn from_visits(p: u32, p0: u32, visits: &[LevelCounts]) -> Self {
        finish(p, p0, visits.to_vec())
    }
}

fn finish(p: u32, p0: u32, levels: Vec<LevelCounts>) -> CensusTable {
    let last = levels.last().copied().unwrap_or_default();
    let direct_work = (last.s + last.e + last.v) * 16u64.pow(p0);
    let low_rank_work = levels.iter().map(|c| c.lr * 4u64.pow(p - c.level)).sum();
    CensusTable {
        p,
        p0,
        levels,
        direct_work,
        low_rank_work,
    }
}

/// Iterate `S -> (4S, 8E, 4V)`, `E -> (2E, 2V, 12LR)`, `V -> (1V, 15LR)`
/// from a single root `S` down to level `p - p0`.
pub fn block_census(p: u32, p0: u32) -> crate::Result<CensusTable> {
    if p <= p0 {
        return Err(crate::Error::Config(format!("census needs p > p0 (p = {p}, p0 = {p0})")));
    }
    let mut levels = vec![LevelCounts {
        level: 0,
        s: 1,
        ..Default::default()
    }];
    for level in 1..=p - p0 {
        let prev = levels[level as usize - 1];
        levels.push(LevelCounts {
            level,
            s: 4 * prev.s,
            e: 8 * prev.s + 2 * prev.e,
            v: 4 * prev.s + 2 * prev.e + prev.v,
            lr: 12 * prev.e + 15 * prev.v,
        });
    }
    Ok(finish(p, p0, levels))
}
