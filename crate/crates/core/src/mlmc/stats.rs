use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::sampler::LevelSample;

/// Power sums `Σ (v − s)^k` taken about the first observed value `s`, which
/// keeps the fourth moment usable when the mean dwarfs the spread.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct ShiftedSums {
    shift: f64,
    sums: [f64; 4],
}

impl ShiftedSums {
    fn push(&mut self, value: f64, first: bool) {
        if first {
            self.shift = value;
        }
        let d = value - self.shift;
        let mut p = 1.0;
        for s in self.sums.iter_mut() {
            p *= d;
            *s += p;
        }
    }

    fn mean(&self, n: f64) -> f64 {
        self.shift + self.sums[0] / n
    }

    /// Unbiased sample variance.
    fn variance(&self, n: f64) -> f64 {
        let ss = self.sums[1] - self.sums[0] * self.sums[0] / n;
        (ss / (n - 1.0)).max(0.0)
    }

    /// `m4 / m2²` with `1/N` central moments.
    fn kurtosis(&self, n: f64) -> Option<f64> {
        let [s1, s2, s3, s4] = self.sums;
        let d = s1 / n;
        let m2 = s2 / n - d * d;
        if !(m2 > 0.0) {
            return None;
        }
        let m4 = s4 / n - 4.0 * d * s3 / n + 6.0 * d * d * s2 / n - 3.0 * d.powi(4);
        Some((m4 / (m2 * m2)).max(1.0))
    }
}

/// Running sums for one MLMC level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelAccumulator {
    pub level: usize,
    pub count: u64,
    delta: ShiftedSums,
    fine: ShiftedSums,
    coarse: Option<ShiftedSums>,
    pub cost: f64,
    pub void_cells: u64,
    pub boundary_fallbacks: u64,
    pub max_balance_residual: f64,
}

impl LevelAccumulator {
    pub fn new(level: usize) -> Self {
        Self {
            level,
            count: 0,
            delta: ShiftedSums::default(),
            fine: ShiftedSums::default(),
            coarse: (level > 0).then(ShiftedSums::default),
            cost: 0.0,
            void_cells: 0,
            boundary_fallbacks: 0,
            max_balance_residual: 0.0,
        }
    }

    pub fn push(&mut self, sample: &LevelSample) {
        let first = self.count == 0;
        self.delta.push(sample.delta, first);
        self.fine.push(sample.fine, first);
        if let (Some(acc), Some(v)) = (self.coarse.as_mut(), sample.coarse) {
            acc.push(v, first);
        }
        self.cost += sample.cost;
        self.void_cells += sample.void_cells as u64;
        self.boundary_fallbacks += sample.boundary_fallbacks as u64;
        self.max_balance_residual = self.max_balance_residual.max(sample.balance_residual);
        self.count += 1;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    pub level: usize,
    pub samples: u64,
    /// `⟨ΔP_l⟩`.
    pub mean_delta: f64,
    /// `V_l`, unbiased.
    pub var_delta: f64,
    pub kurtosis: f64,
    /// Set when `V_l = 0` and the kurtosis is reported as 0.
    pub kurtosis_degenerate: bool,
    /// `C_l`, mean cost per sample.
    pub cost: f64,
    /// `⟨P_l⟩` on the fine grid of the pair.
    pub mean_fine: f64,
    pub var_fine: f64,
    /// `⟨P_{l−1}⟩` from the same realizations; absent on level 0.
    pub mean_coarse: Option<f64>,
    pub var_coarse: Option<f64>,
}

pub fn level_stats(acc: &LevelAccumulator) -> Result<LevelStats> {
    if acc.count < 2 {
        return Err(Error::InsufficientSamples {
            level: acc.level,
            count: acc.count,
        });
    }
    let n = acc.count as f64;
    let var_delta = acc.delta.variance(n);
    let kurtosis = if var_delta > 0.0 {
        acc.delta.kurtosis(n)
    } else {
        None
    };
    Ok(LevelStats {
        level: acc.level,
        samples: acc.count,
        mean_delta: acc.delta.mean(n),
        var_delta,
        kurtosis: kurtosis.unwrap_or(0.0),
        kurtosis_degenerate: kurtosis.is_none(),
        cost: acc.cost / n,
        mean_fine: acc.fine.mean(n),
        var_fine: acc.fine.variance(n),
        mean_coarse: acc.coarse.as_ref().map(|c| c.mean(n)),
        var_coarse: acc.coarse.as_ref().map(|c| c.variance(n)),
    })
}
