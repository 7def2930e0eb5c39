//! Multilevel Monte Carlo driver and its diagnostics.
//!
//! The driver runs a fixed number of allocation passes. The first draws
//! `N_init` realizations per level; each later pass recomputes the
//! variance-optimal targets `N_l* = ⌈2 ε⁻² √(V_l/C_l) Σ_k √(V_k C_k)⌉` from the
//! current statistics and tops every level up to its target. Rate fits,
//! the weak-convergence bound and the consistency check are evaluated once
//! all passes are done.

mod sampler;
mod stats;

pub use sampler::{
    draw_level_sample, CostMode, DrawSettings, FixedClosureSampler, HybridSampler, LevelSample,
    LevelSampler,
};
pub use stats::{level_stats, LevelAccumulator, LevelStats};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grids::RegionSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlmcConfig {
    /// Target RMS tolerance ε.
    pub epsilon: f64,
    /// `K_l` per level; a single entry applies to every level.
    pub histories: Vec<u64>,
    pub initial_samples: u64,
    pub passes: usize,
    pub functional: RegionSpec,
    pub cost_mode: CostMode,
}

impl Default for MlmcConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            histories: vec![10_000],
            initial_samples: 10,
            passes: 3,
            functional: RegionSpec::WholeDomain,
            cost_mode: CostMode::Measured,
        }
    }
}

impl MlmcConfig {
    pub fn validate(&self, max_level: usize) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if max_level < 2 {
            return Err(Error::InvalidConfig(format!(
                "at least three levels are needed for the weak-convergence check, got L = {max_level}"
            )));
        }
        if self.initial_samples < 2 {
            return Err(Error::InvalidConfig("initial samples per level must be >= 2".into()));
        }
        if self.passes == 0 {
            return Err(Error::InvalidConfig("at least one pass is required".into()));
        }
        if self.histories.is_empty()
            || (self.histories.len() != 1 && self.histories.len() != max_level + 1)
            || self.histories.contains(&0)
        {
            return Err(Error::InvalidConfig(format!(
                "histories must hold one positive value or one per level ({} levels)",
                max_level + 1
            )));
        }
        Ok(())
    }

    /// `K_l` expanded to one entry per level.
    pub fn histories_per_level(&self, max_level: usize) -> Vec<u64> {
        match self.histories.as_slice() {
            [k] => vec![*k; max_level + 1],
            ks => ks.to_vec(),
        }
    }
}

/// Real-valued Lagrangian-optimal sample counts `2 ε⁻² √(V_l/C_l) Σ_k √(V_k C_k)`.
pub fn optimal_sample_targets(variances: &[f64], costs: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    if variances.len() != costs.len() {
        return Err(Error::Dimension {
            expected: variances.len(),
            found: costs.len(),
        });
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidConfig(format!("epsilon must be positive, got {epsilon}")));
    }
    if variances.iter().any(|&v| !(v >= 0.0)) || costs.iter().any(|&c| !(c > 0.0)) {
        return Err(Error::InvalidConfig(
            "allocation needs V_l >= 0 and C_l > 0 on every level".into(),
        ));
    }
    let sum: f64 = variances.iter().zip(costs).map(|(v, c)| (v * c).sqrt()).sum();
    let scale = 2.0 / (epsilon * epsilon) * sum;
    Ok(variances
        .iter()
        .zip(costs)
        .map(|(v, c)| scale * (v / c).sqrt())
        .collect())
}

/// Integer targets `N_l*`, rounded up. All-zero variances give all-zero targets.
pub fn optimal_samples(variances: &[f64], costs: &[f64], epsilon: f64) -> Result<Vec<u64>> {
    Ok(optimal_sample_targets(variances, costs, epsilon)?
        .into_iter()
        .map(|t| t.ceil() as u64)
        .collect())
}

/// Cost of the optimal allocation for variance target ε², `ε⁻² (Σ √(V_l C_l))²`.
pub fn optimal_cost(variances: &[f64], costs: &[f64], epsilon: f64) -> f64 {
    let sum: f64 = variances.iter().zip(costs).map(|(v, c)| (v * c).sqrt()).sum();
    sum * sum / (epsilon * epsilon)
}

/// `⟨P̃_L⟩ = Σ_l ⟨ΔP_l⟩`, summed from the coarsest level up.
pub fn combine_estimator(stats: &[LevelStats]) -> f64 {
    stats.iter().fold(0.0, |acc, s| acc + s.mean_delta)
}

/// Least-squares line through `(level, log2 value)` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in log2 units.
    pub residual: f64,
    pub points: usize,
}

pub fn fit_log2_line(points: &[(f64, f64)]) -> Result<LinearFit> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, y)| *y > 0.0 && y.is_finite())
        .map(|&(x, y)| (x, y.log2()))
        .collect();
    let n = usable.len();
    if n < 2 {
        return Err(Error::Fit(n));
    }
    let nf = n as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = usable.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit(1));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (usable
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / nf)
        .sqrt();
    Ok(LinearFit {
        slope,
        intercept,
        residual,
        points: n,
    })
}

/// Decay rate of `|⟨ΔP_l⟩|` over levels `1..=L`.
pub fn fit_alpha(stats: &[LevelStats]) -> Result<LinearFit> {
    let pts: Vec<_> = stats[1..]
        .iter()
        .map(|s| (s.level as f64, s.mean_delta.abs()))
        .collect();
    fit_log2_line(&pts).map(negate)
}

/// Decay rate of `V_l` over levels `1..=L`.
pub fn fit_beta(stats: &[LevelStats]) -> Result<LinearFit> {
    let pts: Vec<_> = stats[1..].iter().map(|s| (s.level as f64, s.var_delta)).collect();
    fit_log2_line(&pts).map(negate)
}

/// Growth rate of `C_l` over all levels.
pub fn fit_gamma(stats: &[LevelStats]) -> Result<LinearFit> {
    let pts: Vec<_> = stats.iter().map(|s| (s.level as f64, s.cost)).collect();
    fit_log2_line(&pts)
}

fn negate(mut fit: LinearFit) -> LinearFit {
    fit.slope = -fit.slope;
    fit
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

pub fn fit_rates(stats: &[LevelStats]) -> Result<Rates> {
    if stats.len() < 3 {
        return Err(Error::Fit(stats.len().saturating_sub(1)));
    }
    Ok(Rates {
        alpha: fit_alpha(stats)?.slope,
        beta: fit_beta(stats)?.slope,
        gamma: fit_gamma(stats)?.slope,
    })
}

/// Complexity class of the theory bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostRegime {
    /// β > γ: cost O(ε⁻²).
    BetaExceedsGamma,
    /// β = γ: cost O(ε⁻² log²ε).
    BetaEqualsGamma,
    /// β < γ: cost O(ε^{−2−(γ−β)/α}).
    GammaExceedsBeta,
}

impl CostRegime {
    pub fn classify(beta: f64, gamma: f64) -> Self {
        if beta > gamma {
            CostRegime::BetaExceedsGamma
        } else if beta < gamma {
            CostRegime::GammaExceedsBeta
        } else {
            CostRegime::BetaEqualsGamma
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakConvergence {
    /// `(level, W_level)` for the last three levels.
    pub values: Vec<(usize, f64)>,
    pub threshold: f64,
    pub max: f64,
    pub passed: bool,
}

/// Remaining-bias estimate `W_l = |⟨ΔP_l⟩| / (2^α − 1)` on levels `L−2..=L`,
/// compared against `ε/√2`.
pub fn weak_convergence(stats: &[LevelStats], alpha: f64, epsilon: f64) -> Result<WeakConvergence> {
    if stats.len() < 3 {
        return Err(Error::InvalidConfig(
            "weak convergence needs at least three levels".into(),
        ));
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "weak convergence needs alpha > 0, got {alpha}"
        )));
    }
    let divisor = 2f64.powf(alpha) - 1.0;
    let values: Vec<(usize, f64)> = stats[stats.len() - 3..]
        .iter()
        .map(|s| (s.level, s.mean_delta.abs() / divisor))
        .collect();
    let threshold = epsilon / std::f64::consts::SQRT_2;
    let max = values.iter().map(|v| v.1).fold(0.0, f64::max);
    Ok(WeakConvergence {
        passed: values.iter().all(|v| v.1 < threshold),
        values,
        threshold,
        max,
    })
}

/// `(⟨P_{l−1}⟩ − ⟨P_l⟩ + ⟨ΔP_l⟩) / (3 (√V(P_{l−1}) + √V(P_l) + √V(ΔP_l)))`,
/// with `⟨P_{l−1}⟩` and `V(P_{l−1})` from the fine grid of level `l−1`.
/// Zero when all three variances vanish.
pub fn consistency_check(coarse: &LevelStats, fine: &LevelStats) -> f64 {
    let numerator = coarse.mean_fine - fine.mean_fine + fine.mean_delta;
    let denominator = 3.0 * (coarse.var_fine.sqrt() + fine.var_fine.sqrt() + fine.var_delta.sqrt());
    if denominator == 0.0 {
        0.0
    } else {
        numerator / denominator
    }
}

/// Samples requested in one allocation pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassRecord {
    pub pass: usize,
    /// Real-valued targets used for this pass; empty for the initial pass.
    pub targets: Vec<f64>,
    /// `V_l` and `C_l` the targets were computed from.
    pub variances: Vec<f64>,
    pub costs: Vec<f64>,
    pub drawn: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlmcReport {
    pub epsilon: f64,
    pub levels: Vec<LevelStats>,
    /// Total realizations per level, initial ones included.
    pub samples: Vec<u64>,
    pub alpha: Option<LinearFit>,
    pub beta: Option<LinearFit>,
    pub gamma: Option<LinearFit>,
    pub weak: Option<WeakConvergence>,
    /// `CC_l` for `l = 1..=L`.
    pub consistency: Vec<f64>,
    pub combined_estimate: f64,
    /// Σ_l of accumulated per-sample costs.
    pub total_cost: f64,
    /// `ε⁻² (Σ √(V_l C_l))²` from the final statistics.
    pub optimal_cost: f64,
    pub regime: Option<CostRegime>,
    pub passes: Vec<PassRecord>,
    pub void_cells: u64,
    pub boundary_fallbacks: u64,
    /// Largest relative balance defect over every low-order solve.
    pub max_balance_residual: f64,
}

impl MlmcReport {
    pub fn rates(&self) -> Option<Rates> {
        Some(Rates {
            alpha: self.alpha?.slope,
            beta: self.beta?.slope,
            gamma: self.gamma?.slope,
        })
    }

    pub fn consistency_passed(&self) -> bool {
        self.consistency.iter().all(|cc| cc.abs() < 1.0)
    }
}

/// Runs the multi-pass MLMC allocation on `sampler`'s levels.
pub fn run_mlmc<S: LevelSampler + ?Sized>(sampler: &S, config: &MlmcConfig) -> Result<MlmcReport> {
    let max_level = sampler.max_level();
    config.validate(max_level)?;
    let levels = max_level + 1;
    let mut accs: Vec<LevelAccumulator> = (0..levels).map(LevelAccumulator::new).collect();
    let mut passes = Vec::with_capacity(config.passes);

    for pass in 1..=config.passes {
        let mut record = PassRecord {
            pass,
            targets: Vec::new(),
            variances: Vec::new(),
            costs: Vec::new(),
            drawn: vec![0; levels],
        };
        let extra: Vec<u64> = if pass == 1 {
            vec![config.initial_samples; levels]
        } else {
            let stats = accs.iter().map(level_stats).collect::<Result<Vec<_>>>()?;
            record.variances = stats.iter().map(|s| s.var_delta).collect();
            record.costs = stats.iter().map(|s| s.cost).collect();
            record.targets = optimal_sample_targets(&record.variances, &record.costs, config.epsilon)?;
            record
                .targets
                .iter()
                .zip(&accs)
                .map(|(t, acc)| (t.ceil() as u64).saturating_sub(acc.count))
                .collect()
        };
        for (level, &n) in extra.iter().enumerate() {
            for _ in 0..n {
                let replicate = accs[level].count;
                let sample = sampler.sample(level, replicate)?;
                accs[level].push(&sample);
            }
            record.drawn[level] = n;
        }
        passes.push(record);
    }

    let stats = accs.iter().map(level_stats).collect::<Result<Vec<_>>>()?;
    let alpha = fit_alpha(&stats).ok();
    let beta = fit_beta(&stats).ok();
    let gamma = fit_gamma(&stats).ok();
    let weak = alpha.and_then(|a| weak_convergence(&stats, a.slope, config.epsilon).ok());
    let consistency = stats.windows(2).map(|w| consistency_check(&w[0], &w[1])).collect();
    let variances: Vec<f64> = stats.iter().map(|s| s.var_delta).collect();
    let costs: Vec<f64> = stats.iter().map(|s| s.cost).collect();

    Ok(MlmcReport {
        epsilon: config.epsilon,
        samples: accs.iter().map(|a| a.count).collect(),
        combined_estimate: combine_estimator(&stats),
        total_cost: accs.iter().map(|a| a.cost).sum(),
        optimal_cost: optimal_cost(&variances, &costs, config.epsilon),
        regime: beta.zip(gamma).map(|(b, g)| CostRegime::classify(b.slope, g.slope)),
        alpha,
        beta,
        gamma,
        weak,
        consistency,
        passes,
        void_cells: accs.iter().map(|a| a.void_cells).sum(),
        boundary_fallbacks: accs.iter().map(|a| a.boundary_fallbacks).sum(),
        max_balance_residual: accs.iter().map(|a| a.max_balance_residual).fold(0.0, f64::max),
        levels: stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats_with(level: usize, mean_delta: f64, var_delta: f64, cost: f64) -> LevelStats {
        LevelStats {
            level,
            samples: 10,
            mean_delta,
            var_delta,
            kurtosis: 3.0,
            kurtosis_degenerate: false,
            cost,
            mean_fine: 0.0,
            var_fine: 0.0,
            mean_coarse: None,
            var_coarse: None,
        }
    }

    #[test]
    fn hand_allocation() {
        let n = optimal_samples(&[4.0, 1.0], &[1.0, 4.0], 1.0).unwrap();
        assert_eq!(n, vec![16, 4]);
    }

    #[test]
    fn zero_variance_allocation() {
        assert_eq!(optimal_samples(&[0.0, 0.0], &[1.0, 2.0], 1e-3).unwrap(), vec![0, 0]);
    }

    #[test]
    fn halving_epsilon_quadruples_targets() {
        let v = [2.3e-3, 4.1e-5, 7.7e-6];
        let c = [1.0, 1.6, 2.7];
        let a = optimal_sample_targets(&v, &c, 1e-2).unwrap();
        let b = optimal_sample_targets(&v, &c, 5e-3).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((y / x - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn allocation_rejects_non_positive_cost() {
        assert!(optimal_samples(&[1.0], &[0.0], 1.0).is_err());
        assert!(optimal_samples(&[1.0, 2.0], &[1.0], 1.0).is_err());
    }

    #[test]
    fn combine_sums_corrections() {
        let s = vec![
            stats_with(0, 1.0, 0.0, 1.0),
            stats_with(1, 0.1, 0.0, 1.0),
            stats_with(2, 0.01, 0.0, 1.0),
        ];
        assert!((combine_estimator(&s) - 1.11).abs() < 1e-15);
        assert_eq!(combine_estimator(&s[..1]), 1.0);
    }

    #[test]
    fn exact_geometric_rates() {
        let s: Vec<_> = (0..4)
            .map(|l| {
                let l32 = l as i32;
                stats_with(
                    l,
                    2f64.powi(-2 * l32),
                    5.0 * 2f64.powi(-3 * l32),
                    2f64.powf(0.8 * l as f64),
                )
            })
            .collect();
        let r = fit_rates(&s).unwrap();
        assert!((r.alpha - 2.0).abs() < 1e-12);
        assert!((r.beta - 3.0).abs() < 1e-12);
        assert!((r.gamma - 0.8).abs() < 1e-12);
        assert_eq!(CostRegime::classify(r.beta, r.gamma), CostRegime::BetaExceedsGamma);
    }

    #[test]
    fn fit_skips_zero_points() {
        let s = vec![
            stats_with(0, 1.0, 1.0, 1.0),
            stats_with(1, 0.25, 0.0, 2.0),
            stats_with(2, 0.0625, 0.0, 4.0),
        ];
        assert!(matches!(fit_beta(&s), Err(Error::Fit(0))));
        assert!((fit_alpha(&s).unwrap().slope - 2.0).abs() < 1e-12);
    }

    #[test]
    fn weak_convergence_examples() {
        let s: Vec<_> = (0..4).map(|l| stats_with(l, 9e-4, 0.0, 1.0)).collect();
        let w = weak_convergence(&s, 2.0, 1e-3).unwrap();
        assert!((w.max - 3e-4).abs() < 1e-15);
        assert!((w.threshold - 7.071_067_811_865_475e-4).abs() < 1e-15);
        assert!(w.passed);
        assert_eq!(w.values.iter().map(|v| v.0).collect::<Vec<_>>(), vec![1, 2, 3]);

        let w = weak_convergence(&s, 1.0, 1e-3).unwrap();
        assert!((w.max - 9e-4).abs() < 1e-15);
        assert!(!w.passed);

        // Negative corrections are judged by magnitude.
        let s: Vec<_> = (0..3).map(|l| stats_with(l, -3e-3, 0.0, 1.0)).collect();
        assert!(!weak_convergence(&s, 2.0, 1e-3).unwrap().passed);
        assert!(weak_convergence(&s, 0.0, 1e-3).is_err());
    }

    #[test]
    fn consistency_examples() {
        let mut coarse = stats_with(0, 1.0, 0.0, 1.0);
        let mut fine = stats_with(1, 0.25, 0.0, 1.0);
        coarse.mean_fine = 1.0;
        fine.mean_fine = 1.25;
        assert_eq!(consistency_check(&coarse, &fine), 0.0);

        coarse.mean_fine = 1.3;
        coarse.var_fine = 0.01;
        fine.var_fine = 0.01;
        fine.var_delta = 0.01;
        let cc = consistency_check(&coarse, &fine);
        assert!((cc - 1.0 / 3.0).abs() < 1e-12, "{cc}");
    }

    #[test]
    fn config_validation() {
        let c = MlmcConfig::default();
        assert!(c.validate(3).is_ok());
        assert!(c.validate(1).is_err());
        assert!(MlmcConfig { epsilon: 0.0, ..c.clone() }.validate(3).is_err());
        assert!(MlmcConfig { initial_samples: 1, ..c.clone() }.validate(3).is_err());
        assert!(MlmcConfig { histories: vec![1, 2], ..c.clone() }.validate(3).is_err());
        assert_eq!(
            MlmcConfig { histories: vec![1, 2, 3, 4], ..c.clone() }.histories_per_level(3),
            vec![1, 2, 3, 4]
        );
        assert_eq!(c.histories_per_level(2), vec![10_000; 3]);
    }
}
