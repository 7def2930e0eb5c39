use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grids::{integrate_region, GridHierarchy, RegionSpec};
use crate::loqd::{balance_residual, solve_loqd, Closures};
use crate::transport::{simulate_sample, BoundaryFactors, SampleSeed, SlabProblem, TransportOptions};

/// How a sample's cost `C_{l,n}` is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostMode {
    /// Wall-clock seconds for the Monte Carlo run and both solves.
    #[default]
    Measured,
    /// Flight segments tracked plus cells solved; reproducible across machines.
    Proxy,
}

/// One realization on a level pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelSample {
    /// `P_l(ω)`.
    pub fine: f64,
    /// `P_{l−1}(ω)`; absent on level 0.
    pub coarse: Option<f64>,
    /// `P_l(ω) − P_{l−1}(ω)`, or `P_0(ω)` on level 0.
    pub delta: f64,
    pub cost: f64,
    pub void_cells: usize,
    pub boundary_fallbacks: usize,
    /// Largest relative global balance defect of the solves in this draw.
    #[serde(default)]
    pub balance_residual: f64,
}

impl LevelSample {
    pub fn level_zero(value: f64, cost: f64) -> Self {
        Self {
            fine: value,
            coarse: None,
            delta: value,
            cost,
            void_cells: 0,
            boundary_fallbacks: 0,
            balance_residual: 0.0,
        }
    }

    pub fn pair(fine: f64, coarse: f64, cost: f64) -> Self {
        Self {
            fine,
            coarse: Some(coarse),
            delta: fine - coarse,
            cost,
            void_cells: 0,
            boundary_fallbacks: 0,
            balance_residual: 0.0,
        }
    }
}

/// Source of independent realizations `ω_{n,l}` for the MLMC driver.
pub trait LevelSampler {
    fn max_level(&self) -> usize;

    /// Draws replicate `replicate` of level `level`. Implementations must be
    /// deterministic in `(level, replicate)`.
    fn sample(&self, level: usize, replicate: u64) -> Result<LevelSample>;
}

/// Parameters of a hybrid draw beyond the problem and hierarchy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrawSettings {
    pub histories: u64,
    pub region: RegionSpec,
    pub cost_mode: CostMode,
    pub transport: TransportOptions,
}

/// One hybrid realization: a Monte Carlo run on `G_l`, its tallies restricted
/// to `G_{l−1}`, and a low-order solve on each grid from the same tallies.
pub fn draw_level_sample(
    problem: &SlabProblem,
    hierarchy: &GridHierarchy,
    level: usize,
    seed: SampleSeed,
    settings: &DrawSettings,
) -> Result<LevelSample> {
    let start = Instant::now();
    let fine_grid = hierarchy.grid(level);
    let tallies = simulate_sample(problem, fine_grid, settings.histories, seed, &settings.transport)?;

    let fine_closures = Closures::from_tallies(&tallies);
    let fine_solution = solve_loqd(problem, fine_grid, &fine_closures)?;
    let fine = integrate_region(&fine_solution.phi, fine_grid, hierarchy, settings.region)?;
    let mut cells = fine_grid.cell_count();
    let mut void_cells = fine_closures.void_cells;
    let mut balance = balance_residual(&fine_solution, problem, fine_grid, &fine_closures);

    let coarse = if level > 0 {
        let coarse_grid = hierarchy.grid(level - 1);
        let restricted = hierarchy.restrict_tallies(&tallies, level - 1)?;
        let closures = Closures::from_tallies(&restricted);
        let solution = solve_loqd(problem, coarse_grid, &closures)?;
        cells += coarse_grid.cell_count();
        void_cells += closures.void_cells;
        balance = balance.max(balance_residual(&solution, problem, coarse_grid, &closures));
        Some(integrate_region(&solution.phi, coarse_grid, hierarchy, settings.region)?)
    } else {
        None
    };

    let cost = match settings.cost_mode {
        CostMode::Measured => start.elapsed().as_secs_f64(),
        CostMode::Proxy => (tallies.segments + cells as u64) as f64,
    };
    Ok(LevelSample {
        fine,
        coarse,
        delta: coarse.map_or(fine, |c| fine - c),
        cost,
        void_cells,
        boundary_fallbacks: fine_closures.boundary_fallbacks,
        balance_residual: balance,
    })
}

/// Hybrid Monte Carlo / quasidiffusion sampler.
#[derive(Debug, Clone)]
pub struct HybridSampler {
    pub problem: SlabProblem,
    pub hierarchy: GridHierarchy,
    /// `K_l` per level.
    pub histories: Vec<u64>,
    pub region: RegionSpec,
    pub cost_mode: CostMode,
    pub transport: TransportOptions,
    pub master_seed: u64,
}

impl LevelSampler for HybridSampler {
    fn max_level(&self) -> usize {
        self.hierarchy.max_level()
    }

    fn sample(&self, level: usize, replicate: u64) -> Result<LevelSample> {
        let settings = DrawSettings {
            histories: self.histories[level],
            region: self.region,
            cost_mode: self.cost_mode,
            transport: self.transport,
        };
        draw_level_sample(
            &self.problem,
            &self.hierarchy,
            level,
            SampleSeed::new(self.master_seed, level, replicate),
            &settings,
        )
    }
}

/// Deterministic sampler that solves with fixed closures on every grid. Each
/// draw returns the pure discretization difference of the two solves; cost is
/// the number of cells solved.
#[derive(Debug, Clone)]
pub struct FixedClosureSampler {
    pub problem: SlabProblem,
    pub hierarchy: GridHierarchy,
    pub region: RegionSpec,
    pub eddington: f64,
    pub boundary: BoundaryFactors,
}

impl FixedClosureSampler {
    pub fn diffusion(problem: SlabProblem, hierarchy: GridHierarchy, region: RegionSpec) -> Self {
        Self {
            problem,
            hierarchy,
            region,
            eddington: crate::transport::ISOTROPIC_EDDINGTON,
            boundary: BoundaryFactors::isotropic(),
        }
    }

    /// Functional on grid `level` under the fixed closures.
    pub fn functional(&self, level: usize) -> Result<f64> {
        let grid = self.hierarchy.grid(level);
        let closures = Closures::uniform(grid.cell_count(), self.eddington, self.boundary);
        let solution = solve_loqd(&self.problem, grid, &closures)?;
        integrate_region(&solution.phi, grid, &self.hierarchy, self.region)
    }
}

impl LevelSampler for FixedClosureSampler {
    fn max_level(&self) -> usize {
        self.hierarchy.max_level()
    }

    fn sample(&self, level: usize, _replicate: u64) -> Result<LevelSample> {
        let fine = self.functional(level)?;
        let mut cells = self.hierarchy.grid(level).cell_count();
        if level == 0 {
            return Ok(LevelSample::level_zero(fine, cells as f64));
        }
        cells += self.hierarchy.grid(level - 1).cell_count();
        Ok(LevelSample::pair(fine, self.functional(level - 1)?, cells as f64))
    }
}
