//! Nested uniform grid hierarchy, functional regions, and tally restriction.
//!
//! Level `l` holds `I_0 * 2^l` equal cells on `[0, X]`. Edges on every level
//! are computed as `i * (X / I_l)`, so each coarse edge reappears bitwise on
//! all finer levels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transport::ClosureTallies;

pub const REFINEMENT_RATIO: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    level: usize,
    edges: Vec<f64>,
    widths: Vec<f64>,
}

impl Grid {
    /// Uniform grid of `cells` cells on `[0, length]`.
    pub fn uniform(level: usize, length: f64, cells: usize) -> Result<Self> {
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "slab length must be positive, got {length}"
            )));
        }
        if cells == 0 {
            return Err(Error::InvalidConfig("grid needs at least one cell".into()));
        }
        let h = length / cells as f64;
        let mut edges: Vec<f64> = (0..=cells).map(|i| i as f64 * h).collect();
        // i * h can land an ulp away from the requested length.
        edges[cells] = length;
        let widths = edges.windows(2).map(|w| w[1] - w[0]).collect();
        Ok(Self {
            level,
            edges,
            widths,
        })
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn cell_count(&self) -> usize {
        self.widths.len()
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn length(&self) -> f64 {
        self.edges[self.edges.len() - 1]
    }

    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1]))
    }

    /// Index of the edge located exactly at `x`, if any.
    pub fn edge_index(&self, x: f64) -> Option<usize> {
        self.edges
            .binary_search_by(|e| e.partial_cmp(&x).expect("finite edges"))
            .ok()
    }

    /// Cell containing `x`; points on an interior edge belong to the cell on the right.
    pub fn cell_at(&self, x: f64) -> usize {
        let idx = self.edges.partition_point(|&e| e <= x);
        idx.saturating_sub(1).min(self.cell_count() - 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridHierarchy {
    grids: Vec<Grid>,
}

impl GridHierarchy {
    /// Builds `max_level + 1` nested uniform grids with `coarse_cells * 2^l` cells each.
    pub fn build(length: f64, coarse_cells: usize, max_level: usize) -> Result<Self> {
        if max_level > 24 {
            return Err(Error::InvalidConfig(format!(
                "max level {max_level} is unreasonably deep"
            )));
        }
        let grids = (0..=max_level)
            .map(|level| {
                Grid::uniform(level, length, coarse_cells * REFINEMENT_RATIO.pow(level as u32))
            })
            .collect::<Result<Vec<_>>>()?;
        let hierarchy = Self { grids };
        debug_assert!(hierarchy.is_nested());
        Ok(hierarchy)
    }

    pub fn grid(&self, level: usize) -> &Grid {
        &self.grids[level]
    }

    pub fn grids(&self) -> &[Grid] {
        &self.grids
    }

    pub fn max_level(&self) -> usize {
        self.grids.len() - 1
    }

    pub fn coarse(&self) -> &Grid {
        &self.grids[0]
    }

    pub fn length(&self) -> f64 {
        self.grids[0].length()
    }

    /// Every edge of `G_{l-1}` is bitwise present among the edges of `G_l`.
    pub fn is_nested(&self) -> bool {
        self.grids.windows(2).all(|pair| {
            let (coarse, fine) = (&pair[0], &pair[1]);
            fine.cell_count() == REFINEMENT_RATIO * coarse.cell_count()
                && coarse
                    .edges()
                    .iter()
                    .enumerate()
                    .all(|(i, &e)| fine.edges()[REFINEMENT_RATIO * i] == e)
        })
    }

    /// Sums child-cell track-length tallies down to `to_level`, one factor-2
    /// halving at a time. Boundary tallies and counters pass through.
    pub fn restrict_tallies(&self, fine: &ClosureTallies, to_level: usize) -> Result<ClosureTallies> {
        let from = fine.level;
        if from > self.max_level() || to_level > from {
            return Err(Error::InvalidConfig(format!(
                "cannot restrict tallies from level {from} to level {to_level}"
            )));
        }
        let expected = self.grid(from).cell_count();
        if fine.cell_count() != expected {
            return Err(Error::Dimension {
                expected,
                found: fine.cell_count(),
            });
        }
        let mut out = fine.clone();
        for level in (to_level..from).rev() {
            out = halve(&out, level);
        }
        Ok(out)
    }
}

fn halve(fine: &ClosureTallies, level: usize) -> ClosureTallies {
    let pair_sum = |v: &[f64]| -> Vec<f64> { v.chunks_exact(2).map(|c| c[0] + c[1]).collect() };
    ClosureTallies {
        level,
        weighted_mu2: pair_sum(&fine.weighted_mu2),
        weighted_length: pair_sum(&fine.weighted_length),
        ..fine.clone()
    }
}

/// Spatial support of a functional `P = ∫_A φ dx`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionSpec {
    WholeDomain,
    /// One-based cell index on the coarsest grid.
    CoarseCell(usize),
}

impl RegionSpec {
    /// Endpoints of the region, taken from `G_0` edges.
    pub fn bounds(&self, hierarchy: &GridHierarchy) -> Result<(f64, f64)> {
        let coarse = hierarchy.coarse();
        match *self {
            RegionSpec::WholeDomain => Ok((0.0, coarse.length())),
            RegionSpec::CoarseCell(i) if (1..=coarse.cell_count()).contains(&i) => {
                Ok((coarse.edges()[i - 1], coarse.edges()[i]))
            }
            RegionSpec::CoarseCell(i) => Err(Error::InvalidConfig(format!(
                "coarse cell {i} outside 1..={}",
                coarse.cell_count()
            ))),
        }
    }
}

/// `Σ φ_i Δx_i` over the cells of `grid` lying in `[lower, upper]`.
/// Both endpoints must coincide with grid edges.
pub fn integrate_flux(phi: &[f64], grid: &Grid, lower: f64, upper: f64) -> Result<f64> {
    if phi.len() != grid.cell_count() {
        return Err(Error::Dimension {
            expected: grid.cell_count(),
            found: phi.len(),
        });
    }
    let misaligned = || Error::Alignment {
        lower,
        upper,
        level: grid.level(),
    };
    let lo = grid.edge_index(lower).ok_or_else(misaligned)?;
    let hi = grid.edge_index(upper).ok_or_else(misaligned)?;
    if hi < lo {
        return Err(misaligned());
    }
    Ok(phi[lo..hi]
        .iter()
        .zip(&grid.widths()[lo..hi])
        .map(|(p, w)| p * w)
        .sum())
}

/// Integrates `phi` over a functional region of the hierarchy.
pub fn integrate_region(
    phi: &[f64],
    grid: &Grid,
    hierarchy: &GridHierarchy,
    region: RegionSpec,
) -> Result<f64> {
    let (lower, upper) = region.bounds(hierarchy)?;
    integrate_flux(phi, grid, lower, upper)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tallies(level: usize, num: Vec<f64>, den: Vec<f64>) -> ClosureTallies {
        let mut t = ClosureTallies::empty(level, num.len());
        t.weighted_mu2 = num;
        t.weighted_length = den;
        t
    }

    #[test]
    fn standard_hierarchy_cell_counts() {
        let h = GridHierarchy::build(1.0, 16, 3).unwrap();
        let counts: Vec<_> = h.grids().iter().map(Grid::cell_count).collect();
        assert_eq!(counts, vec![16, 32, 64, 128]);
        assert!(h.is_nested());
    }

    #[test]
    fn single_level_bisection() {
        let h = GridHierarchy::build(1.0, 2, 0).unwrap();
        assert_eq!(h.max_level(), 0);
        assert_eq!(h.grid(0).edges(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn widths_on_two_levels() {
        let h = GridHierarchy::build(2.0, 4, 1).unwrap();
        assert!(h.grid(0).widths().iter().all(|&w| w == 0.5));
        assert!(h.grid(1).widths().iter().all(|&w| w == 0.25));
    }

    #[test]
    fn rejects_bad_configuration() {
        assert!(matches!(
            GridHierarchy::build(0.0, 4, 1),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            GridHierarchy::build(-1.0, 4, 1),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            GridHierarchy::build(1.0, 0, 1),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn grid_widths_sum_to_length() {
        for &(x, n) in &[(1.0, 16), (0.3, 48), (7.1, 1000)] {
            let g = Grid::uniform(0, x, n).unwrap();
            let total: f64 = g.widths().iter().sum();
            assert!((total - x).abs() <= 1e-12 * x);
            assert!(g.widths().iter().all(|&w| w > 0.0));
            assert_eq!(g.edges()[0], 0.0);
            assert_eq!(*g.edges().last().unwrap(), x);
        }
    }

    #[test]
    fn restrict_sums_children() {
        let h = GridHierarchy::build(1.0, 1, 1).unwrap();
        let fine = tallies(1, vec![1.0, 1.0], vec![3.0, 3.0]);
        let coarse = h.restrict_tallies(&fine, 0).unwrap();
        assert_eq!(coarse.weighted_mu2, vec![2.0]);
        assert_eq!(coarse.weighted_length, vec![6.0]);
        assert_eq!(coarse.weighted_mu2[0] / coarse.weighted_length[0], 1.0 / 3.0);

        let fine = tallies(1, vec![0.2, 0.4], vec![0.6, 0.8]);
        let coarse = h.restrict_tallies(&fine, 0).unwrap();
        assert_eq!(coarse.weighted_mu2, vec![0.2 + 0.4]);
        assert_eq!(coarse.weighted_length, vec![0.6 + 0.8]);
    }

    #[test]
    fn restrict_keeps_boundary_tallies() {
        let h = GridHierarchy::build(1.0, 2, 1).unwrap();
        let mut fine = tallies(1, vec![1.0; 4], vec![2.0; 4]);
        fine.left.current = 3.0;
        fine.left.flux = 5.0;
        fine.right.current = 7.0;
        fine.right.flux = 11.0;
        fine.histories = 42;
        let coarse = h.restrict_tallies(&fine, 0).unwrap();
        assert_eq!(coarse.left, fine.left);
        assert_eq!(coarse.right, fine.right);
        assert_eq!(coarse.histories, 42);
        assert_eq!(coarse.level, 0);
    }

    #[test]
    fn restrict_rejects_wrong_length() {
        let h = GridHierarchy::build(1.0, 2, 1).unwrap();
        let fine = tallies(1, vec![1.0; 3], vec![2.0; 3]);
        assert!(matches!(
            h.restrict_tallies(&fine, 0),
            Err(Error::Dimension { expected: 4, found: 3 })
        ));
    }

    #[test]
    fn integrate_examples() {
        let h = GridHierarchy::build(1.0, 16, 2).unwrap();
        for g in h.grids() {
            let ones = vec![1.0; g.cell_count()];
            let whole = integrate_region(&ones, g, &h, RegionSpec::WholeDomain).unwrap();
            assert!((whole - 1.0).abs() < 1e-15);
            let cell = integrate_region(&ones, g, &h, RegionSpec::CoarseCell(8)).unwrap();
            assert!((cell - 1.0 / 16.0).abs() < 1e-15);
        }

        let g = Grid::uniform(0, 1.0, 2).unwrap();
        assert_eq!(integrate_flux(&[2.0, 4.0], &g, 0.0, 1.0).unwrap(), 3.0);
    }

    #[test]
    fn integrate_rejects_unresolvable_region() {
        let g = Grid::uniform(0, 1.0, 4).unwrap();
        assert!(matches!(
            integrate_flux(&[1.0; 4], &g, 0.0, 0.3),
            Err(Error::Alignment { .. })
        ));
        let h = GridHierarchy::build(1.0, 4, 0).unwrap();
        assert!(RegionSpec::CoarseCell(0).bounds(&h).is_err());
        assert!(RegionSpec::CoarseCell(5).bounds(&h).is_err());
    }

    #[test]
    fn cell_lookup() {
        let g = Grid::uniform(0, 1.0, 4).unwrap();
        assert_eq!(g.cell_at(0.0), 0);
        assert_eq!(g.cell_at(0.25), 1);
        assert_eq!(g.cell_at(0.9), 3);
        assert_eq!(g.cell_at(1.0), 3);
    }
}
