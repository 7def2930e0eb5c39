//! Nested grids and tally restriction.
//!
//! Builds a three-level hierarchy on a unit slab, runs one Monte Carlo sample
//! on the finest grid and restricts its track-length sums level by level.
//! The coarse Eddington factors are the track-length weighted averages of
//! their children, so restriction never needs a second transport run.

use hybrid_mlmc::grids::{integrate_region, GridHierarchy, RegionSpec};
use hybrid_mlmc::transport::{estimate_eddington, simulate_sample, SampleSeed, SlabProblem, TransportOptions};

fn main() -> hybrid_mlmc::Result<()> {
    let hierarchy = GridHierarchy::build(1.0, 4, 3)?;
    for grid in hierarchy.grids() {
        println!("level {}: {:3} cells, h = {}", grid.level(), grid.cell_count(), grid.widths()[0]);
    }
    assert!(hierarchy.is_nested());

    let problem = SlabProblem::homogeneous(1.0, 1.0, 0.7, 1.0)?;
    let fine = simulate_sample(&problem, hierarchy.grid(3), 20_000, SampleSeed::new(1, 3, 0), &TransportOptions::default())?;

    for level in (0..=3).rev() {
        let tallies = hierarchy.restrict_tallies(&fine, level)?;
        let e = estimate_eddington(&tallies).values;
        let shown: Vec<String> = e.iter().take(4).map(|v| format!("{v:.4}")).collect();
        println!("level {level} E (first cells): {}", shown.join(" "));
    }

    // The functional of a piecewise-constant field only depends on the region.
    let grid = hierarchy.grid(2);
    let ones = vec![1.0; grid.cell_count()];
    for region in [RegionSpec::WholeDomain, RegionSpec::CoarseCell(2)] {
        println!("{region:?}: integral of 1 = {}", integrate_region(&ones, grid, &hierarchy, region)?);
    }
    Ok(())
}
