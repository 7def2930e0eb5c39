//! Monte Carlo estimates of the quasidiffusion closures.
//!
//! One sample of `K` histories with implicit capture gives a cell-wise
//! Eddington factor profile, the boundary factors `B_0`, `B_X` and the
//! surface Eddington factors used by the low-order boundary rows. Thin
//! slabs are far from isotropic: `E` drops below 1/3 where grazing
//! directions dominate.

use hybrid_mlmc::grids::Grid;
use hybrid_mlmc::transport::{
    estimate_boundary_factors, estimate_eddington, simulate_sample, MaterialRegion, SampleSeed, SlabProblem,
    TransportOptions,
};

fn main() -> hybrid_mlmc::Result<()> {
    let problem = SlabProblem::new(vec![
        MaterialRegion::with_scattering_ratio(0.0, 0.5, 1.0, 0.9, 1.0),
        MaterialRegion::with_scattering_ratio(0.5, 1.0, 1.0, 0.1, 1.0),
    ])?;
    let grid = Grid::uniform(0, 1.0, 16)?;
    let options = TransportOptions {
        parallel: true,
        ..TransportOptions::default()
    };
    let tallies = simulate_sample(&problem, &grid, 200_000, SampleSeed::new(42, 0, 0), &options)?;

    let e = estimate_eddington(&tallies);
    for (x, v) in grid.centers().zip(&e.values) {
        println!("x = {x:.4}  E = {v:.4}");
    }
    let b = estimate_boundary_factors(&tallies);
    println!("B_0 = {:.4}, B_X = {:.4}", b.left, b.right);
    println!("E(0) = {:.4}, E(X) = {:.4}", b.left_eddington, b.right_eddington);
    println!("{} segments over {} histories", tallies.segments, tallies.histories);
    Ok(())
}
