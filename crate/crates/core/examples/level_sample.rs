//! One hybrid realization on a level pair.
//!
//! A level-`l` draw runs the Monte Carlo sample on `G_l`, restricts the
//! tallies to `G_{l−1}` and solves the low-order system on both grids, so
//! the correction `P_l − P_{l−1}` shares all of its randomness.

use hybrid_mlmc::grids::{GridHierarchy, RegionSpec};
use hybrid_mlmc::mlmc::{draw_level_sample, CostMode, DrawSettings};
use hybrid_mlmc::transport::{SampleSeed, SlabProblem, TransportOptions};

fn main() -> hybrid_mlmc::Result<()> {
    let problem = SlabProblem::homogeneous(1.0, 1.0, 0.5, 1.0)?;
    let hierarchy = GridHierarchy::build(1.0, 16, 3)?;
    let settings = DrawSettings {
        histories: 10_000,
        region: RegionSpec::WholeDomain,
        cost_mode: CostMode::Proxy,
        transport: TransportOptions::default(),
    };
    for level in 0..=3 {
        let s = draw_level_sample(&problem, &hierarchy, level, SampleSeed::new(3, level, 0), &settings)?;
        match s.coarse {
            Some(coarse) => println!(
                "level {level}: P_l = {:.6}, P_l-1 = {coarse:.6}, dP = {:+.3e}, cost {}",
                s.fine, s.delta, s.cost
            ),
            None => println!("level {level}: P_0 = {:.6}, cost {}", s.fine, s.cost),
        }
    }
    Ok(())
}
