//! Sample allocation and the telescoping identity.
//!
//! Targets `N_l = ⌈2 ε⁻² √(V_l/C_l) Σ √(V_k C_k)⌉` for a hand-sized case,
//! then a run of the deterministic diffusion sampler: every correction is
//! an exact grid difference, so the combined estimate equals the finest
//! functional to the last bit.

use hybrid_mlmc::grids::{GridHierarchy, RegionSpec};
use hybrid_mlmc::mlmc::{optimal_cost, optimal_samples, run_mlmc, CostMode, FixedClosureSampler, MlmcConfig};
use hybrid_mlmc::transport::SlabProblem;

fn main() -> hybrid_mlmc::Result<()> {
    let (v, c) = ([4.0, 1.0], [1.0, 4.0]);
    println!("targets {:?}, optimal cost {}", optimal_samples(&v, &c, 1.0)?, optimal_cost(&v, &c, 1.0));
    for eps in [1e-1, 5e-2, 1e-2] {
        let v = [1.0, 0.25, 0.0625, 0.015625];
        let c = [1.0, 2.0, 4.0, 8.0];
        println!("eps {eps:>5}: {:?}", optimal_samples(&v, &c, eps)?);
    }

    let sampler = FixedClosureSampler::diffusion(
        SlabProblem::homogeneous(1.0, 1.0, 0.5, 1.0)?,
        GridHierarchy::build(1.0, 16, 3)?,
        RegionSpec::WholeDomain,
    );
    let config = MlmcConfig {
        cost_mode: CostMode::Proxy,
        ..MlmcConfig::default()
    };
    let report = run_mlmc(&sampler, &config)?;
    let fine = sampler.functional(3)?;
    println!("combined {:.17}\nfinest   {fine:.17}", report.combined_estimate);
    println!("bitwise equal: {}", report.combined_estimate.to_bits() == fine.to_bits());
    Ok(())
}
