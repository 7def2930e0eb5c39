//! Finite-volume low-order solve in the diffusion limit.
//!
//! With `E = 1/3` and `B = ∓1/2` the low-order equation reduces to
//! diffusion with Marshak-type boundaries, whose solution is
//! `Q/Σ_a + A cosh(κ (x − X/2))`. The printed error ratio approaches 4 per
//! halving of the mesh.

use hybrid_mlmc::grids::Grid;
use hybrid_mlmc::loqd::{balance_residual_cells, solve_cells, CellProperties, Closures};
use hybrid_mlmc::transport::BoundaryFactors;

fn main() -> hybrid_mlmc::Result<()> {
    let (sigma_t, sigma_a, q) = (1.0f64, 0.1f64, 1.0f64);
    let kappa = (3.0 * sigma_t * sigma_a).sqrt();
    let amplitude = -(q / (2.0 * sigma_a)) / (kappa * (0.5 * kappa).sinh() / (3.0 * sigma_t) + 0.5 * (0.5 * kappa).cosh());

    let mut previous: Option<f64> = None;
    for cells in [8, 16, 32, 64, 128] {
        let grid = Grid::uniform(0, 1.0, cells)?;
        let props = CellProperties::uniform(cells, sigma_t, sigma_a, q);
        let closures = Closures::uniform(cells, 1.0 / 3.0, BoundaryFactors::isotropic());
        let solution = solve_cells(&grid, &props, &closures)?;
        let e = grid.edges();
        let error = (0..cells)
            .map(|i| {
                let avg = ((kappa * (e[i + 1] - 0.5)).sinh() - (kappa * (e[i] - 0.5)).sinh()) / (kappa * grid.widths()[i]);
                (solution.phi[i] - (q / sigma_a + amplitude * avg)).abs()
            })
            .fold(0.0, f64::max);
        let ratio = previous.map_or(String::new(), |p| format!("  ratio {:.3}", p / error));
        println!(
            "I = {cells:4}  max error {error:.3e}  balance {:.1e}{ratio}",
            balance_residual_cells(&solution, &grid, &props, &closures)
        );
        previous = Some(error);
    }
    Ok(())
}
