//! Finite-volume low-order quasidiffusion solver.
//!
//! Cell balance with face currents
//! `J_{i+1/2} = -(E_{i+1} φ_{i+1} - E_i φ_i) / (Σ_{t,i+1/2} Δx_{i+1/2})`
//! and boundary currents `J(0) = B_0 φ(0)`, `J(X) = B_X φ(X)`. The face flux
//! at each boundary is eliminated through a half-cell current
//! `J_{1/2} = -(E_1 φ_1 - E_b φ_b) / (Σ_{t,1} Δx_1 / 2)`, which keeps the
//! system tridiagonal. `E_b` is the surface Eddington factor when closures
//! come from tallies and the adjacent cell value otherwise.

use crate::error::{Error, Result};
use crate::grids::Grid;
use crate::transport::{
    estimate_boundary_factors, estimate_eddington, BoundaryFactors, ClosureTallies, SlabProblem,
    ISOTROPIC_EDDINGTON,
};

/// Eddington factors below this are treated as corrupt tallies.
pub const EDDINGTON_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Closures {
    pub eddington: Vec<f64>,
    /// `B_0 < 0`.
    pub left: f64,
    /// `B_X > 0`.
    pub right: f64,
    /// Boundary Eddington factors `E(0)`, `E(X)` used by the half-cell currents.
    pub left_eddington: f64,
    pub right_eddington: f64,
    /// Cells that fell back to the isotropic Eddington factor.
    pub void_cells: usize,
    pub boundary_fallbacks: usize,
}

impl Closures {
    /// Boundary Eddington factors taken from the adjacent cells.
    pub fn new(eddington: Vec<f64>, left: f64, right: f64) -> Self {
        Self {
            left_eddington: eddington.first().copied().unwrap_or(ISOTROPIC_EDDINGTON),
            right_eddington: eddington.last().copied().unwrap_or(ISOTROPIC_EDDINGTON),
            eddington,
            left,
            right,
            void_cells: 0,
            boundary_fallbacks: 0,
        }
    }

    /// Uniform closure, e.g. `E = 1/3, B = ∓1/2` for the diffusion limit.
    pub fn uniform(cells: usize, eddington: f64, boundary: BoundaryFactors) -> Self {
        Self::new(vec![eddington; cells], boundary.left, boundary.right)
    }

    pub fn from_tallies(tallies: &ClosureTallies) -> Self {
        let e = estimate_eddington(tallies);
        let b = estimate_boundary_factors(tallies);
        Self {
            void_cells: e.void_cells.len(),
            eddington: e.values,
            left: b.left,
            right: b.right,
            left_eddington: b.left_eddington,
            right_eddington: b.right_eddington,
            boundary_fallbacks: b.left_fallback as usize + b.right_fallback as usize,
        }
    }

    pub fn validate(&self, cells: usize) -> Result<()> {
        if self.eddington.len() != cells {
            return Err(Error::Dimension {
                expected: cells,
                found: self.eddington.len(),
            });
        }
        if let Some((i, e)) = self
            .eddington
            .iter()
            .enumerate()
            .find(|(_, &e)| !(EDDINGTON_FLOOR..=1.0).contains(&e))
        {
            return Err(Error::Assembly(format!(
                "Eddington factor {e} in cell {i} outside [{EDDINGTON_FLOOR}, 1]"
            )));
        }
        for (side, e) in [("left", self.left_eddington), ("right", self.right_eddington)] {
            if !(EDDINGTON_FLOOR..=1.0).contains(&e) {
                return Err(Error::Assembly(format!(
                    "{side} boundary Eddington factor {e} outside [{EDDINGTON_FLOOR}, 1]"
                )));
            }
        }
        if !(self.left < 0.0 && self.left.is_finite()) || !(self.right > 0.0 && self.right.is_finite()) {
            return Err(Error::Assembly(format!(
                "boundary factors must satisfy B_0 < 0 < B_X, got ({}, {})",
                self.left, self.right
            )));
        }
        Ok(())
    }
}

/// Cell-averaged material data on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CellProperties {
    pub sigma_t: Vec<f64>,
    pub sigma_a: Vec<f64>,
    pub source: Vec<f64>,
}

impl CellProperties {
    /// Overlap-weighted averages of the region data over each cell.
    pub fn from_problem(problem: &SlabProblem, grid: &Grid) -> Self {
        let n = grid.cell_count();
        let mut props = Self {
            sigma_t: vec![0.0; n],
            sigma_a: vec![0.0; n],
            source: vec![0.0; n],
        };
        let edges = grid.edges();
        for i in 0..n {
            let (lo, hi) = (edges[i], edges[i + 1]);
            let (mut st, mut sa, mut q) = (0.0, 0.0, 0.0);
            for r in problem.regions() {
                let overlap = hi.min(r.upper) - lo.max(r.lower);
                if overlap > 0.0 {
                    st += r.sigma_t * overlap;
                    sa += r.sigma_a() * overlap;
                    q += r.source * overlap;
                }
            }
            let w = grid.widths()[i];
            props.sigma_t[i] = st / w;
            props.sigma_a[i] = sa / w;
            props.source[i] = q / w;
        }
        props
    }

    pub fn uniform(cells: usize, sigma_t: f64, sigma_a: f64, source: f64) -> Self {
        Self {
            sigma_t: vec![sigma_t; cells],
            sigma_a: vec![sigma_a; cells],
            source: vec![source; cells],
        }
    }

    fn validate(&self, cells: usize) -> Result<()> {
        for v in [&self.sigma_t, &self.sigma_a, &self.source] {
            if v.len() != cells {
                return Err(Error::Dimension {
                    expected: cells,
                    found: v.len(),
                });
            }
        }
        if let Some(i) = self.sigma_t.iter().position(|&s| !(s > 0.0)) {
            return Err(Error::Assembly(format!("non-positive sigma_t in cell {i}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalSystem {
    /// `sub[0]` is unused.
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    /// `sup[n-1]` is unused.
    pub sup: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl TridiagonalSystem {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// `A x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut y = self.diag[i] * x[i];
                if i > 0 {
                    y += self.sub[i] * x[i - 1];
                }
                if i + 1 < n {
                    y += self.sup[i] * x[i + 1];
                }
                y
            })
            .collect()
    }

    /// `‖A x − b‖_∞`.
    pub fn residual_norm(&self, x: &[f64]) -> f64 {
        self.apply(x)
            .iter()
            .zip(&self.rhs)
            .map(|(ax, b)| (ax - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Coefficient `a = 2E / (Σ_t Δx)` of the half-cell current at a face, and
/// the resulting effective leakage coefficient `|B| a / (a + |B|)`.
/// `g = 2 / (Σ_t Δx)` of a boundary half cell.
fn half_cell_conductance(sigma_t: f64, width: f64) -> f64 {
    2.0 / (sigma_t * width)
}

/// Coefficient of `φ_cell` in the outgoing boundary current after eliminating
/// `φ_b` from `|B| φ_b = g (E_cell φ_cell − E_b φ_b)`.
fn boundary_leakage(cell_e: f64, face_e: f64, g: f64, factor: f64) -> f64 {
    let b = factor.abs();
    b * g * cell_e / (g * face_e + b)
}

/// Builds the LOQD system from explicit cell data.
pub fn assemble_cells(
    grid: &Grid,
    props: &CellProperties,
    closures: &Closures,
) -> Result<TridiagonalSystem> {
    let n = grid.cell_count();
    props.validate(n)?;
    closures.validate(n)?;
    let dx = grid.widths();
    let e = &closures.eddington;

    let mut sys = TridiagonalSystem {
        sub: vec![0.0; n],
        diag: vec![0.0; n],
        sup: vec![0.0; n],
        rhs: vec![0.0; n],
    };
    for (i, &h) in dx.iter().enumerate() {
        sys.diag[i] = props.sigma_a[i] * h;
        sys.rhs[i] = props.source[i] * h;
    }
    for i in 0..n.saturating_sub(1) {
        // Face i+1/2 between cells i and i+1.
        let st_face = (props.sigma_t[i] * dx[i] + props.sigma_t[i + 1] * dx[i + 1]) / (dx[i] + dx[i + 1]);
        let dx_face = 0.5 * (dx[i] + dx[i + 1]);
        let g = 1.0 / (st_face * dx_face);
        // J_{i+1/2} = -g (E_{i+1} φ_{i+1} - E_i φ_i) enters row i with +, row i+1 with −.
        sys.diag[i] += g * e[i];
        sys.sup[i] -= g * e[i + 1];
        sys.diag[i + 1] += g * e[i + 1];
        sys.sub[i + 1] -= g * e[i];
    }
    let g0 = half_cell_conductance(props.sigma_t[0], dx[0]);
    let gn = half_cell_conductance(props.sigma_t[n - 1], dx[n - 1]);
    sys.diag[0] += boundary_leakage(e[0], closures.left_eddington, g0, closures.left);
    sys.diag[n - 1] += boundary_leakage(e[n - 1], closures.right_eddington, gn, closures.right);
    Ok(sys)
}

pub fn assemble_system(
    problem: &SlabProblem,
    grid: &Grid,
    closures: &Closures,
) -> Result<TridiagonalSystem> {
    assemble_cells(grid, &CellProperties::from_problem(problem, grid), closures)
}

/// Thomas algorithm: one forward elimination and one back substitution.
pub fn solve_tridiagonal(system: &TridiagonalSystem) -> Result<Vec<f64>> {
    let n = system.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    for v in [&system.sub, &system.sup, &system.rhs] {
        if v.len() != n {
            return Err(Error::Dimension {
                expected: n,
                found: v.len(),
            });
        }
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut pivot = system.diag[0];
    if pivot == 0.0 || !pivot.is_finite() {
        return Err(Error::SingularSystem { row: 0 });
    }
    c[0] = system.sup[0] / pivot;
    d[0] = system.rhs[0] / pivot;
    for i in 1..n {
        pivot = system.diag[i] - system.sub[i] * c[i - 1];
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(Error::SingularSystem { row: i });
        }
        c[i] = system.sup[i] / pivot;
        d[i] = (system.rhs[i] - system.sub[i] * d[i - 1]) / pivot;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluxSolution {
    pub level: usize,
    pub phi: Vec<f64>,
    /// Eliminated face fluxes `φ(0)`, `φ(X)`.
    pub boundary_left: f64,
    pub boundary_right: f64,
}

impl FluxSolution {
    /// Outgoing currents `(J(0), J(X)) = (B_0 φ(0), B_X φ(X))`.
    pub fn boundary_currents(&self, closures: &Closures) -> (f64, f64) {
        (closures.left * self.boundary_left, closures.right * self.boundary_right)
    }
}

pub fn solve_cells(grid: &Grid, props: &CellProperties, closures: &Closures) -> Result<FluxSolution> {
    let system = assemble_cells(grid, props, closures)?;
    let phi = solve_tridiagonal(&system)?;
    let n = phi.len();
    let dx = grid.widths();
    let e = &closures.eddington;
    // B φ_b = -g (E_cell φ_cell - E_b φ_b) at x = 0, mirrored at x = X.
    let g0 = half_cell_conductance(props.sigma_t[0], dx[0]);
    let gn = half_cell_conductance(props.sigma_t[n - 1], dx[n - 1]);
    Ok(FluxSolution {
        level: grid.level(),
        boundary_left: g0 * e[0] * phi[0] / (g0 * closures.left_eddington - closures.left),
        boundary_right: gn * e[n - 1] * phi[n - 1] / (gn * closures.right_eddington + closures.right),
        phi,
    })
}

pub fn solve_loqd(problem: &SlabProblem, grid: &Grid, closures: &Closures) -> Result<FluxSolution> {
    solve_cells(grid, &CellProperties::from_problem(problem, grid), closures)
}

/// Relative global balance defect: absorption plus net leakage minus source,
/// divided by the source (absolute when the source vanishes).
pub fn balance_residual_cells(
    solution: &FluxSolution,
    grid: &Grid,
    props: &CellProperties,
    closures: &Closures,
) -> f64 {
    let dx = grid.widths();
    let absorption: f64 = (0..dx.len()).map(|i| props.sigma_a[i] * solution.phi[i] * dx[i]).sum();
    let source: f64 = (0..dx.len()).map(|i| props.source[i] * dx[i]).sum();
    let (j0, jx) = solution.boundary_currents(closures);
    let defect = (absorption + jx - j0 - source).abs();
    if source > 0.0 {
        defect / source
    } else {
        defect
    }
}

pub fn balance_residual(
    solution: &FluxSolution,
    problem: &SlabProblem,
    grid: &Grid,
    closures: &Closures,
) -> f64 {
    balance_residual_cells(solution, grid, &CellProperties::from_problem(problem, grid), closures)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::MaterialRegion;

    fn isotropic(cells: usize) -> Closures {
        Closures::uniform(cells, 1.0 / 3.0, BoundaryFactors::isotropic())
    }

    #[test]
    fn identity_system() {
        let sys = TridiagonalSystem {
            sub: vec![0.0; 3],
            diag: vec![1.0; 3],
            sup: vec![0.0; 3],
            rhs: vec![4.0, -2.0, 7.5],
        };
        assert_eq!(solve_tridiagonal(&sys).unwrap(), vec![4.0, -2.0, 7.5]);
    }

    #[test]
    fn three_by_three_hand_elimination() {
        let sys = TridiagonalSystem {
            sub: vec![0.0, -1.0, -1.0],
            diag: vec![2.0; 3],
            sup: vec![-1.0, -1.0, 0.0],
            rhs: vec![1.0, 0.0, 1.0],
        };
        let x = solve_tridiagonal(&sys).unwrap();
        for v in x {
            assert!((v - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_pivot_is_singular() {
        let sys = TridiagonalSystem {
            sub: vec![0.0, 1.0],
            diag: vec![1.0, 1.0],
            sup: vec![1.0, 0.0],
            rhs: vec![1.0, 1.0],
        };
        assert!(matches!(solve_tridiagonal(&sys), Err(Error::SingularSystem { row: 1 })));
    }

    #[test]
    fn two_cell_coupling_coefficient() {
        let g = Grid::uniform(0, 1.0, 2).unwrap();
        let props = CellProperties::uniform(2, 1.0, 1.0, 1.0);
        let e = 0.4;
        let closures = Closures::uniform(2, e, BoundaryFactors::isotropic());
        let sys = assemble_cells(&g, &props, &closures).unwrap();
        // Σ_{t,3/2} = 1, Δx_{3/2} = 0.5.
        assert!((sys.sup[0] + e / 0.5).abs() < 1e-15);
        assert!((sys.sub[1] + e / 0.5).abs() < 1e-15);
    }

    #[test]
    fn isotropic_stencil_is_diffusion_stencil() {
        let problem = SlabProblem::new(vec![
            MaterialRegion::with_scattering_ratio(0.0, 0.5, 1.0, 0.0, 1.0),
            MaterialRegion::with_scattering_ratio(0.5, 1.0, 3.0, 0.0, 1.0),
        ])
        .unwrap();
        let g = Grid::uniform(0, 1.0, 8).unwrap();
        let sys = assemble_system(&problem, &g, &isotropic(8)).unwrap();
        let props = CellProperties::from_problem(&problem, &g);
        let h = 1.0 / 8.0;
        for i in 0..7 {
            // Harmonic-free diffusion stencil with D = 1/(3 Σ_t) at the face.
            let st_face = 0.5 * (props.sigma_t[i] + props.sigma_t[i + 1]);
            let d_face = 1.0 / (3.0 * st_face);
            assert!((sys.sup[i] + d_face / h).abs() < 1e-13);
            assert!((sys.sub[i + 1] + d_face / h).abs() < 1e-13);
        }
    }

    #[test]
    fn constant_flux_solves_interior_rows() {
        let g = Grid::uniform(0, 1.0, 10).unwrap();
        let props = CellProperties::uniform(10, 2.0, 0.0, 0.0);
        let sys = assemble_cells(&g, &props, &Closures::uniform(10, 0.4, BoundaryFactors::isotropic()))
            .unwrap();
        let ax = sys.apply(&[1.0; 10]);
        for v in &ax[1..9] {
            assert!(v.abs() < 1e-14);
        }
    }

    #[test]
    fn zero_source_gives_zero_flux() {
        let p = SlabProblem::homogeneous(1.0, 1.0, 0.5, 0.0).unwrap();
        let g = Grid::uniform(0, 1.0, 16).unwrap();
        let c = isotropic(16);
        let s = solve_loqd(&p, &g, &c).unwrap();
        assert!(s.phi.iter().all(|&v| v == 0.0));
        assert_eq!(balance_residual(&s, &p, &g, &c), 0.0);
    }

    #[test]
    fn two_cell_balance_by_hand() {
        let g = Grid::uniform(0, 1.0, 2).unwrap();
        let props = CellProperties::uniform(2, 1.0, 0.5, 1.0);
        let c = isotropic(2);
        let s = solve_cells(&g, &props, &c).unwrap();
        // Symmetric problem: both cells equal; with a = 2(1/3)/0.5 = 4/3,
        // leakage coefficient (1/2)(4/3)/(4/3 + 1/2) = 4/11 per face.
        // Row: 0.5 * 0.5 φ + 4/11 φ = 0.5  ->  φ = 0.5 / (0.25 + 4/11).
        let expected = 0.5 / (0.25 + 4.0 / 11.0);
        assert!((s.phi[0] - expected).abs() < 1e-14);
        assert!((s.phi[1] - expected).abs() < 1e-14);
        assert!(balance_residual_cells(&s, &g, &props, &c) < 1e-12);
    }

    #[test]
    fn surface_eddington_one_cell_by_hand() {
        let g = Grid::uniform(0, 1.0, 1).unwrap();
        let props = CellProperties::uniform(1, 1.0, 1.0, 1.0);
        let mut c = Closures::new(vec![0.4], -0.5, 0.5);
        c.left_eddington = 0.2;
        c.right_eddington = 0.2;
        // g = 2; leakage 0.5 * 2 * 0.4 / (2 * 0.2 + 0.5) = 4/9 per face.
        let s = solve_cells(&g, &props, &c).unwrap();
        assert!((s.phi[0] - 9.0 / 17.0).abs() < 1e-15);
        assert!((s.boundary_left - 8.0 / 17.0).abs() < 1e-15);
        assert!((s.boundary_right - 8.0 / 17.0).abs() < 1e-15);
        assert!(balance_residual_cells(&s, &g, &props, &c) < 1e-15);
    }

    #[test]
    fn assembly_rejects_bad_closures() {
        let g = Grid::uniform(0, 1.0, 4).unwrap();
        let props = CellProperties::uniform(4, 1.0, 0.5, 1.0);
        let mut c = isotropic(4);
        c.eddington[2] = 1e-9;
        assert!(matches!(assemble_cells(&g, &props, &c), Err(Error::Assembly(_))));
        let mut c = isotropic(4);
        c.left = 0.5;
        assert!(matches!(assemble_cells(&g, &props, &c), Err(Error::Assembly(_))));
        let c = isotropic(3);
        assert!(matches!(assemble_cells(&g, &props, &c), Err(Error::Dimension { .. })));
        let bad = CellProperties::uniform(4, 0.0, 0.0, 1.0);
        assert!(matches!(assemble_cells(&g, &bad, &isotropic(4)), Err(Error::Assembly(_))));
    }

    #[test]
    fn straddling_cells_average_material_data() {
        let p = SlabProblem::new(vec![
            MaterialRegion::with_scattering_ratio(0.0, 0.3, 1.0, 0.5, 1.0),
            MaterialRegion::with_scattering_ratio(0.3, 1.0, 3.0, 0.5, 0.0),
        ])
        .unwrap();
        let g = Grid::uniform(0, 1.0, 2).unwrap();
        let props = CellProperties::from_problem(&p, &g);
        assert!((props.sigma_t[0] - (0.3 * 1.0 + 0.2 * 3.0) / 0.5).abs() < 1e-14);
        assert!((props.source[0] - 0.3 / 0.5).abs() < 1e-14);
        assert_eq!(props.source[1], 0.0);
    }
}
