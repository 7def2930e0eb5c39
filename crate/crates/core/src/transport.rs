//! Analog-geometry Monte Carlo in a 1-D slab with implicit capture.
//!
//! One call to [`simulate_sample`] runs `K` source histories and returns the
//! track-length and surface-crossing sums from which the Eddington and
//! boundary factors of a single hybrid realization are formed.

use std::time::Instant;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grids::Grid;

/// Eddington factor of an isotropic angular flux.
pub const ISOTROPIC_EDDINGTON: f64 = 1.0 / 3.0;

/// Half-range isotropic boundary factor magnitude.
pub const ISOTROPIC_BOUNDARY_FACTOR: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialRegion {
    pub lower: f64,
    pub upper: f64,
    pub sigma_t: f64,
    pub sigma_s: f64,
    pub source: f64,
}

impl MaterialRegion {
    pub fn with_scattering_ratio(
        lower: f64,
        upper: f64,
        sigma_t: f64,
        scattering_ratio: f64,
        source: f64,
    ) -> Self {
        Self {
            lower,
            upper,
            sigma_t,
            sigma_s: scattering_ratio * sigma_t,
            source,
        }
    }

    pub fn sigma_a(&self) -> f64 {
        self.sigma_t - self.sigma_s
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Piecewise-constant slab on `[0, X]` with vacuum on both faces.
#[derive(Debug, Clone, PartialEq)]
pub struct SlabProblem {
    length: f64,
    regions: Vec<MaterialRegion>,
    total_source: f64,
}

impl SlabProblem {
    pub fn new(regions: Vec<MaterialRegion>) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        let (Some(first), Some(last)) = (regions.first(), regions.last()) else {
            return bad("slab needs at least one region".into());
        };
        if first.lower != 0.0 {
            return bad(format!("first region starts at {} instead of 0", first.lower));
        }
        let length = last.upper;
        for pair in regions.windows(2) {
            if pair[0].upper != pair[1].lower {
                return bad(format!(
                    "regions leave a gap or overlap at {} / {}",
                    pair[0].upper, pair[1].lower
                ));
            }
        }
        for (i, r) in regions.iter().enumerate() {
            if !(r.upper > r.lower) {
                return bad(format!("region {i} has non-positive width"));
            }
            if !(r.sigma_t > 0.0) || !r.sigma_t.is_finite() {
                return bad(format!("region {i}: sigma_t must be positive"));
            }
            if !(0.0..=r.sigma_t).contains(&r.sigma_s) {
                return bad(format!("region {i}: need 0 <= sigma_s <= sigma_t"));
            }
            if !(r.source >= 0.0) || !r.source.is_finite() {
                return bad(format!("region {i}: source must be non-negative"));
            }
        }
        let total_source = regions.iter().map(|r| r.source * r.width()).sum();
        Ok(Self {
            length,
            regions,
            total_source,
        })
    }

    /// Single homogeneous region.
    pub fn homogeneous(length: f64, sigma_t: f64, scattering_ratio: f64, source: f64) -> Result<Self> {
        Self::new(vec![MaterialRegion::with_scattering_ratio(
            0.0,
            length,
            sigma_t,
            scattering_ratio,
            source,
        )])
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn regions(&self) -> &[MaterialRegion] {
        &self.regions
    }

    /// `∫ Q dx` over the slab.
    pub fn total_source(&self) -> f64 {
        self.total_source
    }

    /// Region containing `x`; interfaces belong to the region on the right.
    pub fn region_at(&self, x: f64) -> usize {
        let idx = self.regions.partition_point(|r| r.upper <= x);
        idx.min(self.regions.len() - 1)
    }

    /// Region a particle at `x` moving along `mu` is about to enter.
    fn region_ahead(&self, x: f64, mu: f64) -> usize {
        let r = self.region_at(x);
        if mu < 0.0 && r > 0 && self.regions[r].lower == x {
            r - 1
        } else {
            r
        }
    }

    /// Material interfaces strictly inside the slab.
    pub fn interfaces(&self) -> impl Iterator<Item = f64> + '_ {
        self.regions[1..].iter().map(|r| r.lower)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub x: f64,
    pub mu: f64,
    pub weight: f64,
}

/// Outgoing surface-crossing sums at one face.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundaryTally {
    /// Σ w over outgoing crossings.
    pub current: f64,
    /// Σ w / |μ| over outgoing crossings.
    pub flux: f64,
    /// Σ w |μ| over outgoing crossings.
    #[serde(default)]
    pub second_moment: f64,
    pub crossings: u64,
}

impl BoundaryTally {
    fn score(&mut self, weight: f64, mu: f64) {
        self.current += weight;
        self.flux += weight / mu.abs();
        self.second_moment += weight * mu.abs();
        self.crossings += 1;
    }

    fn merge(&mut self, other: &BoundaryTally) {
        self.current += other.current;
        self.flux += other.flux;
        self.second_moment += other.second_moment;
        self.crossings += other.crossings;
    }
}

/// Raw sums from one Monte Carlo sample on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosureTallies {
    pub level: usize,
    /// Σ μ² w ℓ per cell.
    pub weighted_mu2: Vec<f64>,
    /// Σ w ℓ per cell.
    pub weighted_length: Vec<f64>,
    pub left: BoundaryTally,
    pub right: BoundaryTally,
    pub histories: u64,
    /// Flight segments processed; the machine-independent cost proxy.
    pub segments: u64,
    pub elapsed_seconds: f64,
}

impl ClosureTallies {
    pub fn empty(level: usize, cells: usize) -> Self {
        Self {
            level,
            weighted_mu2: vec![0.0; cells],
            weighted_length: vec![0.0; cells],
            left: BoundaryTally::default(),
            right: BoundaryTally::default(),
            histories: 0,
            segments: 0,
            elapsed_seconds: 0.0,
        }
    }

    pub fn cell_count(&self) -> usize {
        self.weighted_length.len()
    }

    /// Adds `other` cell by cell. Addition order is the caller's responsibility.
    pub fn merge(&mut self, other: &ClosureTallies) {
        debug_assert_eq!(self.cell_count(), other.cell_count());
        for (a, b) in self.weighted_mu2.iter_mut().zip(&other.weighted_mu2) {
            *a += b;
        }
        for (a, b) in self.weighted_length.iter_mut().zip(&other.weighted_length) {
            *a += b;
        }
        self.left.merge(&other.left);
        self.right.merge(&other.right);
        self.histories += other.histories;
        self.segments += other.segments;
    }
}

/// Identifies the random stream of realization `ω_{n,l}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SampleSeed {
    pub master: u64,
    pub level: u64,
    pub replicate: u64,
}

impl SampleSeed {
    pub fn new(master: u64, level: usize, replicate: u64) -> Self {
        Self {
            master,
            level: level as u64,
            replicate,
        }
    }

    /// Generator for one history: the seed triple keys ChaCha, the history
    /// index selects the stream.
    pub fn history_rng(&self, history: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.master.to_le_bytes());
        key[8..16].copy_from_slice(&self.level.to_le_bytes());
        key[16..24].copy_from_slice(&self.replicate.to_le_bytes());
        key[24..].copy_from_slice(b"qdmlmc01");
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(history);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransportOptions {
    /// Below this weight a history plays Russian roulette.
    pub weight_cutoff: f64,
    pub survival_probability: f64,
    /// Histories per private accumulator; fixed so that results do not
    /// depend on the worker count.
    pub chunk_size: u64,
    pub parallel: bool,
}

impl Default for TransportOptions {
    fn default() -> Self {
        Self {
            weight_cutoff: 1e-3,
            survival_probability: 0.5,
            chunk_size: 256,
            parallel: false,
        }
    }
}

impl TransportOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.weight_cutoff > 0.0 && self.weight_cutoff < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "weight cutoff must lie in (0, 1), got {}",
                self.weight_cutoff
            )));
        }
        if !(self.survival_probability > 0.0 && self.survival_probability <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "survival probability must lie in (0, 1], got {}",
                self.survival_probability
            )));
        }
        if self.chunk_size == 0 {
            return Err(Error::InvalidConfig("chunk size must be positive".into()));
        }
        Ok(())
    }
}

/// Runs `histories` source particles through `problem`, tallying on `grid`.
///
/// Histories are grouped in fixed chunks of `options.chunk_size`; each chunk
/// accumulates privately in history order and chunks are merged in index
/// order, so the sums are bit-identical whether or not chunks run in parallel.
pub fn simulate_sample(
    problem: &SlabProblem,
    grid: &Grid,
    histories: u64,
    seed: SampleSeed,
    options: &TransportOptions,
) -> Result<ClosureTallies> {
    if histories == 0 {
        return Err(Error::InvalidConfig("a sample needs at least one history".into()));
    }
    if grid.length() != problem.length() {
        return Err(Error::InvalidConfig(format!(
            "grid spans [0, {}] but the slab spans [0, {}]",
            grid.length(),
            problem.length()
        )));
    }
    if !(problem.total_source() > 0.0) {
        return Err(Error::InvalidConfig("total source is zero".into()));
    }
    options.validate()?;

    let start = Instant::now();
    let chunk = options.chunk_size;
    let chunks = histories.div_ceil(chunk);
    let run_chunk = |c: u64| {
        let mut tallies = ClosureTallies::empty(grid.level(), grid.cell_count());
        let end = ((c + 1) * chunk).min(histories);
        for h in c * chunk..end {
            let mut rng = seed.history_rng(h);
            let particle = sample_source(problem, &mut rng);
            track_history(problem, grid, particle, &mut rng, &mut tallies, options);
            tallies.histories += 1;
        }
        tallies
    };
    let parts: Vec<ClosureTallies> = if options.parallel {
        (0..chunks).into_par_iter().map(run_chunk).collect()
    } else {
        (0..chunks).map(run_chunk).collect()
    };
    let mut total = ClosureTallies::empty(grid.level(), grid.cell_count());
    for part in &parts {
        total.merge(part);
    }
    total.elapsed_seconds = start.elapsed().as_secs_f64();
    Ok(total)
}

fn isotropic_direction<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let mu = 2.0 * rng.random::<f64>() - 1.0;
        if mu != 0.0 {
            return mu;
        }
    }
}

/// Draws a source particle with position density `Q(x) / ∫Q` and isotropic
/// direction. Weight is 1; closures are ratios so no normalization is needed.
///
/// The problem must have a positive total source.
pub fn sample_source<R: Rng + ?Sized>(problem: &SlabProblem, rng: &mut R) -> Particle {
    let target = rng.random::<f64>() * problem.total_source();
    let mut acc = 0.0;
    let mut chosen = None;
    for (i, r) in problem.regions().iter().enumerate() {
        let s = r.source * r.width();
        if s > 0.0 {
            chosen = Some(i);
            if target < acc + s {
                break;
            }
        }
        acc += s;
    }
    let region = &problem.regions()[chosen.expect("positive total source")];
    let x = (region.lower + rng.random::<f64>() * region.width()).min(region.upper);
    Particle {
        x,
        mu: isotropic_direction(rng),
        weight: 1.0,
    }
}

/// Follows one particle to leakage or roulette death, scoring track-length
/// sums on every traversed cell and outgoing crossings at the faces.
/// Returns the number of flight segments processed.
pub fn track_history<R: Rng + ?Sized>(
    problem: &SlabProblem,
    grid: &Grid,
    mut particle: Particle,
    rng: &mut R,
    tallies: &mut ClosureTallies,
    options: &TransportOptions,
) -> u64 {
    let edges = grid.edges();
    let regions = problem.regions();
    let length = problem.length();
    let mut segments = 0u64;

    let mut cell = cell_ahead(grid, particle.x, particle.mu);
    let mut region = problem.region_ahead(particle.x, particle.mu);

    'history: loop {
        // Optical distance to the next collision.
        let mut tau = -(1.0 - rng.random::<f64>()).ln();
        let mu = particle.mu;
        let w = particle.weight;
        let mu2w = mu * mu * w;

        loop {
            let mat = &regions[region];
            let (cell_face, region_face) = if mu > 0.0 {
                (edges[cell + 1], mat.upper)
            } else {
                (edges[cell], mat.lower)
            };
            let face = if mu > 0.0 {
                cell_face.min(region_face)
            } else {
                cell_face.max(region_face)
            };
            let distance = (face - particle.x) / mu;
            let optical = mat.sigma_t * distance;
            segments += 1;

            if tau < optical {
                let flight = tau / mat.sigma_t;
                tallies.weighted_mu2[cell] += mu2w * flight;
                tallies.weighted_length[cell] += w * flight;
                particle.x = (particle.x + mu * flight).clamp(edges[cell], edges[cell + 1]);
                break;
            }

            tallies.weighted_mu2[cell] += mu2w * distance;
            tallies.weighted_length[cell] += w * distance;
            tau -= optical;
            particle.x = face;

            if mu > 0.0 && face == length {
                tallies.right.score(w, mu);
                break 'history;
            }
            if mu < 0.0 && face == 0.0 {
                tallies.left.score(w, mu);
                break 'history;
            }
            if face == cell_face {
                cell = if mu > 0.0 { cell + 1 } else { cell - 1 };
            }
            if face == region_face {
                region = if mu > 0.0 { region + 1 } else { region - 1 };
            }
        }

        if !collide(&mut particle, &regions[region], rng, options) {
            break;
        }
        cell = cell_ahead(grid, particle.x, particle.mu);
        region = problem.region_ahead(particle.x, particle.mu);
    }
    tallies.segments += segments;
    segments
}

/// Implicit capture at a collision site: the weight is scaled by `c`, light
/// particles play Russian roulette, survivors scatter isotropically.
/// Returns `false` when the history ends.
pub fn collide<R: Rng + ?Sized>(
    particle: &mut Particle,
    material: &MaterialRegion,
    rng: &mut R,
    options: &TransportOptions,
) -> bool {
    particle.weight *= material.sigma_s / material.sigma_t;
    if particle.weight < options.weight_cutoff {
        if particle.weight == 0.0 || rng.random::<f64>() >= options.survival_probability {
            particle.weight = 0.0;
            return false;
        }
        particle.weight /= options.survival_probability;
    }
    particle.mu = isotropic_direction(rng);
    true
}

fn cell_ahead(grid: &Grid, x: f64, mu: f64) -> usize {
    let c = grid.cell_at(x);
    if mu < 0.0 && c > 0 && grid.edges()[c] == x {
        c - 1
    } else {
        c
    }
}

/// Cell-wise Eddington factors with the isotropic fallback on void cells.
#[derive(Debug, Clone, PartialEq)]
pub struct EddingtonEstimate {
    pub values: Vec<f64>,
    pub void_cells: Vec<usize>,
}

pub fn estimate_eddington(tallies: &ClosureTallies) -> EddingtonEstimate {
    let mut void_cells = Vec::new();
    let values = tallies
        .weighted_mu2
        .iter()
        .zip(&tallies.weighted_length)
        .enumerate()
        .map(|(i, (&num, &den))| {
            if den > 0.0 {
                num / den
            } else {
                void_cells.push(i);
                ISOTROPIC_EDDINGTON
            }
        })
        .collect();
    EddingtonEstimate { values, void_cells }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryFactors {
    /// `B_0`, negative.
    pub left: f64,
    /// `B_X`, positive.
    pub right: f64,
    /// Eddington factor of the outgoing flux at `x = 0`.
    pub left_eddington: f64,
    /// Eddington factor of the outgoing flux at `x = X`.
    pub right_eddington: f64,
    pub left_fallback: bool,
    pub right_fallback: bool,
}

impl BoundaryFactors {
    pub fn isotropic() -> Self {
        Self {
            left: -ISOTROPIC_BOUNDARY_FACTOR,
            right: ISOTROPIC_BOUNDARY_FACTOR,
            left_eddington: ISOTROPIC_EDDINGTON,
            right_eddington: ISOTROPIC_EDDINGTON,
            left_fallback: false,
            right_fallback: false,
        }
    }
}

/// Ratio of outgoing current to outgoing flux at each face, and the surface
/// Eddington factor `Σ w|μ| / Σ w/|μ|`. Isotropic values when a face saw no
/// crossings.
pub fn estimate_boundary_factors(tallies: &ClosureTallies) -> BoundaryFactors {
    let ratio = |t: &BoundaryTally| (t.flux > 0.0).then(|| t.current / t.flux);
    let surface_e = |t: &BoundaryTally| {
        if t.flux > 0.0 {
            t.second_moment / t.flux
        } else {
            ISOTROPIC_EDDINGTON
        }
    };
    let left = ratio(&tallies.left);
    let right = ratio(&tallies.right);
    BoundaryFactors {
        left: -left.unwrap_or(ISOTROPIC_BOUNDARY_FACTOR),
        right: right.unwrap_or(ISOTROPIC_BOUNDARY_FACTOR),
        left_eddington: surface_e(&tallies.left),
        right_eddington: surface_e(&tallies.right),
        left_fallback: left.is_none(),
        right_fallback: right.is_none(),
    }
}
