//! Multilevel Monte Carlo for hybrid quasidiffusion transport in a 1-D slab.
//!
//! A realization runs `K` Monte Carlo histories with implicit capture,
//! turns the track-length and surface-crossing tallies into Eddington and
//! boundary factors, and solves the finite-volume low-order quasidiffusion
//! equation on a fine grid and on the next coarser grid of a nested
//! hierarchy. The MLMC driver allocates realizations across levels from the
//! observed variances and costs and reports rate fits, the weak-convergence
//! bound and consistency diagnostics.
//!
//! | module        | contents                                                   |
//! |---------------|------------------------------------------------------------|
//! | [`grids`]     | nested grids, tally restriction, flux functionals          |
//! | [`transport`] | slab problem, particle tracking, closure estimators        |
//! | [`loqd`]      | low-order assembly, tridiagonal solve, balance check       |
//! | [`mlmc`]      | samplers, level statistics, allocation, diagnostics        |
//! | [`experiment`]| TOML configs, case orchestration, CSV/JSON outputs         |
//!
//! Runnable walkthroughs live in the crate's `examples/` directory.

// `!(x > 0.0)` style checks reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod grids;
pub mod loqd;
pub mod mlmc;
pub mod transport;

pub use error::{Error, Result};
