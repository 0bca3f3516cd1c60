//! Numerical core for studying the asymptotic stability of KdV solitons in
//! exponentially weighted spaces.
//!
//! The modules build on each other bottom-up: [`grid`] supplies the periodic
//! pseudospectral substrate, [`soliton`] the travelling-wave family,
//! [`linearized`] the weighted linearized operator with its spectral
//! projections, [`evolution`] the time steppers, [`modulation`] the tracking of
//! speed and phase, and [`bourgain`] the dyadic space-time norms. The
//! [`experiments`] module wires them into end-to-end runs.

pub mod bourgain;
pub mod error;
pub mod evolution;
pub mod experiments;
pub mod grid;
pub mod linearized;
pub mod modulation;
pub mod soliton;

pub use error::{Error, Result};
pub use grid::{make_grid, Field, Grid1D, SpectralField};
