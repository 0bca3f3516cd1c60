//! The KdV soliton family `psi_c(y) = (3c/2) sech^2(sqrt(c) y / 2)`.
//!
//! Besides the plain profiles, this module provides pointwise evaluations of
//! the profiles multiplied by `exp(b y)`. These are what the weighted
//! eigenfunctions are made of; forming `exp(b y)` on its own overflows on wide
//! grids, so each product is evaluated in a combined, cancellation-free form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{spectral_derivative, Field, Grid1D};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolitonParams {
    pub c: f64,
    pub x0: f64,
}

impl SolitonParams {
    pub fn new(c: f64, x0: f64) -> Result<Self> {
        check_speed(c)?;
        Ok(Self { c, x0 })
    }

    pub fn centered(c: f64) -> Result<Self> {
        Self::new(c, 0.0)
    }
}

pub(crate) fn check_speed(c: f64) -> Result<()> {
    if c.is_finite() && c > 0.0 {
        Ok(())
    } else {
        Err(Error::Speed(c))
    }
}

/// `exp(b y) sech^2(k y)`, finite whenever `|b| < 2k`.
pub fn weighted_sech2(b: f64, k: f64, y: f64) -> f64 {
    let z = (k * y).abs();
    let e = (-2.0 * z).exp();
    4.0 * (b * y - 2.0 * z).exp() / ((1.0 + e) * (1.0 + e))
}

/// `exp(b y) (1 + tanh(k y))`, finite for `b < 0` and `b + 2k > 0`.
pub fn weighted_one_plus_tanh(b: f64, k: f64, y: f64) -> f64 {
    let z = k * y;
    if z >= 0.0 {
        2.0 * (b * y).exp() / (1.0 + (-2.0 * z).exp())
    } else {
        let e = (2.0 * z).exp();
        2.0 * (b * y + 2.0 * z).exp() / (1.0 + e)
    }
}

fn kappa(c: f64) -> f64 {
    0.5 * c.sqrt()
}

/// `exp(b y) psi_c(y)`.
pub fn weighted_psi(c: f64, b: f64, y: f64) -> f64 {
    1.5 * c * weighted_sech2(b, kappa(c), y)
}

/// `exp(b y) d/dy psi_c(y)`.
pub fn weighted_dpsi_dy(c: f64, b: f64, y: f64) -> f64 {
    let k = kappa(c);
    -1.5 * c * c.sqrt() * weighted_sech2(b, k, y) * (k * y).tanh()
}

/// `exp(b y) d/dc psi_c(y)`.
pub fn weighted_dpsi_dc(c: f64, b: f64, y: f64) -> f64 {
    let k = kappa(c);
    weighted_sech2(b, k, y) * (1.5 - 0.75 * c.sqrt() * y * (k * y).tanh())
}

/// `exp(b y) int_{-inf}^y d/dc psi_c`, requiring `-sqrt(c) < b < 0`.
///
/// The antiderivative is `3/(2 sqrt c) (1 + tanh(k y)) + (3/4) y sech^2(k y)`.
pub fn weighted_dpsi_dc_antiderivative(c: f64, b: f64, y: f64) -> f64 {
    let k = kappa(c);
    1.5 / c.sqrt() * weighted_one_plus_tanh(b, k, y) + 0.75 * y * weighted_sech2(b, k, y)
}

/// `d/dc int_{-inf}^y psi_c` evaluated pointwise, unweighted.
pub fn dpsi_dc_antiderivative_value(c: f64, y: f64) -> f64 {
    weighted_dpsi_dc_antiderivative(c, 0.0, y)
}

pub fn psi_value(c: f64, y: f64) -> f64 {
    weighted_psi(c, 0.0, y)
}

/// Exact mass `int psi_c = 6 sqrt(c)`.
pub fn mass(c: f64) -> f64 {
    6.0 * c.sqrt()
}

/// Exact momentum `int psi_c^2 = 6 c^(3/2)`.
pub fn momentum(c: f64) -> f64 {
    6.0 * c * c.sqrt()
}

fn sample(p: &SolitonParams, grid: &Grid1D, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
    check_speed(p.c)?;
    Ok(Field::from_fn(grid, |x| f(p.c, x - p.x0)))
}

pub fn psi(p: &SolitonParams, grid: &Grid1D) -> Result<Field> {
    sample(p, grid, psi_value)
}

pub fn dpsi_dy(p: &SolitonParams, grid: &Grid1D) -> Result<Field> {
    sample(p, grid, |c, y| weighted_dpsi_dy(c, 0.0, y))
}

pub fn dpsi_dc(p: &SolitonParams, grid: &Grid1D) -> Result<Field> {
    sample(p, grid, |c, y| weighted_dpsi_dc(c, 0.0, y))
}

/// `exp(b (x - x0))` times the profile, sampled on the grid.
pub fn weighted_field(
    p: &SolitonParams,
    grid: &Grid1D,
    b: f64,
    profile: fn(f64, f64, f64) -> f64,
) -> Result<Field> {
    sample(p, grid, |c, y| profile(c, b, y))
}

/// Discrete `L^2` norm of `-c psi' + psi''' + (psi^2)'` for a sampled profile.
pub fn profile_residual(c: f64, profile: &Field) -> f64 {
    let d1 = spectral_derivative(profile, 1);
    let d3 = spectral_derivative(profile, 3);
    let sq = profile.pointwise(profile);
    let dsq = spectral_derivative(&sq, 1);
    d3.axpy(-c, &d1).axpy(1.0, &dsq).l2_norm()
}

/// Residual of the travelling-wave equation for the exact soliton profile.
pub fn soliton_residual(p: &SolitonParams, grid: &Grid1D) -> Result<f64> {
    Ok(profile_residual(p.c, &psi(p, grid)?))
}
