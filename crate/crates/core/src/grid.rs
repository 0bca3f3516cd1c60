//! Uniform periodic grid on `[-L, L)` with FFT-based spectral calculus.
//!
//! Transform convention: the forward transform is the unnormalized DFT
//! `F_k = sum_m f_m exp(-i xi_k (x_m + L))` and the inverse divides by `N`.
//! Quadrature uses the weight `dx = 2L/N`, so Parseval reads
//! `dx * sum |f_m|^2 = (dx / N) * sum |F_k|^2`.
//!
//! Operator symbols that are odd in `xi` cannot be applied to the Nyquist
//! mode without producing an imaginary part, so every symbol evaluated
//! through [`Grid1D::symbol_wavenumber`] sees `xi = 0` at Nyquist. This keeps
//! real inputs real and makes composite operators consistent with each
//! other.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

#[derive(Clone)]
pub struct Grid1D {
    half_length: f64,
    n: usize,
    dx: f64,
    wavenumbers: Arc<[f64]>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid1D")
            .field("half_length", &self.half_length)
            .field("n", &self.n)
            .field("dx", &self.dx)
            .finish()
    }
}

impl PartialEq for Grid1D {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.half_length.to_bits() == other.half_length.to_bits()
    }
}

/// Build a grid of `n` points on `[-half_length, half_length)`.
pub fn make_grid(half_length: f64, n: usize) -> Result<Grid1D> {
    Grid1D::new(half_length, n)
}

impl Grid1D {
    pub fn new(half_length: f64, n: usize) -> Result<Self> {
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(Error::HalfLength(half_length));
        }
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::GridSize(n));
        }
        let wavenumbers: Arc<[f64]> = (0..n)
            .map(|i| PI * signed_index(i, n) as f64 / half_length)
            .collect();
        let mut planner = FftPlanner::new();
        Ok(Self {
            half_length,
            n,
            dx: 2.0 * half_length / n as f64,
            wavenumbers,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        })
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Grid point `x_m = -L + m dx`.
    pub fn point(&self, m: usize) -> f64 {
        -self.half_length + m as f64 * self.dx
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|m| self.point(m)).collect()
    }

    /// Wavenumbers `xi_k = pi k / L` in FFT storage order.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// Wavenumbers sorted from `-N/2` to `N/2 - 1`.
    pub fn wavenumbers_monotone(&self) -> Vec<f64> {
        let mut xi = self.wavenumbers.to_vec();
        xi.sort_by(f64::total_cmp);
        xi
    }

    /// Signed mode index `k` of storage slot `i`.
    pub fn mode_index(&self, i: usize) -> i64 {
        signed_index(i, self.n)
    }

    pub fn nyquist_slot(&self) -> usize {
        self.n / 2
    }

    /// Wavenumber used inside operator symbols: `xi_k`, except `0` at Nyquist.
    pub fn symbol_wavenumber(&self, i: usize) -> f64 {
        if i == self.n / 2 {
            0.0
        } else {
            self.wavenumbers[i]
        }
    }

    pub fn max_wavenumber(&self) -> f64 {
        PI * (self.n / 2 - 1) as f64 / self.half_length
    }

    pub fn fft_inplace(&self, buf: &mut [Complex64]) {
        self.forward.process(buf);
    }

    /// Inverse transform including the `1/N` normalization.
    pub fn ifft_inplace(&self, buf: &mut [Complex64]) {
        self.inverse.process(buf);
        let scale = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|z| *z *= scale);
    }

    pub fn fft_with_scratch(&self, buf: &mut [Complex64], scratch: &mut [Complex64]) {
        self.forward.process_with_scratch(buf, scratch);
    }

    pub fn ifft_with_scratch(&self, buf: &mut [Complex64], scratch: &mut [Complex64]) {
        self.inverse.process_with_scratch(buf, scratch);
        let scale = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|z| *z *= scale);
    }

    pub fn scratch_len(&self) -> usize {
        self.forward
            .get_inplace_scratch_len()
            .max(self.inverse.get_inplace_scratch_len())
    }

    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft_inplace(&mut buf);
        buf
    }

    pub fn inverse_real(&self, coeffs: &[Complex64]) -> Vec<f64> {
        let mut buf = coeffs.to_vec();
        self.ifft_inplace(&mut buf);
        buf.into_iter().map(|z| z.re).collect()
    }

    /// Discrete `L^2` inner product `dx * sum f g`.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        self.dx * f.iter().zip(g).map(|(a, b)| a * b).sum::<f64>()
    }

    /// `L^2` inner product evaluated from spectral coefficients.
    pub fn inner_spectral(&self, f: &[Complex64], g: &[Complex64]) -> f64 {
        self.dx / self.n as f64 * f.iter().zip(g).map(|(a, b)| (a * b.conj()).re).sum::<f64>()
    }

    /// Squared Sobolev norm `sum (1 + xi^2)^s |F_k|^2 dx / N`.
    pub fn sobolev_sq_spectral(&self, coeffs: &[Complex64], s: f64) -> f64 {
        let w = self.dx / self.n as f64;
        coeffs
            .iter()
            .zip(self.wavenumbers.iter())
            .map(|(z, &xi)| (1.0 + xi * xi).powf(s) * z.norm_sqr())
            .sum::<f64>()
            * w
    }

    /// Squared `H^1` norm from coefficients, without the `powf` of the general case.
    pub fn h1_sq_spectral(&self, coeffs: &[Complex64]) -> f64 {
        let w = self.dx / self.n as f64;
        coeffs
            .iter()
            .zip(self.wavenumbers.iter())
            .map(|(z, &xi)| (1.0 + xi * xi) * z.norm_sqr())
            .sum::<f64>()
            * w
    }

    /// Largest |k| kept by the 2/3 rule.
    pub fn dealias_cutoff(&self) -> i64 {
        (self.n / 3) as i64
    }

    pub fn dealias_inplace(&self, coeffs: &mut [Complex64]) {
        let cut = self.dealias_cutoff();
        for (i, z) in coeffs.iter_mut().enumerate() {
            if self.mode_index(i).abs() > cut {
                *z = Complex64::new(0.0, 0.0);
            }
        }
    }

    fn check_len(&self, len: usize) {
        assert_eq!(len, self.n, "buffer length does not match grid size");
    }
}

fn signed_index(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Real samples of a function on a [`Grid1D`].
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid1D,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: &Grid1D, values: Vec<f64>) -> Self {
        grid.check_len(values.len());
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn zeros(grid: &Grid1D) -> Self {
        Self::new(grid, vec![0.0; grid.len()])
    }

    pub fn from_fn(grid: &Grid1D, mut f: impl FnMut(f64) -> f64) -> Self {
        let values = (0..grid.len()).map(|m| f(grid.point(m))).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn to_spectral(&self) -> SpectralField {
        SpectralField {
            grid: self.grid.clone(),
            coeffs: self.grid.forward(&self.values),
        }
    }

    pub fn inner(&self, other: &Field) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        self.grid.inner(&self.values, &other.values)
    }

    pub fn integral(&self) -> f64 {
        self.grid.dx() * self.values.iter().sum::<f64>()
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn h1_norm(&self) -> f64 {
        self.grid.h1_sq_spectral(&self.grid.forward(&self.values)).sqrt()
    }

    pub fn hs_norm(&self, s: f64) -> f64 {
        self.grid
            .sobolev_sq_spectral(&self.grid.forward(&self.values), s)
            .sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, alpha: f64) -> Field {
        Field::new(&self.grid, self.values.iter().map(|v| alpha * v).collect())
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: f64, other: &Field) -> Field {
        debug_assert_eq!(self.grid, other.grid);
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + alpha * b)
            .collect();
        Field::new(&self.grid, values)
    }

    pub fn pointwise(&self, other: &Field) -> Field {
        debug_assert_eq!(self.grid, other.grid);
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect();
        Field::new(&self.grid, values)
    }

    /// `g(y) = f(y + s)` by spectral translation.
    pub fn shifted(&self, s: f64) -> Field {
        apply_multiplier(self, |xi| Complex64::from_polar(1.0, xi * s))
    }

    /// Evaluate the trigonometric interpolant at an arbitrary `x`.
    pub fn evaluate(&self, x: f64) -> f64 {
        let coeffs = self.grid.forward(&self.values);
        evaluate_interpolant(&self.grid, &coeffs, x)
    }

    /// Location of the global maximum, refined by Newton's method on the
    /// derivative of the trigonometric interpolant.
    pub fn max_location(&self) -> f64 {
        let (m, _) = self
            .values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        let coeffs = self.grid.forward(&self.values);
        let d1: Vec<Complex64> = coeffs
            .iter()
            .enumerate()
            .map(|(i, z)| z * Complex64::new(0.0, self.grid.symbol_wavenumber(i)))
            .collect();
        let d2: Vec<Complex64> = coeffs
            .iter()
            .enumerate()
            .map(|(i, z)| -z * self.grid.symbol_wavenumber(i).powi(2))
            .collect();
        let mut x = self.grid.point(m);
        for _ in 0..20 {
            let g = evaluate_interpolant(&self.grid, &d1, x);
            let h = evaluate_interpolant(&self.grid, &d2, x);
            if h == 0.0 {
                break;
            }
            let step = g / h;
            let step = step.clamp(-self.grid.dx(), self.grid.dx());
            x -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        x
    }
}

fn evaluate_interpolant(grid: &Grid1D, coeffs: &[Complex64], x: f64) -> f64 {
    let shift = x + grid.half_length();
    let nyq = grid.nyquist_slot();
    let mut acc = 0.0;
    for (i, z) in coeffs.iter().enumerate() {
        let xi = grid.wavenumbers()[i];
        if i == nyq {
            acc += z.re * (xi * shift).cos();
        } else {
            acc += (z * Complex64::from_polar(1.0, xi * shift)).re;
        }
    }
    acc / grid.len() as f64
}

impl Add for &Field {
    type Output = Field;
    fn add(self, rhs: &Field) -> Field {
        self.axpy(1.0, rhs)
    }
}

impl Sub for &Field {
    type Output = Field;
    fn sub(self, rhs: &Field) -> Field {
        self.axpy(-1.0, rhs)
    }
}

impl Mul<&Field> for f64 {
    type Output = Field;
    fn mul(self, rhs: &Field) -> Field {
        rhs.scaled(self)
    }
}

/// Discrete Fourier coefficients of a field, in FFT storage order.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    grid: Grid1D,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn new(grid: &Grid1D, coeffs: Vec<Complex64>) -> Self {
        grid.check_len(coeffs.len());
        Self {
            grid: grid.clone(),
            coeffs,
        }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Inverse transform, keeping the real part.
    pub fn to_field(&self) -> Field {
        Field::new(&self.grid, self.grid.inverse_real(&self.coeffs))
    }

    /// Ratio of the imaginary to the real part of the inverse transform, in `l^2`.
    pub fn imaginary_ratio(&self) -> f64 {
        let mut buf = self.coeffs.clone();
        self.grid.ifft_inplace(&mut buf);
        let re: f64 = buf.iter().map(|z| z.re * z.re).sum();
        let im: f64 = buf.iter().map(|z| z.im * z.im).sum();
        if re == 0.0 {
            im.sqrt()
        } else {
            (im / re).sqrt()
        }
    }

    /// `L^2` norm by Parseval.
    pub fn l2_norm(&self) -> f64 {
        self.grid.sobolev_sq_spectral(&self.coeffs, 0.0).sqrt()
    }

    pub fn dealiased(&self) -> SpectralField {
        dealias(self)
    }
}

/// Zero every coefficient with `|k| > N/3`.
pub fn dealias(f: &SpectralField) -> SpectralField {
    let mut out = f.clone();
    f.grid.dealias_inplace(&mut out.coeffs);
    out
}

/// Multiply the `k`-th coefficient by `(i xi_k)^order`. Odd orders annihilate
/// the Nyquist mode; the input is assumed band-limited well below it.
pub fn spectral_derivative(f: &Field, order: u32) -> Field {
    let grid = f.grid();
    let mut coeffs = grid.forward(f.values());
    let nyq = grid.nyquist_slot();
    for (i, z) in coeffs.iter_mut().enumerate() {
        let mut factor = Complex64::new(0.0, grid.wavenumbers()[i]).powu(order);
        if i == nyq {
            factor = Complex64::new(factor.re, 0.0);
        }
        *z *= factor;
    }
    Field::new(grid, grid.inverse_real(&coeffs))
}

/// Cumulative integral `int_{-L}^{y} f`, computed spectrally. The mean of `f`
/// contributes a linear ramp; the Nyquist mode is dropped.
pub fn antiderivative(f: &Field) -> Field {
    let grid = f.grid();
    let coeffs = grid.forward(f.values());
    let mean = coeffs[0].re / grid.len() as f64;
    let nyq = grid.nyquist_slot();
    let periodic: Vec<Complex64> = coeffs
        .iter()
        .enumerate()
        .map(|(i, z)| {
            if i == 0 || i == nyq {
                Complex64::new(0.0, 0.0)
            } else {
                z / Complex64::new(0.0, grid.wavenumbers()[i])
            }
        })
        .collect();
    let p = grid.inverse_real(&periodic);
    let p0 = p[0];
    let values = p
        .iter()
        .enumerate()
        .map(|(m, pm)| mean * (grid.point(m) + grid.half_length()) + pm - p0)
        .collect();
    Field::new(grid, values)
}

/// Apply a Fourier multiplier `symbol(xi)`; see the module docs for the
/// Nyquist convention.
pub fn apply_multiplier(f: &Field, symbol: impl Fn(f64) -> Complex64) -> Field {
    let grid = f.grid();
    let mut coeffs = grid.forward(f.values());
    for (i, z) in coeffs.iter_mut().enumerate() {
        *z *= symbol(grid.symbol_wavenumber(i));
    }
    Field::new(grid, grid.inverse_real(&coeffs))
}
