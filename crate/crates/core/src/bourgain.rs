//! Dyadic space-time norms `X^{s, +-1/2, 1}` and empirical probes of the
//! linear, bilinear and embedding estimates.
//!
//! Transform convention: on a window of length `T` sampled at `n_t` points,
//! `f~(tau_p, xi_k) = (dt dx / 2 pi) * FFT2[f]`, with `tau_p = 2 pi p / T`. With
//! the cell measure `dtau dxi` this is unitary,
//! `sum |f~|^2 dtau dxi = int int |f|^2 dt dx`, so the frequency-side and the
//! function-side norms coincide. Phase factors from the window origin are
//! dropped; they never change a shell mass, and in a convolution they combine
//! into a single phase per output point.
//!
//! Shells are half-open: `A_j = {2^j <= <xi> < 2^{j+1}}` and
//! `B_k = {2^k <= <tau - xi^3> < 2^{k+1}}` with `<x> = (1 + x^2)^{1/2}`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::dissipation;
use crate::grid::{Field, Grid1D};

/// Real samples `f(t_n, x_m)` on `[t_start, t_start + duration) x [-L, L)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    grid: Grid1D,
    n_t: usize,
    t_start: f64,
    duration: f64,
    values: Vec<f64>,
}

fn check_time_grid(n_t: usize, duration: f64) -> Result<()> {
    if n_t < 2 || !n_t.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "time samples must be a power of two >= 2, got {n_t}"
        )));
    }
    if !(duration.is_finite() && duration > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "time window must be positive, got {duration}"
        )));
    }
    Ok(())
}

impl SpaceTimeField {
    pub fn new(
        grid: &Grid1D,
        n_t: usize,
        t_start: f64,
        duration: f64,
        values: Vec<f64>,
    ) -> Result<Self> {
        check_time_grid(n_t, duration)?;
        if values.len() != n_t * grid.len() {
            return Err(Error::GridMismatch);
        }
        Ok(Self {
            grid: grid.clone(),
            n_t,
            t_start,
            duration,
            values,
        })
    }

    pub fn zeros(grid: &Grid1D, n_t: usize, t_start: f64, duration: f64) -> Result<Self> {
        Self::new(grid, n_t, t_start, duration, vec![0.0; n_t * grid.len()])
    }

    pub fn from_fn(
        grid: &Grid1D,
        n_t: usize,
        t_start: f64,
        duration: f64,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        check_time_grid(n_t, duration)?;
        let dt = duration / n_t as f64;
        let mut values = Vec::with_capacity(n_t * grid.len());
        for n in 0..n_t {
            let t = t_start + n as f64 * dt;
            values.extend((0..grid.len()).map(|m| f(t, grid.point(m))));
        }
        Self::new(grid, n_t, t_start, duration, values)
    }

    /// Build `f(t_n, .) = g(t_n) * h_n` row by row.
    pub fn from_rows(
        grid: &Grid1D,
        n_t: usize,
        t_start: f64,
        duration: f64,
        mut row: impl FnMut(f64) -> Field,
    ) -> Result<Self> {
        check_time_grid(n_t, duration)?;
        let dt = duration / n_t as f64;
        let mut values = Vec::with_capacity(n_t * grid.len());
        for n in 0..n_t {
            let r = row(t_start + n as f64 * dt);
            if r.grid() != grid {
                return Err(Error::GridMismatch);
            }
            values.extend_from_slice(r.values());
        }
        Self::new(grid, n_t, t_start, duration, values)
    }

    /// Real field whose lattice transform is the Hermitian part of `coeff(p, k)`,
    /// for signed time index `p` and signed space index `k`.
    pub fn from_lattice(
        grid: &Grid1D,
        n_t: usize,
        t_start: f64,
        duration: f64,
        coeff: impl Fn(i64, i64) -> Complex64,
    ) -> Result<Self> {
        check_time_grid(n_t, duration)?;
        let nx = grid.len();
        let mut data = vec![Complex64::default(); n_t * nx];
        let signed = |i: usize, n: usize| if i < n / 2 { i as i64 } else { i as i64 - n as i64 };
        for r in 0..n_t {
            for q in 0..nx {
                let (p, k) = (signed(r, n_t), signed(q, nx));
                let mirror = coeff(wrap(-p, n_t), wrap(-k, nx));
                data[r * nx + q] = 0.5 * (coeff(p, k) + mirror.conj());
            }
        }
        let dt = duration / n_t as f64;
        let scale = 2.0 * PI / (dt * grid.dx());
        data.iter_mut().for_each(|z| *z *= scale);
        fft2(&mut data, n_t, nx, true);
        let values = data.iter().map(|z| z.re).collect();
        Self::new(grid, n_t, t_start, duration, values)
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn time_step(&self) -> f64 {
        self.duration / self.n_t as f64
    }

    pub fn time(&self, n: usize) -> f64 {
        self.t_start + n as f64 * self.time_step()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, n: usize) -> Field {
        let nx = self.grid.len();
        Field::new(&self.grid, self.values[n * nx..(n + 1) * nx].to_vec())
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= lambda);
        out
    }

    /// Multiply each time slice by `weights[n]`.
    pub fn time_weighted(&self, weights: &[f64]) -> Self {
        let nx = self.grid.len();
        let mut out = self.clone();
        for (n, w) in weights.iter().enumerate() {
            out.values[n * nx..(n + 1) * nx].iter_mut().for_each(|v| *v *= w);
        }
        out
    }

    /// `int int |f|^2 dt dx` by the rectangle rule.
    pub fn l2_norm_sq(&self) -> f64 {
        self.time_step() * self.grid.dx() * self.values.iter().map(|v| v * v).sum::<f64>()
    }

    pub fn transform(&self) -> FrequencyLattice {
        let nx = self.grid.len();
        let mut data: Vec<Complex64> = self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft2(&mut data, self.n_t, nx, false);
        let scale = self.time_step() * self.grid.dx() / (2.0 * PI);
        data.iter_mut().for_each(|z| *z *= scale);
        FrequencyLattice::from_fft_order(data, self.n_t, nx, 2.0 * PI / self.duration, PI / self.grid.half_length())
    }

    /// `sup_n ||f(t_n)||_{H^s}`.
    pub fn sup_hs(&self, s: f64) -> f64 {
        (0..self.n_t)
            .map(|n| self.row(n).hs_norm(s))
            .fold(0.0, f64::max)
    }
}

fn wrap(i: i64, n: usize) -> i64 {
    let n = n as i64;
    let r = i.rem_euclid(n);
    if r < n / 2 {
        r
    } else {
        r - n
    }
}

/// In-place 2-D transform of a row-major `rows x cols` array. The inverse
/// includes the `1 / (rows cols)` normalization.
pub(crate) fn fft2(data: &mut [Complex64], rows: usize, cols: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let (row_fft, col_fft) = if inverse {
        (planner.plan_fft_inverse(cols), planner.plan_fft_inverse(rows))
    } else {
        (planner.plan_fft_forward(cols), planner.plan_fft_forward(rows))
    };
    row_fft.process(data);
    let mut column = vec![Complex64::default(); rows];
    for c in 0..cols {
        for r in 0..rows {
            column[r] = data[r * cols + c];
        }
        col_fft.process(&mut column);
        for r in 0..rows {
            data[r * cols + c] = column[r];
        }
    }
    if inverse {
        let scale = 1.0 / (rows * cols) as f64;
        data.iter_mut().for_each(|z| *z *= scale);
    }
}

/// Values on a uniform `(tau, xi)` lattice with signed indices, stored in
/// FFT order, together with the cell measure.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyLattice {
    n_tau: usize,
    n_xi: usize,
    d_tau: f64,
    d_xi: f64,
    values: Vec<Complex64>,
}

impl FrequencyLattice {
    pub fn from_fft_order(
        values: Vec<Complex64>,
        n_tau: usize,
        n_xi: usize,
        d_tau: f64,
        d_xi: f64,
    ) -> Self {
        assert_eq!(values.len(), n_tau * n_xi);
        Self {
            n_tau,
            n_xi,
            d_tau,
            d_xi,
            values,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_tau, self.n_xi)
    }

    pub fn d_tau(&self) -> f64 {
        self.d_tau
    }

    pub fn d_xi(&self) -> f64 {
        self.d_xi
    }

    pub fn cell(&self) -> f64 {
        self.d_tau * self.d_xi
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn tau(&self, r: usize) -> f64 {
        wrap(r as i64, self.n_tau) as f64 * self.d_tau
    }

    pub fn xi(&self, q: usize) -> f64 {
        wrap(q as i64, self.n_xi) as f64 * self.d_xi
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.cell() * self.values.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    pub fn shells(&self) -> ShellDecomposition {
        let mut acc: Vec<Vec<f64>> = Vec::new();
        for r in 0..self.n_tau {
            let tau = self.tau(r);
            for q in 0..self.n_xi {
                let z = self.values[r * self.n_xi + q];
                let xi = self.xi(q);
                let (j, k) = (dyadic_index(xi), dyadic_index(tau - xi * xi * xi));
                if acc.len() <= j {
                    acc.resize(j + 1, Vec::new());
                }
                if acc[j].len() <= k {
                    acc[j].resize(k + 1, 0.0);
                }
                acc[j][k] += z.norm_sqr();
            }
        }
        let cell = self.cell();
        let k_len = acc.iter().map(|r| r.len()).max().unwrap_or(0);
        let masses: Vec<Vec<f64>> = acc
            .into_iter()
            .map(|mut r| {
                r.resize(k_len, 0.0);
                r.into_iter().map(|m2| (m2 * cell).sqrt()).collect()
            })
            .collect();
        ShellDecomposition { masses }
    }

    /// Embedding constant for this lattice, see [`embedding_constant`].
    pub fn embedding_constant(&self, s: f64) -> f64 {
        // alpha = max over xi and k of (d_tau * #{tau in B_k(xi)}) / 2^k
        let mut alpha: f64 = 0.0;
        for q in 0..self.n_xi {
            let xi = self.xi(q);
            let mut counts: Vec<usize> = Vec::new();
            for r in 0..self.n_tau {
                let k = dyadic_index(self.tau(r) - xi * xi * xi);
                if counts.len() <= k {
                    counts.resize(k + 1, 0);
                }
                counts[k] += 1;
            }
            for (k, &n) in counts.iter().enumerate() {
                alpha = alpha.max(self.d_tau * n as f64 / 2f64.powi(k as i32));
            }
        }
        2f64.powf(s).max(1.0) * (alpha / (2.0 * PI)).sqrt()
    }
}

/// `<x> = (1 + x^2)^{1/2}`.
pub fn bracket(x: f64) -> f64 {
    (1.0 + x * x).sqrt()
}

/// The `j` with `2^j <= <x> < 2^{j+1}`, decided on `1 + x^2` against powers of 4.
pub fn dyadic_index(x: f64) -> usize {
    let q = 1.0 + x * x;
    let mut j = (0.5 * q.log2()).floor().max(0.0) as i32;
    while 4f64.powi(j + 1) <= q {
        j += 1;
    }
    while j > 0 && 4f64.powi(j) > q {
        j -= 1;
    }
    j as usize
}

/// Shell masses `m_jk = ||f~||_{L^2(A_j x B_k)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellDecomposition {
    /// `masses[j][k]`; every row has length `k_max + 1`.
    pub masses: Vec<Vec<f64>>,
}

impl ShellDecomposition {
    pub fn j_max(&self) -> usize {
        self.masses.len().saturating_sub(1)
    }

    pub fn k_max(&self) -> usize {
        self.masses.first().map_or(0, |r| r.len().saturating_sub(1))
    }

    pub fn total_sq(&self) -> f64 {
        self.masses.iter().flatten().map(|m| m * m).sum()
    }

    /// `(sum_j 2^{2sj} (sum_k 2^{bk} m_jk)^2)^{1/2}`.
    pub fn norm(&self, s: f64, b: f64) -> f64 {
        self.masses
            .iter()
            .enumerate()
            .map(|(j, row)| {
                let inner: f64 = row
                    .iter()
                    .enumerate()
                    .map(|(k, m)| 2f64.powf(b * k as f64) * m)
                    .sum();
                2f64.powf(2.0 * s * j as f64) * inner * inner
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn nonzero_count(&self) -> usize {
        self.masses.iter().flatten().filter(|&&m| m > 0.0).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn exponent(self) -> f64 {
        match self {
            Sign::Plus => 0.5,
            Sign::Minus => -0.5,
        }
    }
}

pub fn shell_decompose(f: &SpaceTimeField) -> ShellDecomposition {
    f.transform().shells()
}

pub fn xsb1_norm(f: &SpaceTimeField, s: f64, sign: Sign) -> f64 {
    shell_decompose(f).norm(s, sign.exponent())
}

/// Smooth transition from 0 (`x <= 0`) to 1 (`x >= 1`).
pub fn smooth_step(x: f64) -> f64 {
    let h = |x: f64| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 };
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        h(x) / (h(x) + h(1.0 - x))
    }
}

/// Time cutoff supported in `[-2, 2]` and equal to 1 on `[-1, 1]`.
pub fn rho(t: f64) -> f64 {
    smooth_step(2.0 - t.abs())
}

/// Cutoffs equal to 1 on `[t_start, t_start + delta]` with smooth ramps of
/// width `mu` on both sides, wrapping periodically in the window. The widths
/// form a geometric sweep starting at `(T - delta) / 2`.
pub fn cutoff_family(f: &SpaceTimeField, delta: f64, n_ext: usize) -> Vec<Vec<f64>> {
    let total = f.duration();
    let spare = total - delta;
    if spare <= 0.0 {
        return Vec::new();
    }
    (0..n_ext)
        .map(|i| {
            let mu = 0.5 * spare * 0.5f64.powi(i as i32);
            (0..f.n_t())
                .map(|n| {
                    let t = f.time(n) - f.t_start();
                    if t <= delta {
                        1.0
                    } else if t <= delta + mu {
                        smooth_step((delta + mu - t) / mu)
                    } else if t >= total - mu {
                        smooth_step((t - (total - mu)) / mu)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

/// Minimum of the `X^{s,1/2,1}` norm over `f` itself and `chi f` for each
/// cutoff in `family`. An upper bound for the time-localized norm.
pub fn timelocalized_norm_with(f: &SpaceTimeField, s: f64, family: &[Vec<f64>]) -> f64 {
    family
        .iter()
        .map(|chi| xsb1_norm(&f.time_weighted(chi), s, Sign::Plus))
        .fold(xsb1_norm(f, s, Sign::Plus), f64::min)
}

/// Time-localized norm on `[t_start, t_start + delta]` over the standard
/// cutoff family of [`cutoff_family`].
pub fn timelocalized_norm(f: &SpaceTimeField, delta: f64, s: f64, n_ext: usize) -> Result<f64> {
    if !(delta > 0.0 && delta <= f.duration()) {
        return Err(Error::InvalidArgument(format!(
            "localization length {delta} outside (0, {}]",
            f.duration()
        )));
    }
    Ok(timelocalized_norm_with(f, s, &cutoff_family(f, delta, n_ext)))
}

/// Constant `C` with `sup_t ||f(t)||_{H^s} <= C ||f||_{X^{s,1/2,1}}` on the
/// lattice of `f`.
///
/// Inverting the time transform at fixed `xi` and applying Cauchy-Schwarz on
/// each `B_k` slice gives the factor `(d_tau n_k(xi) / (2 pi 2^k))^{1/2}`,
/// where `n_k(xi)` counts lattice points of the slice; `<xi>^s <= 2^s 2^{sj}`
/// on `A_j` adds `max(2^s, 1)`. In the continuum limit the slice factor tends
/// to `(sqrt(3)/pi)^{1/2}`, about 1.485 in total at `s = 1`.
pub fn embedding_constant(f: &SpaceTimeField, s: f64) -> f64 {
    f.transform().embedding_constant(s)
}

/// `sup_t ||f(t)||_{H^s} / ||f||_{X^{s,1/2,1}}`.
pub fn embedding_ratio(f: &SpaceTimeField, s: f64) -> Result<f64> {
    let denom = xsb1_norm(f, s, Sign::Plus);
    if denom == 0.0 {
        return Err(Error::Degenerate("embedding ratio of the zero field"));
    }
    Ok(f.sup_hs(s) / denom)
}

/// `(|xi_1| f~) * g~` on the zero-padded `(2 n_t) x (2 N)` lattice, including
/// the cell measure of the convolution integral.
pub fn bilinear_product(f: &SpaceTimeField, g: &SpaceTimeField) -> Result<FrequencyLattice> {
    if f.grid() != g.grid() || f.n_t() != g.n_t() || f.duration() != g.duration() {
        return Err(Error::GridMismatch);
    }
    let ft = f.transform();
    let gt = g.transform();
    let (nt, nx) = ft.shape();
    let (pt, px) = (2 * nt, 2 * nx);
    let mut a = vec![Complex64::default(); pt * px];
    let mut b = vec![Complex64::default(); pt * px];
    for r in 0..nt {
        let rr = wrap(r as i64, nt).rem_euclid(pt as i64) as usize;
        for q in 0..nx {
            let qq = wrap(q as i64, nx).rem_euclid(px as i64) as usize;
            a[rr * px + qq] = ft.values[r * nx + q] * ft.xi(q).abs();
            b[rr * px + qq] = gt.values[r * nx + q];
        }
    }
    fft2(&mut a, pt, px, false);
    fft2(&mut b, pt, px, false);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    fft2(&mut a, pt, px, true);
    let cell = ft.cell();
    a.iter_mut().for_each(|z| *z *= cell);
    Ok(FrequencyLattice::from_fft_order(a, pt, px, ft.d_tau, ft.d_xi))
}

/// `||(|xi_1| f~) * g~||_{X^{s,-1/2,1}} / (||f||_{X^{s,1/2,1}} ||g||_{X^{s,1/2,1}})`.
pub fn bilinear_ratio(f: &SpaceTimeField, g: &SpaceTimeField, s: f64) -> Result<f64> {
    if s < 0.0 {
        return Err(Error::InvalidArgument(format!("bilinear estimate needs s >= 0, got {s}")));
    }
    let denom = xsb1_norm(f, s, Sign::Plus) * xsb1_norm(g, s, Sign::Plus);
    if denom == 0.0 {
        return Err(Error::Degenerate("bilinear ratio with a zero factor"));
    }
    Ok(bilinear_product(f, g)?.shells().norm(s, -0.5) / denom)
}

/// `(tau1 + tau2) - (xi1 + xi2)^3 - (tau1 - xi1^3) - (tau2 - xi2^3) + 3 xi xi1 xi2`.
pub fn resonance_defect(tau1: f64, xi1: f64, tau2: f64, xi2: f64) -> f64 {
    let xi = xi1 + xi2;
    let lhs = (tau1 + tau2) - xi * xi * xi - (tau1 - xi1 * xi1 * xi1) - (tau2 - xi2 * xi2 * xi2);
    lhs + 3.0 * xi * xi1 * xi2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateKind {
    AiryHom,
    AiryInhom,
    DissHom,
    DissInhom,
}

impl EstimateKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimateKind::AiryHom => "airy-hom",
            EstimateKind::AiryInhom => "airy-inhom",
            EstimateKind::DissHom => "diss-hom",
            EstimateKind::DissInhom => "diss-inhom",
        }
    }

    pub fn is_dissipative(self) -> bool {
        matches!(self, EstimateKind::DissHom | EstimateKind::DissInhom)
    }
}

/// Sampling of the probe window `[-half_window, half_window)`.
#[derive(Debug, Clone)]
pub struct ProbeWindow {
    pub grid: Grid1D,
    pub n_t: usize,
    pub half_window: f64,
    /// Weight and speed entering `p_a`; `a = 0` switches the dissipation off.
    pub a: f64,
    pub c0: f64,
}

impl ProbeWindow {
    fn duration(&self) -> f64 {
        2.0 * self.half_window
    }

    fn symbol(&self, xi: f64, t: f64, dissipative: bool) -> Complex64 {
        let damp = if dissipative {
            (-dissipation(xi, self.c0, self.a) * t.abs()).exp()
        } else {
            1.0
        };
        Complex64::from_polar(damp, t * xi * xi * xi)
    }

    /// `rho(t) W(t) f` with `W = W1`, or the two-sided `W2`.
    pub fn free_evolution(&self, f: &Field, dissipative: bool) -> Result<SpaceTimeField> {
        if f.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        let fh = self.grid.forward(f.values());
        SpaceTimeField::from_rows(&self.grid, self.n_t, -self.half_window, self.duration(), |t| {
            let r = rho(t);
            let coeffs: Vec<Complex64> = fh
                .iter()
                .enumerate()
                .map(|(i, z)| z * self.symbol(self.grid.symbol_wavenumber(i), t, dissipative) * r)
                .collect();
            Field::new(&self.grid, self.grid.inverse_real(&coeffs))
        })
    }

    /// `rho(t) int_0^t W(t - t') F(t') dt'`, exact for the trigonometric
    /// interpolant of `F` in time. In the dissipative case the response is
    /// taken on `t >= 0` only.
    pub fn duhamel(&self, forcing: &SpaceTimeField, dissipative: bool) -> Result<SpaceTimeField> {
        if forcing.grid() != &self.grid
            || forcing.n_t() != self.n_t
            || forcing.duration() != self.duration()
        {
            return Err(Error::GridMismatch);
        }
        let nx = self.grid.len();
        let nt = self.n_t;
        let t0 = forcing.t_start();
        let mut data: Vec<Complex64> = forcing.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft2(&mut data, nt, nx, false);
        let inv = 1.0 / nt as f64;
        let d_tau = 2.0 * PI / self.duration();
        let mut out = vec![0.0; nt * nx];
        let mut row = vec![Complex64::default(); nx];
        for n in 0..nt {
            let t = t0 + n as f64 * forcing.time_step();
            let r = rho(t);
            if r == 0.0 || (dissipative && t < 0.0) {
                continue;
            }
            for (q, slot) in row.iter_mut().enumerate() {
                let xi = self.grid.symbol_wavenumber(q);
                let mut lambda = Complex64::new(0.0, xi * xi * xi);
                if dissipative {
                    lambda -= dissipation(xi, self.c0, self.a);
                }
                let e_lt = (lambda * t).exp();
                let mut acc = Complex64::default();
                for p in 0..nt {
                    let tau = wrap(p as i64, nt) as f64 * d_tau;
                    let c = data[p * nx + q] * inv * Complex64::from_polar(1.0, -tau * t0);
                    let denom = Complex64::new(0.0, tau) - lambda;
                    let resp = if denom.norm() < 1e-12 {
                        e_lt * t
                    } else {
                        (Complex64::from_polar(1.0, tau * t) - e_lt) / denom
                    };
                    acc += c * resp;
                }
                *slot = acc * r;
            }
            let vals = self.grid.inverse_real(&row);
            out[n * nx..(n + 1) * nx].copy_from_slice(&vals);
        }
        SpaceTimeField::new(&self.grid, nt, t0, self.duration(), out)
    }
}

/// Input of a linear estimate: initial data for the homogeneous kinds, a
/// space-time forcing on the probe window for the inhomogeneous ones.
#[derive(Debug, Clone)]
pub enum LinearInput<'a> {
    Initial(&'a Field),
    Forcing(&'a SpaceTimeField),
}

/// Left side over right side of the requested linear estimate.
pub fn linear_estimate_ratio(
    input: LinearInput<'_>,
    kind: EstimateKind,
    s: f64,
    window: &ProbeWindow,
) -> Result<f64> {
    let dissipative = kind.is_dissipative();
    let (lhs, rhs) = match (kind, input) {
        (EstimateKind::AiryHom | EstimateKind::DissHom, LinearInput::Initial(f)) => {
            let u = window.free_evolution(f, dissipative)?;
            (xsb1_norm(&u, s, Sign::Plus), f.hs_norm(s))
        }
        (EstimateKind::AiryInhom | EstimateKind::DissInhom, LinearInput::Forcing(force)) => {
            let u = window.duhamel(force, dissipative)?;
            (xsb1_norm(&u, s, Sign::Plus), xsb1_norm(force, s, Sign::Minus))
        }
        _ => {
            return Err(Error::InvalidArgument(format!(
                "{} estimate received the wrong kind of input",
                kind.name()
            )))
        }
    };
    if rhs == 0.0 {
        return Err(Error::Degenerate("linear estimate with zero right-hand side"));
    }
    Ok(lhs / rhs)
}
