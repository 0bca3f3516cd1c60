//! The weighted linearized operator `A_a = e^{ay} d_y (-d_y^2 + c - 2 psi_c) e^{-ay}`.
//!
//! Conjugation by `e^{ay}` turns `d_y` into `d_y - a`, so everything here is
//! assembled from the shifted symbol `i xi - a` and products with `psi_c`;
//! `e^{+-ay}` never appears as a grid factor. The generalized kernel of `A_a`
//! is spanned by `zeta_1 = e^{ay} psi_c'` and `zeta_2 = e^{ay} d_c psi_c`, and
//! the adjoint functions `eta_1`, `eta_2` are normalized so that
//! `<zeta_j, eta_k> = delta_jk`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid1D};
use crate::soliton::{
    self, weighted_dpsi_dc, weighted_dpsi_dc_antiderivative, weighted_dpsi_dy, weighted_psi,
    SolitonParams,
};

/// Eigenvalues with modulus below this count as kernel eigenvalues (resolution dependent).
pub const KERNEL_THRESHOLD: f64 = 1e-3;
/// Eigenvectors with more than this fraction of mass in the outer region are truncation artifacts.
pub const ARTIFACT_MASS: f64 = 0.01;
/// The outer region is `|y| > (1 - BOUNDARY_FRACTION) L`.
pub const BOUNDARY_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightParams {
    pub a: f64,
    pub c: f64,
}

impl WeightParams {
    /// Requires `0 < a < sqrt(c/3)`.
    pub fn new(a: f64, c: f64) -> Result<Self> {
        soliton::check_speed(c)?;
        if !(a.is_finite() && a > 0.0 && a < (c / 3.0).sqrt()) {
            return Err(Error::Weight { a, c });
        }
        Ok(Self { a, c })
    }

    /// Upper edge `-a (c - a^2)` of the continuous spectrum.
    pub fn spectral_gap(&self) -> f64 {
        self.a * (self.c - self.a * self.a)
    }
}

/// `(i xi - a)(-(i xi - a)^2 + c)`.
pub fn shifted_symbol(xi: f64, a: f64, c: f64) -> Complex64 {
    let s = Complex64::new(-a, xi);
    s * (c - s * s)
}

/// The curve `tau -> i tau^3 - 3 a tau^2 + (c - 3a^2) i tau - a (c - a^2)`.
pub fn continuous_spectrum_curve(tau: f64, params: &WeightParams) -> Complex64 {
    let (a, c) = (params.a, params.c);
    Complex64::new(
        -3.0 * a * tau * tau - a * (c - a * a),
        tau * tau * tau + (c - 3.0 * a * a) * tau,
    )
}

/// Distance from `lambda` to the continuous-spectrum curve.
pub fn curve_distance(lambda: Complex64, params: &WeightParams) -> f64 {
    let dist = |tau: f64| (continuous_spectrum_curve(tau, params) - lambda).norm();
    let reach = lambda.im.abs().cbrt()
        + ((-lambda.re).max(0.0) / (3.0 * params.a)).sqrt()
        + (params.c.abs()).sqrt()
        + 2.0;
    let samples = 4000;
    let h = 2.0 * reach / samples as f64;
    let mut best = (-reach, dist(-reach));
    for i in 1..=samples {
        let tau = -reach + i as f64 * h;
        let d = dist(tau);
        if d < best.1 {
            best = (tau, d);
        }
    }
    // golden-section refinement around the best sample
    let (mut lo, mut hi) = (best.0 - h, best.0 + h);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let x1 = hi - g * (hi - lo);
        let x2 = lo + g * (hi - lo);
        if dist(x1) < dist(x2) {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    dist(0.5 * (lo + hi)).min(best.1)
}

/// Spectral assembly of `A_a` and its formal adjoint on a fixed grid.
#[derive(Debug, Clone)]
pub struct LinearizedOperator {
    grid: Grid1D,
    a: f64,
    c: f64,
    psi: Vec<f64>,
    shift: Vec<Complex64>,
    symbol: Vec<Complex64>,
}

impl LinearizedOperator {
    pub fn new(params: &WeightParams, grid: &Grid1D) -> Result<Self> {
        let params = WeightParams::new(params.a, params.c)?;
        Ok(Self::assemble(params.a, params.c, grid, true))
    }

    /// The operator with the `psi_c` coupling removed: a pure Fourier multiplier.
    pub fn free(params: &WeightParams, grid: &Grid1D) -> Result<Self> {
        let params = WeightParams::new(params.a, params.c)?;
        Ok(Self::assemble(params.a, params.c, grid, false))
    }

    pub(crate) fn assemble(a: f64, c: f64, grid: &Grid1D, coupled: bool) -> Self {
        let psi = if coupled {
            (0..grid.len()).map(|m| soliton::psi_value(c, grid.point(m))).collect()
        } else {
            vec![0.0; grid.len()]
        };
        let shift = (0..grid.len())
            .map(|i| Complex64::new(-a, grid.symbol_wavenumber(i)))
            .collect();
        let symbol = (0..grid.len())
            .map(|i| shifted_symbol(grid.symbol_wavenumber(i), a, c))
            .collect();
        Self {
            grid: grid.clone(),
            a,
            c,
            psi,
            shift,
            symbol,
        }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    /// `(d - a)(-(d - a)^2 + c) w - 2 (d - a)(psi_c w)`.
    pub fn apply(&self, w: &Field) -> Field {
        let g = &self.grid;
        let mut wh = g.forward(w.values());
        let pw: Vec<f64> = w.values().iter().zip(&self.psi).map(|(x, p)| x * p).collect();
        let pwh = g.forward(&pw);
        for i in 0..g.len() {
            wh[i] = self.symbol[i] * wh[i] - 2.0 * self.shift[i] * pwh[i];
        }
        Field::new(g, g.inverse_real(&wh))
    }

    /// `A_a^* v = -(-(d + a)^2 + c) g + 2 psi_c g` with `g = (d + a) v`.
    pub fn apply_adjoint(&self, v: &Field) -> Field {
        let g = &self.grid;
        let vh = g.forward(v.values());
        // d + a has symbol -(conj of the shift)
        let gh: Vec<Complex64> = vh.iter().zip(&self.shift).map(|(z, s)| -s.conj() * z).collect();
        let gv = g.inverse_real(&gh);
        let mut out: Vec<Complex64> = gh
            .iter()
            .zip(&self.shift)
            .map(|(z, s)| {
                let p = -s.conj();
                -(self.c - p * p) * z
            })
            .collect();
        g.ifft_inplace(&mut out);
        let values = out
            .iter()
            .zip(&gv)
            .zip(&self.psi)
            .map(|((o, gg), p)| o.re + 2.0 * p * gg)
            .collect();
        Field::new(g, values)
    }

    /// Dense matrix of the operator acting on Fourier coefficients.
    pub fn spectral_matrix(&self) -> DMatrix<Complex64> {
        let g = &self.grid;
        let n = g.len();
        let psi_hat = g.forward(&self.psi);
        let inv_n = 1.0 / n as f64;
        DMatrix::from_fn(n, n, |k, l| {
            let conv = psi_hat[(k + n - l) % n] * inv_n;
            let diag = if k == l { self.symbol[k] } else { Complex64::new(0.0, 0.0) };
            diag - 2.0 * self.shift[k] * conv
        })
    }

    pub fn params(&self) -> (f64, f64) {
        (self.a, self.c)
    }
}

/// Apply `A_a` to `w`; see [`LinearizedOperator::apply`].
pub fn apply_aa(w: &Field, params: &WeightParams) -> Result<Field> {
    Ok(LinearizedOperator::new(params, w.grid())?.apply(w))
}

/// Apply the formal adjoint of `A_a` to `v`.
pub fn apply_aa_adjoint(v: &Field, params: &WeightParams) -> Result<Field> {
    Ok(LinearizedOperator::new(params, v.grid())?.apply_adjoint(v))
}

/// Kernel functions of `A_a` and their biorthogonal adjoint partners.
#[derive(Debug, Clone)]
pub struct SpectralPackage {
    pub params: WeightParams,
    pub zeta1: Field,
    pub zeta2: Field,
    pub eta1: Field,
    pub eta2: Field,
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
    /// `(d + a) eta_i`, from closed forms.
    pub d_eta1: Field,
    pub d_eta2: Field,
    /// `e^{ay} eta_i`, the adjoint functions paired against unweighted data.
    pub eta1_unweighted: Field,
    pub eta2_unweighted: Field,
    /// `<zeta_1, e^{-ay} psi_c>` before any normalization; vanishes by parity.
    pub parity_defect: f64,
}

/// Build the package for `(a, c)`.
///
/// `d_y^{-1} d_c psi_c` is taken in closed form. Cumulative quadrature of the
/// sampled derivative has an `O(dx^2)` error which the weight `e^{-ay}` turns
/// into a visible defect on the left half of wide grids.
pub fn build_spectral_package(params: &WeightParams, grid: &Grid1D) -> Result<SpectralPackage> {
    let params = WeightParams::new(params.a, params.c)?;
    let (a, c) = (params.a, params.c);
    let sp = SolitonParams::centered(c)?;
    let wf = |b: f64, f: fn(f64, f64, f64) -> f64| soliton::weighted_field(&sp, grid, b, f);

    let zeta1 = wf(a, weighted_dpsi_dy)?;
    let zeta2 = wf(a, weighted_dpsi_dc)?;
    let psi_m = wf(-a, weighted_psi)?;
    let anti_m = wf(-a, weighted_dpsi_dc_antiderivative)?;
    let dpsi_m = wf(-a, weighted_dpsi_dy)?;
    let dc_m = wf(-a, weighted_dpsi_dc)?;

    let parity_defect = zeta1.inner(&psi_m);
    let theta3 = 1.0 / zeta2.inner(&psi_m);

    let m = [
        [zeta1.inner(&anti_m), zeta1.inner(&psi_m)],
        [zeta2.inner(&anti_m), zeta2.inner(&psi_m)],
    ];
    let condition = condition_2x2(&m);
    if !(condition < 1e10) {
        return Err(Error::IllConditioned {
            what: "biorthogonality",
            condition,
        });
    }
    let [theta1, theta2] = solve_2x2(&m, [1.0, 0.0]);

    let eta1 = anti_m.scaled(theta1).axpy(theta2, &psi_m);
    let eta2 = psi_m.scaled(theta3);
    let d_eta1 = dc_m.scaled(theta1).axpy(theta2, &dpsi_m);
    let d_eta2 = dpsi_m.scaled(theta3);

    let psi0 = soliton::psi(&sp, grid)?;
    let anti0 = Field::from_fn(grid, |y| soliton::dpsi_dc_antiderivative_value(c, y));
    let eta1_unweighted = anti0.scaled(theta1).axpy(theta2, &psi0);
    let eta2_unweighted = psi0.scaled(theta3);

    Ok(SpectralPackage {
        params,
        zeta1,
        zeta2,
        eta1,
        eta2,
        theta1,
        theta2,
        theta3,
        d_eta1,
        d_eta2,
        eta1_unweighted,
        eta2_unweighted,
        parity_defect,
    })
}

impl SpectralPackage {
    pub fn zetas(&self) -> [&Field; 2] {
        [&self.zeta1, &self.zeta2]
    }

    pub fn etas(&self) -> [&Field; 2] {
        [&self.eta1, &self.eta2]
    }

    /// `G[j][k] = <zeta_j, eta_k>`.
    pub fn gram(&self) -> [[f64; 2]; 2] {
        let z = self.zetas();
        let e = self.etas();
        [
            [z[0].inner(e[0]), z[0].inner(e[1])],
            [z[1].inner(e[0]), z[1].inner(e[1])],
        ]
    }

    /// `(<w, eta_1>, <w, eta_2>)`.
    pub fn coefficients(&self, w: &Field) -> [f64; 2] {
        [w.inner(&self.eta1), w.inner(&self.eta2)]
    }

    pub fn project_p(&self, w: &Field) -> Field {
        let [p1, p2] = self.coefficients(w);
        self.zeta1.scaled(p1).axpy(p2, &self.zeta2)
    }

    pub fn project_q(&self, w: &Field) -> Field {
        w - &self.project_p(w)
    }

    /// `max_i |<w, eta_i>| / ||w||`, or `0` for `w = 0`.
    pub fn constraint_ratio(&self, w: &Field) -> f64 {
        let norm = w.l2_norm();
        if norm == 0.0 {
            return 0.0;
        }
        let [p1, p2] = self.coefficients(w);
        p1.abs().max(p2.abs()) / norm
    }
}

pub fn project_p(w: &Field, pkg: &SpectralPackage) -> Field {
    pkg.project_p(w)
}

pub fn project_q(w: &Field, pkg: &SpectralPackage) -> Field {
    pkg.project_q(w)
}

pub(crate) fn solve_2x2(m: &[[f64; 2]; 2], rhs: [f64; 2]) -> [f64; 2] {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    [
        (rhs[0] * m[1][1] - m[0][1] * rhs[1]) / det,
        (m[0][0] * rhs[1] - m[1][0] * rhs[0]) / det,
    ]
}

/// Spectral condition number `sigma_max / sigma_min`.
pub(crate) fn condition_2x2(m: &[[f64; 2]; 2]) -> f64 {
    let (a, b, c, d) = (m[0][0], m[0][1], m[1][0], m[1][1]);
    let fro2 = a * a + b * b + c * c + d * d;
    let det = (a * d - b * c).abs();
    if det == 0.0 {
        return f64::INFINITY;
    }
    // sigma_max^2 + sigma_min^2 = fro2, sigma_max sigma_min = det
    let disc = (fro2 * fro2 - 4.0 * det * det).max(0.0).sqrt();
    let smax2 = 0.5 * (fro2 + disc);
    let smin2 = det * det / smax2;
    (smax2 / smin2).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigenpoint {
    pub lambda: Complex64,
    /// Fraction of the eigenvector's squared mass in the outer region.
    pub boundary_mass: f64,
}

impl Eigenpoint {
    pub fn is_kernel(&self) -> bool {
        self.lambda.norm() < KERNEL_THRESHOLD
    }

    pub fn is_artifact(&self) -> bool {
        self.boundary_mass > ARTIFACT_MASS
    }
}

/// All eigenvalues of the discretized `A_a`, sorted by real part descending.
pub fn discretized_spectrum(params: &WeightParams, grid: &Grid1D) -> Result<Vec<Eigenpoint>> {
    let op = LinearizedOperator::new(params, grid)?;
    let n = grid.len();
    let schur = nalgebra::linalg::Schur::try_new(op.spectral_matrix(), f64::EPSILON, 100 * n)
        .ok_or_else(|| Error::Eigensolver("Schur iteration did not converge".into()))?;
    let (q, t) = schur.unpack();
    let scale = t.norm().max(1.0);
    let tiny = f64::EPSILON * scale;

    let outer = (1.0 - BOUNDARY_FRACTION) * grid.half_length();
    let outer_mask: Vec<bool> = (0..n).map(|m| grid.point(m).abs() > outer).collect();

    let mut out = Vec::with_capacity(n);
    let mut x = DVector::<Complex64>::zeros(n);
    for i in 0..n {
        let lambda = t[(i, i)];
        x.fill(Complex64::new(0.0, 0.0));
        x[i] = Complex64::new(1.0, 0.0);
        for j in (0..i).rev() {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in j + 1..=i {
                acc += t[(j, k)] * x[k];
            }
            let mut denom = t[(j, j)] - lambda;
            if denom.norm() < tiny {
                denom = Complex64::new(tiny, 0.0);
            }
            x[j] = -acc / denom;
        }
        let mut v: Vec<Complex64> = (&q * &x).iter().copied().collect();
        grid.ifft_inplace(&mut v);
        let total: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        let edge: f64 = v
            .iter()
            .zip(&outer_mask)
            .filter(|(_, &o)| o)
            .map(|(z, _)| z.norm_sqr())
            .sum();
        let boundary_mass = if total > 0.0 { edge / total } else { 0.0 };
        out.push(Eigenpoint {
            lambda,
            boundary_mass,
        });
    }
    out.sort_by(|p, q| q.lambda.re.total_cmp(&p.lambda.re));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, spectral_derivative};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn wide() -> Grid1D {
        make_grid(20.0 * PI, 1024).unwrap()
    }

    fn p03() -> WeightParams {
        WeightParams::new(0.3, 1.0).unwrap()
    }

    fn random_bump(g: &Grid1D, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let terms: Vec<(f64, f64, f64)> = (0..4)
            .map(|_| {
                (
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-5.0..5.0),
                    rng.random_range(0.5..2.0),
                )
            })
            .collect();
        Field::from_fn(g, |x| {
            terms
                .iter()
                .map(|(amp, x0, w)| amp * (-((x - x0) / w).powi(2)).exp())
                .sum()
        })
    }

    #[test]
    fn weight_range_is_enforced() {
        assert!(WeightParams::new(0.3, 1.0).is_ok());
        assert!(WeightParams::new(0.0, 1.0).is_err());
        assert!(WeightParams::new(0.58, 1.0).is_err());
        assert!(WeightParams::new(0.1, -1.0).is_err());
        let w = Field::zeros(&wide());
        let bad = WeightParams { a: 0.9, c: 1.0 };
        assert_eq!(apply_aa(&w, &bad).unwrap_err(), Error::Weight { a: 0.9, c: 1.0 });
    }

    #[test]
    fn zeta1_is_in_the_kernel() {
        let pkg = build_spectral_package(&p03(), &wide()).unwrap();
        let az = apply_aa(&pkg.zeta1, &pkg.params).unwrap();
        assert!(az.l2_norm() / pkg.zeta1.l2_norm() < 1e-6);
    }

    #[test]
    fn zeta2_is_a_generalized_kernel_vector() {
        let pkg = build_spectral_package(&p03(), &wide()).unwrap();
        let op = LinearizedOperator::new(&pkg.params, pkg.zeta1.grid()).unwrap();
        let az2 = op.apply(&pkg.zeta2);
        let aaz2 = op.apply(&az2);
        assert!(aaz2.l2_norm() / pkg.zeta2.l2_norm() < 1e-4);
        // least-squares coefficient of A zeta_2 along zeta_1
        let coef = az2.inner(&pkg.zeta1) / pkg.zeta1.inner(&pkg.zeta1);
        let resid = az2.axpy(-coef, &pkg.zeta1);
        assert!(resid.l2_norm() / az2.l2_norm() < 1e-4);
        assert_abs_diff_eq!(coef, -1.0, epsilon = 1e-6);
    }

    #[test]
    fn small_weight_matches_unweighted_operator() {
        let g = wide();
        let c = 1.0;
        let w = random_bump(&g, 3);
        let weighted = apply_aa(&w, &WeightParams::new(1e-8, c).unwrap()).unwrap();
        let psi = soliton::psi(&SolitonParams::centered(c).unwrap(), &g).unwrap();
        let inner = spectral_derivative(&w, 2)
            .scaled(-1.0)
            .axpy(c, &w)
            .axpy(-2.0, &psi.pointwise(&w));
        let plain = spectral_derivative(&inner, 1);
        assert!((&weighted - &plain).sup_norm() < 1e-6);
    }

    #[test]
    fn free_operator_is_the_symbol() {
        let g = make_grid(10.0, 128).unwrap();
        let params = p03();
        let op = LinearizedOperator::free(&params, &g).unwrap();
        for &k in &[1i64, 3, 17] {
            let xi = PI * k as f64 / 10.0;
            let sym = shifted_symbol(xi, params.a, params.c);
            // real part of e^{i xi y}: cos maps to Re(sym e^{i xi y})
            let f = Field::from_fn(&g, |y| (xi * y).cos());
            let expected = Field::from_fn(&g, |y| (sym * Complex64::from_polar(1.0, xi * y)).re);
            assert!((&op.apply(&f) - &expected).sup_norm() < 1e-10);
        }
        // expanded polynomial form of the symbol
        let (a, c) = (params.a, params.c);
        for &xi in &[-2.0, 0.0, 0.7, 3.1] {
            let s = shifted_symbol(xi, a, c);
            let expanded = Complex64::new(
                -3.0 * a * xi * xi - a * (c - a * a),
                xi * xi * xi + (c - 3.0 * a * a) * xi,
            );
            assert_abs_diff_eq!(s.re, expanded.re, epsilon = 1e-12);
            assert_abs_diff_eq!(s.im, expanded.im, epsilon = 1e-12);
        }
    }

    #[test]
    fn adjoint_consistency() {
        let g = wide();
        let params = p03();
        let op = LinearizedOperator::new(&params, &g).unwrap();
        for seed in 0..5 {
            let u = random_bump(&g, seed);
            let v = random_bump(&g, seed + 100);
            let lhs = op.apply(&u).inner(&v);
            let rhs = u.inner(&op.apply_adjoint(&v));
            assert!((lhs - rhs).abs() < 1e-8 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn adjoint_kernel() {
        let pkg = build_spectral_package(&p03(), &wide()).unwrap();
        let op = LinearizedOperator::new(&pkg.params, pkg.eta2.grid()).unwrap();
        let a_eta2 = op.apply_adjoint(&pkg.eta2);
        assert!(a_eta2.l2_norm() / pkg.eta2.l2_norm() < 1e-6);
    }

    #[test]
    fn biorthogonality_and_theta_values() {
        let g = wide();
        for &(a, c) in &[(0.3, 1.0), (0.1, 1.0), (0.5, 2.0), (0.2, 0.5)] {
            let pkg = build_spectral_package(&WeightParams::new(a, c).unwrap(), &g).unwrap();
            let gram = pkg.gram();
            for j in 0..2 {
                for k in 0..2 {
                    let target = if j == k { 1.0 } else { 0.0 };
                    assert!((gram[j][k] - target).abs() < 1e-8, "{a} {c} {gram:?}");
                }
            }
            // closed forms from int psi d_c psi = (9/2) sqrt(c), <d_c psi, G> = 9/(2c)
            assert_abs_diff_eq!(pkg.theta3, 2.0 / (9.0 * c.sqrt()), epsilon = 1e-9);
            assert_abs_diff_eq!(pkg.theta1, -2.0 / (9.0 * c.sqrt()), epsilon = 1e-9);
            assert_abs_diff_eq!(pkg.theta2, 2.0 / (9.0 * c * c), epsilon = 1e-9);
        }
    }

    #[test]
    fn parity_defect_vanishes() {
        let pkg = build_spectral_package(&p03(), &wide()).unwrap();
        assert!(pkg.parity_defect.abs() < 1e-9);
    }

    #[test]
    fn thetas_converge_in_domain_size() {
        let small = build_spectral_package(&p03(), &wide()).unwrap();
        let big = build_spectral_package(&p03(), &make_grid(40.0 * PI, 2048).unwrap()).unwrap();
        assert!(((small.theta1 - big.theta1) / big.theta1).abs() < 1e-6);
    }

    #[test]
    fn closed_form_derivatives_of_eta() {
        let pkg = build_spectral_package(&p03(), &wide()).unwrap();
        let a = pkg.params.a;
        // (d + a) eta_2 from the spectral derivative, eta_2 decays at both ends
        let d = spectral_derivative(&pkg.eta2, 1).axpy(a, &pkg.eta2);
        assert!((&d - &pkg.d_eta2).sup_norm() < 1e-9);
        // unweighted forms reproduce the weighted ones where e^{-ay} is harmless
        let g = pkg.eta1.grid();
        for m in (0..g.len()).step_by(7) {
            let y = g.point(m);
            if y.abs() < 20.0 {
                let expect = (-a * y).exp() * pkg.eta1_unweighted.values()[m];
                assert_abs_diff_eq!(pkg.eta1.values()[m], expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn projections() {
        let g = wide();
        let pkg = build_spectral_package(&p03(), &g).unwrap();
        let pz = pkg.project_p(&pkg.zeta1);
        assert!((&pz - &pkg.zeta1).l2_norm() < 1e-8 * pkg.zeta1.l2_norm());
        for z in pkg.zetas() {
            assert!(pkg.project_q(z).l2_norm() < 1e-8 * z.l2_norm());
        }
        for seed in 0..10 {
            let w = random_bump(&g, seed);
            let p = pkg.project_p(&w);
            let pp = pkg.project_p(&p);
            assert!((&pp - &p).l2_norm() < 1e-10 * w.l2_norm());
            let q = pkg.project_q(&w);
            let [c1, c2] = pkg.coefficients(&q);
            assert!(c1.abs().max(c2.abs()) < 1e-8 * w.l2_norm());
            assert!(pkg.project_p(&q).l2_norm() < 1e-8 * w.l2_norm());
        }
    }

    #[test]
    fn curve_values() {
        let p = p03();
        let z = continuous_spectrum_curve(0.0, &p);
        assert_abs_diff_eq!(z.re, -0.273, epsilon = 1e-12);
        assert_eq!(z.im, 0.0);
        for i in -20..20 {
            let tau = 0.3 * i as f64;
            let z = continuous_spectrum_curve(tau, &p);
            assert!(z.re <= -p.spectral_gap());
            assert!((z - shifted_symbol(tau, p.a, p.c)).norm() < 1e-12 * (1.0 + z.norm()));
            let zero = continuous_spectrum_curve(tau, &WeightParams { a: 0.0, c: 1.0 });
            assert_eq!(zero.re, 0.0);
            assert_abs_diff_eq!(zero.im, tau.powi(3) + tau, epsilon = 1e-12);
        }
        assert!(curve_distance(continuous_spectrum_curve(1.7, &p), &p) < 1e-9);
        assert_abs_diff_eq!(curve_distance(Complex64::new(0.0, 0.0), &p), 0.273, epsilon = 1e-6);
    }

    #[test]
    fn condition_number_of_2x2() {
        assert_abs_diff_eq!(condition_2x2(&[[1.0, 0.0], [0.0, 1.0]]), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(condition_2x2(&[[3.0, 0.0], [0.0, 0.5]]), 6.0, epsilon = 1e-12);
        assert_eq!(condition_2x2(&[[1.0, 2.0], [2.0, 4.0]]), f64::INFINITY);
        let x = solve_2x2(&[[2.0, 1.0], [1.0, 3.0]], [3.0, 5.0]);
        assert_abs_diff_eq!(x[0], 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], 1.4, epsilon = 1e-12);
    }

    #[test]
    fn spectrum_of_free_operator_lies_on_the_curve() {
        let g = make_grid(10.0, 64).unwrap();
        let params = p03();
        let op = LinearizedOperator::free(&params, &g).unwrap();
        let m = op.spectral_matrix();
        // without the potential the matrix is diagonal
        for i in 0..g.len() {
            assert!(curve_distance(m[(i, i)], &params) < 1e-9);
        }
    }
}
