//! Modulation of speed and phase so that the weighted perturbation stays in
//! the range of `Q`, i.e. `<w, eta_i> = 0` for both adjoint functions.
//!
//! Differentiating the constraint along the flow gives a 2x2 linear system for
//! the rates. With `x = (gdot, -cdot)` it reads
//!
//! ```text
//! M[i][0] = <zeta1(c), eta_i> - <w, (d+a) eta_i>
//! M[i][1] = <zeta2(c), eta_i>
//! rhs[i]  = -( 2 <(psi_c - psi_c0) w, (d+a) eta_i> - (c - c0) <w, (d+a) eta_i> + <v w, (d+a) eta_i> )
//! ```
//!
//! so that `M` is the identity at `w = 0`, `c = c0`. The `eta_i` are frozen at
//! `c0`; the `zeta_i(c)` and `psi_c` follow the current speed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::PerturbationState;
use crate::grid::{Field, Grid1D};
use crate::linearized::{
    build_spectral_package, condition_2x2, solve_2x2, SpectralPackage, WeightParams,
};
use crate::soliton::{
    self, weighted_dpsi_dc, weighted_dpsi_dy, weighted_psi, SolitonParams,
};

/// Largest condition number of the modulation matrix accepted by the solver.
pub const MAX_CONDITION: f64 = 10.0;
/// Newton iteration cap for [`project_initial`].
pub const NEWTON_MAX_ITER: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulationState {
    pub c: f64,
    pub gamma: f64,
    pub cdot: f64,
    pub gammadot: f64,
    pub c0: f64,
    pub a: f64,
}

impl ModulationState {
    pub fn at_rest(c0: f64, a: f64) -> Self {
        Self {
            c: c0,
            gamma: 0.0,
            cdot: 0.0,
            gammadot: 0.0,
            c0,
            a,
        }
    }
}

/// Soliton profiles at the current speed, sampled on the grid.
#[derive(Debug, Clone)]
pub struct Profiles {
    pub c: f64,
    pub psi: Vec<f64>,
    pub dpsi: Vec<f64>,
    pub dcpsi: Vec<f64>,
    pub zeta1: Vec<f64>,
    pub zeta2: Vec<f64>,
}

/// Precomputed pieces of the modulation system for a fixed package.
#[derive(Debug, Clone)]
pub struct RateSolver {
    grid: Grid1D,
    a: f64,
    c0: f64,
    points: Vec<f64>,
    psi0: Vec<f64>,
    eta: [Vec<f64>; 2],
    d_eta: [Vec<f64>; 2],
    potential: bool,
    nonlinear: bool,
}

fn dot(dx: f64, f: &[f64], g: &[f64]) -> f64 {
    dx * f.iter().zip(g).map(|(a, b)| a * b).sum::<f64>()
}

impl RateSolver {
    pub fn new(pkg: &SpectralPackage) -> Self {
        let grid = pkg.eta1.grid().clone();
        let c0 = pkg.params.c;
        let points = grid.points();
        let psi0 = points.iter().map(|&y| soliton::psi_value(c0, y)).collect();
        Self {
            a: pkg.params.a,
            c0,
            points,
            psi0,
            eta: [pkg.eta1.values().to_vec(), pkg.eta2.values().to_vec()],
            d_eta: [pkg.d_eta1.values().to_vec(), pkg.d_eta2.values().to_vec()],
            potential: true,
            nonlinear: true,
            grid,
        }
    }

    /// Drop the `psi_c - psi_c0` or `v w` contributions, matching a reduced flow.
    pub fn with_terms(mut self, potential: bool, nonlinear: bool) -> Self {
        self.potential = potential;
        self.nonlinear = nonlinear;
        self
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn profiles(&self, c: f64) -> Profiles {
        let a = self.a;
        let map = |f: &dyn Fn(f64) -> f64| self.points.iter().map(|&y| f(y)).collect::<Vec<_>>();
        Profiles {
            c,
            psi: map(&|y| weighted_psi(c, 0.0, y)),
            dpsi: map(&|y| weighted_dpsi_dy(c, 0.0, y)),
            dcpsi: map(&|y| weighted_dpsi_dc(c, 0.0, y)),
            zeta1: map(&|y| weighted_dpsi_dy(c, a, y)),
            zeta2: map(&|y| weighted_dpsi_dc(c, a, y)),
        }
    }

    /// The matrix and right-hand side for the unknown `(gdot, -cdot)`.
    pub fn system(
        &self,
        w: &[f64],
        v: &[f64],
        c: f64,
        profiles: &Profiles,
    ) -> ([[f64; 2]; 2], [f64; 2]) {
        let dx = self.grid.dx();
        let mut m = [[0.0; 2]; 2];
        let mut rhs = [0.0; 2];
        let dpw: Vec<f64> = if self.potential {
            profiles
                .psi
                .iter()
                .zip(&self.psi0)
                .zip(w)
                .map(|((p, p0), x)| (p - p0) * x)
                .collect()
        } else {
            vec![0.0; w.len()]
        };
        let vw: Vec<f64> = if self.nonlinear {
            v.iter().zip(w).map(|(a, b)| a * b).collect()
        } else {
            vec![0.0; w.len()]
        };
        for i in 0..2 {
            let w_deta = dot(dx, w, &self.d_eta[i]);
            m[i][0] = dot(dx, &profiles.zeta1, &self.eta[i]) - w_deta;
            m[i][1] = dot(dx, &profiles.zeta2, &self.eta[i]);
            rhs[i] = -(2.0 * dot(dx, &dpw, &self.d_eta[i]) - (c - self.c0) * w_deta
                + dot(dx, &vw, &self.d_eta[i]));
        }
        (m, rhs)
    }

    /// Solve for `(gdot, cdot)` with precomputed profiles.
    pub fn solve_with(
        &self,
        w: &[f64],
        v: &[f64],
        c: f64,
        profiles: &Profiles,
    ) -> Result<(f64, f64)> {
        let (m, rhs) = self.system(w, v, c, profiles);
        let condition = condition_2x2(&m);
        if !(condition < MAX_CONDITION) {
            return Err(Error::IllConditioned {
                what: "modulation",
                condition,
            });
        }
        let [gdot, minus_cdot] = solve_2x2(&m, rhs);
        Ok((gdot, -minus_cdot))
    }

    pub fn solve(&self, w: &Field, v: &Field, c: f64) -> Result<(f64, f64)> {
        let profiles = self.profiles(c);
        self.solve_with(w.values(), v.values(), c, &profiles)
    }
}

/// The modulation matrix and right-hand side at the given state.
pub fn modulation_system(
    w: &Field,
    v: &Field,
    st: &ModulationState,
    pkg: &SpectralPackage,
) -> ([[f64; 2]; 2], [f64; 2]) {
    let solver = RateSolver::new(pkg);
    let profiles = solver.profiles(st.c);
    solver.system(w.values(), v.values(), st.c, &profiles)
}

/// Rates `(gdot, cdot)` keeping `<w, eta_i>` constant along the flow.
pub fn solve_modulation_rates(
    w: &Field,
    v: &Field,
    st: &ModulationState,
    pkg: &SpectralPackage,
) -> Result<(f64, f64)> {
    RateSolver::new(pkg).solve(w, v, st.c)
}

/// Advance `(c, gamma)` over `dt` with constant rates `(gdot, cdot)`. This is
/// what every RK stage rule reduces to when the rates do not change.
pub fn advance_modulation(st: &ModulationState, rates: (f64, f64), dt: f64) -> ModulationState {
    let (gdot, cdot) = rates;
    ModulationState {
        c: st.c + dt * cdot,
        gamma: st.gamma + dt * gdot,
        cdot,
        gammadot: gdot,
        ..*st
    }
}

/// Result of the Newton projection.
#[derive(Debug, Clone)]
pub struct Projection {
    pub c: f64,
    pub gamma: f64,
    pub v: Field,
    pub w: Field,
    /// `max_i |F_i|` before each iteration and at the end.
    pub residuals: Vec<f64>,
}

/// Newton solve for `(c, gamma)` with `<e^{-a gamma} S_gamma wu - e^{ay} psi_c, eta_i> = 0`,
/// where `wu = e^{ay} u` and `S_gamma f = f(. + gamma)`.
fn newton_projection(
    u: &Field,
    wu: &Field,
    c_start: f64,
    pkg: &SpectralPackage,
) -> Result<Projection> {
    let grid = u.grid();
    let a = pkg.params.a;
    let sp = |c: f64| SolitonParams::centered(c);
    let weighted = |c: f64, f: fn(f64, f64, f64) -> f64| soliton::weighted_field(&sp(c)?, grid, a, f);

    let residual = |c: f64, gamma: f64| -> Result<([f64; 2], Field)> {
        let shifted = wu.shifted(gamma).scaled((-a * gamma).exp());
        let w = &shifted - &weighted(c, weighted_psi)?;
        Ok((pkg.coefficients(&w), w))
    };
    let size = |f: &[f64; 2]| f[0].abs().max(f[1].abs());

    let (mut c, mut gamma) = (c_start, 0.0);
    let (mut f, mut w) = residual(c, gamma)?;
    let mut residuals = vec![size(&f)];
    let mut converged = false;
    for _ in 0..NEWTON_MAX_ITER {
        let tol = 1e-12 * w.l2_norm() + 1e-15;
        if size(&f) <= tol {
            converged = true;
            break;
        }
        let shifted = wu.shifted(gamma);
        let e = (-a * gamma).exp();
        let zeta2 = weighted(c, weighted_dpsi_dc)?;
        let jac = [
            [-e * shifted.inner(&pkg.d_eta1), -zeta2.inner(&pkg.eta1)],
            [-e * shifted.inner(&pkg.d_eta2), -zeta2.inner(&pkg.eta2)],
        ];
        let [dg, dc] = solve_2x2(&jac, [-f[0], -f[1]]);
        if !(dg.is_finite() && dc.is_finite()) {
            break;
        }
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let (cn, gn) = (c + step * dc, gamma + step * dg);
            if cn > 0.0 {
                let (fn_, wn) = residual(cn, gn)?;
                if size(&fn_) < size(&f) {
                    c = cn;
                    gamma = gn;
                    f = fn_;
                    w = wn;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        residuals.push(size(&f));
        if !accepted {
            // no decrease possible: either at roundoff level or stuck
            converged = size(&f) <= 1e-10 * w.l2_norm() + 1e-14;
            break;
        }
    }
    if !converged {
        let tol = 1e-10 * w.l2_norm() + 1e-14;
        if size(&f) > tol {
            return Err(Error::NewtonFailed {
                iterations: residuals.len() - 1,
                residual: size(&f),
            });
        }
    }

    // remove the leftover P-component consistently from w and v
    let [p1, p2] = pkg.coefficients(&w);
    let w = w.axpy(-p1, &pkg.zeta1).axpy(-p2, &pkg.zeta2);
    let c0 = pkg.params.c;
    let base = SolitonParams::centered(c0)?;
    let v = &u.shifted(gamma) - &soliton::psi(&sp(c)?, grid)?;
    let v = v
        .axpy(-p1, &soliton::dpsi_dy(&base, grid)?)
        .axpy(-p2, &soliton::dpsi_dc(&base, grid)?);
    Ok(Projection {
        c,
        gamma,
        v,
        w,
        residuals,
    })
}

/// `e^{ay} u`, pointwise.
fn weight(u: &Field, a: f64) -> Field {
    let grid = u.grid();
    let values = u
        .values()
        .iter()
        .enumerate()
        .map(|(m, x)| {
            if *x == 0.0 {
                0.0
            } else {
                x * (a * grid.point(m)).exp()
            }
        })
        .collect();
    Field::new(grid, values)
}

/// Project raw data with a prebuilt package (built at the guessed speed).
pub fn project_with_package(u0: &Field, pkg: &SpectralPackage) -> Result<Projection> {
    newton_projection(u0, &weight(u0, pkg.params.a), pkg.params.c, pkg)
}

/// Split `u0` into a modulated soliton plus a perturbation satisfying the
/// constraint. Returns the state with rates solved at the projected data,
/// together with `v0` and `w0 = e^{ay} v0`.
pub fn project_initial(
    u0: &Field,
    c_guess: f64,
    a: f64,
) -> Result<(ModulationState, Field, Field)> {
    let pkg = build_spectral_package(&WeightParams::new(a, c_guess)?, u0.grid())?;
    let p = project_with_package(u0, &pkg)?;
    let mut st = ModulationState {
        c: p.c,
        gamma: p.gamma,
        cdot: 0.0,
        gammadot: 0.0,
        c0: c_guess,
        a,
    };
    let (gdot, cdot) = solve_modulation_rates(&p.w, &p.v, &st, &pkg)?;
    st.gammadot = gdot;
    st.cdot = cdot;
    Ok((st, p.v, p.w))
}

/// Re-impose the constraint on a running state. Only weighted quantities that
/// the flow already carries are shifted, so no bare `e^{ay}` is formed.
pub fn reproject(state: &PerturbationState, pkg: &SpectralPackage) -> Result<PerturbationState> {
    let grid = state.v.grid();
    let c = state.modulation.c;
    let sp = SolitonParams::centered(c)?;
    let u = &soliton::psi(&sp, grid)? + &state.v;
    let wu = &soliton::weighted_field(&sp, grid, pkg.params.a, weighted_psi)? + &state.w;
    let p = newton_projection(&u, &wu, c, pkg)?;
    let mut next = state.clone();
    next.modulation.c = p.c;
    next.modulation.gamma += p.gamma;
    next.v = p.v;
    next.w = p.w;
    let (gdot, cdot) = RateSolver::new(pkg).solve(&next.w, &next.v, next.modulation.c)?;
    next.modulation.gammadot = gdot;
    next.modulation.cdot = cdot;
    Ok(next)
}
