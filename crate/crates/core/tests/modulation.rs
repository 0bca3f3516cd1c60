use std::f64::consts::PI;

use kdv_core::evolution::{Coupling, EvolutionConfig, PerturbationState, PerturbationStepper, RateMode};
use kdv_core::linearized::{build_spectral_package, SpectralPackage, WeightParams};
use kdv_core::modulation::*;
use kdv_core::soliton::{self, SolitonParams};
use kdv_core::{make_grid, Error, Field, Grid1D};

const A: f64 = 0.3;

fn setup() -> (Grid1D, SpectralPackage) {
    let g = make_grid(20.0 * PI, 512).unwrap();
    let pkg = build_spectral_package(&WeightParams::new(A, 1.0).unwrap(), &g).unwrap();
    (g, pkg)
}

fn psi(g: &Grid1D, c: f64, x0: f64) -> Field {
    soliton::psi(&SolitonParams::new(c, x0).unwrap(), g).unwrap()
}

fn unweight(w: &Field) -> Field {
    let g = w.grid().clone();
    Field::from_fn(&g, {
        let mut m = 0;
        move |y| {
            let out = w.values()[m] * (-A * y).exp();
            m += 1;
            out
        }
    })
}

#[test]
fn matrix_is_identity_at_rest() {
    let (g, pkg) = setup();
    let zero = Field::zeros(&g);
    let st = ModulationState::at_rest(1.0, A);
    let (m, rhs) = modulation_system(&zero, &zero, &st, &pkg);
    for i in 0..2 {
        for j in 0..2 {
            let id = if i == j { 1.0 } else { 0.0 };
            assert!((m[i][j] - id).abs() < 1e-10, "{m:?}");
        }
        assert_eq!(rhs[i], 0.0);
    }
    assert_eq!(solve_modulation_rates(&zero, &zero, &st, &pkg).unwrap(), (0.0, 0.0));
}

#[test]
fn matrix_departs_linearly_from_identity() {
    let (g, pkg) = setup();
    let zero = Field::zeros(&g);
    let bump = pkg.project_q(&Field::from_fn(&g, |y| (-(y - 1.0).powi(2)).exp()));
    let departure = |eps: f64| {
        let st = ModulationState { c: 1.0 + eps, ..ModulationState::at_rest(1.0, A) };
        let (m, _) = modulation_system(&bump.scaled(eps), &zero, &st, &pkg);
        ((m[0][0] - 1.0).powi(2) + m[0][1].powi(2) + m[1][0].powi(2) + (m[1][1] - 1.0).powi(2)).sqrt()
    };
    let ratio = departure(1e-4) / departure(5e-5);
    assert!((ratio - 2.0).abs() < 1e-3, "{ratio}");
}

#[test]
fn rates_are_quadratically_small() {
    let (g, pkg) = setup();
    let bump = pkg.project_q(&Field::from_fn(&g, |y| (-(y + 0.5).powi(2)).exp() * (1.0 + y)));
    let size = |eps: f64| {
        let w = bump.scaled(eps);
        let v = unweight(&w);
        let st = ModulationState { c: 1.0 + 0.5 * eps, ..ModulationState::at_rest(1.0, A) };
        let (gd, cd) = solve_modulation_rates(&w, &v, &st, &pkg).unwrap();
        gd.abs() + cd.abs()
    };
    let ratio = size(1e-3) / size(5e-4);
    assert!((ratio - 4.0).abs() < 0.05, "{ratio}");
}

#[test]
fn far_from_rest_is_rejected() {
    let (g, pkg) = setup();
    let zero = Field::zeros(&g);
    let fast = ModulationState { c: 10.0, ..ModulationState::at_rest(1.0, A) };
    assert!(matches!(
        solve_modulation_rates(&zero, &zero, &fast, &pkg),
        Err(Error::IllConditioned { .. })
    ));
    // a large w along d eta_1 cancels the (0, 0) entry
    let w = pkg.d_eta1.scaled(3.6);
    let rest = ModulationState::at_rest(1.0, A);
    assert!(matches!(
        solve_modulation_rates(&w, &zero, &rest, &pkg),
        Err(Error::IllConditioned { .. })
    ));
}

/// `d/dt <v, e^{ay} eta_i>` along the unprojected `v` flow with frozen rates,
/// by Richardson-extrapolated forward differences.
fn constraint_drift(g: &Grid1D, pkg: &SpectralPackage, state: &PerturbationState, rates: (f64, f64)) -> [f64; 2] {
    let coef = |v: &Field| [v.inner(&pkg.eta1_unweighted), v.inner(&pkg.eta2_unweighted)];
    let mut st = state.clone();
    st.modulation.gammadot = rates.0;
    st.modulation.cdot = rates.1;
    let c0 = coef(&st.v);
    let slope = |dt: f64| {
        let cfg = EvolutionConfig::new(dt, 1.0, A).unwrap();
        let stepper = PerturbationStepper::new(g, &cfg, pkg, Coupling::FULL, RateMode::Frozen).unwrap();
        let c1 = coef(&stepper.step(&st).unwrap().v);
        [(c1[0] - c0[0]) / dt, (c1[1] - c0[1]) / dt]
    };
    let (s1, s2) = (slope(2e-4), slope(1e-4));
    [2.0 * s2[0] - s1[0], 2.0 * s2[1] - s1[1]]
}

#[test]
fn rates_match_finite_difference_oracle() {
    let (g, pkg) = setup();
    let w = pkg.zeta1.scaled(1e-3);
    let v = unweight(&w);
    let st = ModulationState::at_rest(1.0, A);
    let solved = solve_modulation_rates(&w, &v, &st, &pkg).unwrap();

    // the drift is affine in the rates; fit it from three evaluations
    let state = PerturbationState::new(v, w, st);
    let d = 1e-4;
    let g0 = constraint_drift(&g, &pkg, &state, (0.0, 0.0));
    let g1 = constraint_drift(&g, &pkg, &state, (d, 0.0));
    let g2 = constraint_drift(&g, &pkg, &state, (0.0, d));
    let j = [
        [(g1[0] - g0[0]) / d, (g2[0] - g0[0]) / d],
        [(g1[1] - g0[1]) / d, (g2[1] - g0[1]) / d],
    ];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let gd = (-g0[0] * j[1][1] + g0[1] * j[0][1]) / det;
    let cd = (-g0[1] * j[0][0] + g0[0] * j[1][0]) / det;
    let rel = ((gd - solved.0).powi(2) + (cd - solved.1).powi(2)).sqrt()
        / (solved.0.powi(2) + solved.1.powi(2)).sqrt();
    assert!(rel < 1e-4, "oracle ({gd}, {cd}) vs solved {solved:?}");
}

#[test]
fn projection_recovers_exact_soliton() {
    let (g, _) = setup();
    let (st, v, w) = project_initial(&psi(&g, 1.1, 0.0), 1.0, A).unwrap();
    assert!((st.c - 1.1).abs() < 1e-10);
    assert!(st.gamma.abs() < 1e-10);
    assert!(w.l2_norm() < 1e-8 && v.l2_norm() < 1e-8);
}

#[test]
fn projection_recovers_translate() {
    let (g, _) = setup();
    let (st, _, w) = project_initial(&psi(&g, 1.0, 0.2), 1.0, A).unwrap();
    assert!((st.gamma - 0.2).abs() < 1e-6);
    assert!((st.c - 1.0).abs() < 1e-8);
    assert!(w.l2_norm() < 1e-8);
}

fn perturbed(g: &Grid1D) -> Field {
    &psi(g, 1.0, 0.0) + &Field::from_fn(g, |y| 1e-3 * (-y * y).exp())
}

#[test]
fn projection_satisfies_constraint_with_quadratic_convergence() {
    let (g, pkg) = setup();
    let p = project_with_package(&perturbed(&g), &pkg).unwrap();
    let [e1, e2] = pkg.coefficients(&p.w);
    assert!(e1.abs() < 1e-10 && e2.abs() < 1e-10);
    assert!(pkg.project_p(&p.w).l2_norm() < 1e-10 * p.w.l2_norm() + 1e-14);
    let r = &p.residuals;
    assert!(r.len() >= 3);
    for k in 0..r.len() - 1 {
        if r[k] > 1e-12 && r[k + 1] > 1e-15 {
            assert!(r[k + 1] / (r[k] * r[k]) < 1e3, "{r:?}");
        }
    }
}

#[test]
fn projection_is_near_the_l2_scan_minimizer() {
    let (g, pkg) = setup();
    let u = perturbed(&g);
    let p = project_with_package(&u, &pkg).unwrap();
    let weight = Field::from_fn(&g, |y| (A * y).exp());
    let misfit = |c: f64, gamma: f64| {
        let diff = &u.shifted(gamma) - &psi(&g, c, 0.0);
        diff.pointwise(&weight).l2_norm()
    };
    let h = 2e-3;
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in -10..=10 {
        for k in -10..=10 {
            let (c, gamma) = (p.c + i as f64 * h, p.gamma + k as f64 * h);
            let m = misfit(c, gamma);
            if m < best.0 {
                best = (m, c, gamma);
            }
        }
    }
    assert!((best.1 - p.c).abs() <= h && (best.2 - p.gamma).abs() <= h, "{best:?} vs ({}, {})", p.c, p.gamma);
}

#[test]
fn projection_rejects_hopeless_data() {
    let (g, _) = setup();
    let noise = Field::from_fn(&g, |y| (3.0 * y).sin() * (-(y * y) / 50.0).exp());
    assert!(project_initial(&noise, 1.0, A).is_err());
}

#[test]
fn advance_modulation_cases() {
    let st = ModulationState::at_rest(1.0, A);
    assert_eq!(advance_modulation(&st, (0.0, 0.0), 0.1), st);
    let mut s = st;
    for _ in 0..1000 {
        s = advance_modulation(&s, (0.0, 1e-3), 1e-3);
    }
    assert!((s.c - 1.0 - 1e-3).abs() < 1e-12);
}

#[test]
fn speed_change_is_bounded_by_integrated_rate() {
    let (g, pkg) = setup();
    let (st, v, w) = project_initial(&perturbed(&g), 1.0, A).unwrap();
    let cfg = EvolutionConfig::new(1e-2, 1.0, A).unwrap();
    let stepper = PerturbationStepper::new(&g, &cfg, &pkg, Coupling::FULL, RateMode::Tracked).unwrap();
    let mut s = PerturbationState::new(v, w, st);
    for _ in 0..200 {
        s = stepper.step(&s).unwrap();
        assert!((s.modulation.c - st.c).abs() <= s.cdot_integral * (1.0 + 1e-9) + 1e-15);
        assert!(pkg.constraint_ratio(&s.w) < 1e-4);
    }
}

#[test]
fn reprojection_restores_constraint_and_keeps_the_field() {
    let (g, pkg) = setup();
    let (st, v, w) = project_initial(&perturbed(&g), 1.0, A).unwrap();
    // drift off the constraint while keeping v and w consistent
    let kick = pkg.zeta1.scaled(1e-5);
    let s = PerturbationState::new(&v + &unweight(&kick), &w + &kick, st);
    assert!(pkg.constraint_ratio(&s.w) > 1e-4);
    let r = reproject(&s, &pkg).unwrap();
    assert!(pkg.constraint_ratio(&r.w) < 1e-10);
    let (before, after) = (s.lab_field().unwrap(), r.lab_field().unwrap());
    let gap = before
        .values()
        .iter()
        .zip(after.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(gap < 1e-10, "{gap}");
}
