use std::f64::consts::PI;

use kdv_core::evolution::*;
use kdv_core::linearized::{build_spectral_package, shifted_symbol, SpectralPackage, WeightParams};
use kdv_core::modulation::{project_initial, ModulationState};
use kdv_core::soliton::{self, SolitonParams};
use kdv_core::{make_grid, Error, Field, Grid1D};
use num_complex::Complex64;

fn sup_diff(f: &Field, g: &Field) -> f64 {
    f.values()
        .iter()
        .zip(g.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

fn bump(grid: &Grid1D) -> Field {
    Field::from_fn(grid, |x| (-(x - 1.0).powi(2)).exp() + 0.5 * (-(x + 2.0).powi(2) / 2.0).exp() * x)
}

#[test]
fn airy_group_is_unitary_and_composes() {
    let g = make_grid(10.0, 256).unwrap();
    let f = bump(&g);
    let a = apply_w1(&f, 0.7);
    assert!((a.l2_norm() - f.l2_norm()).abs() < 1e-13 * f.l2_norm());
    let two = apply_w1(&apply_w1(&f, 0.3), 0.4);
    assert!(sup_diff(&a, &two) < 1e-12);
    let back = apply_w1(&a, -0.7);
    assert!(sup_diff(&back, &f) < 1e-12);
}

#[test]
fn dissipative_group_decays_and_composes() {
    let g = make_grid(10.0, 256).unwrap();
    let cfg = EvolutionConfig::new(1e-3, 1.0, 0.3).unwrap();
    let f = bump(&g);
    for t in [0.1, 1.0, 3.0] {
        let out = apply_w2(&f, t, &cfg).unwrap();
        let bound = (-0.3 * (1.0 - 0.09) * t).exp() * f.l2_norm();
        assert!(out.l2_norm() <= bound * (1.0 + 1e-12));
    }
    let one = apply_w2(&f, 1.5, &cfg).unwrap();
    let two = apply_w2(&apply_w2(&f, 0.5, &cfg).unwrap(), 1.0, &cfg).unwrap();
    assert!(sup_diff(&one, &two) < 1e-13);
    assert!(matches!(apply_w2(&f, -0.1, &cfg), Err(Error::NegativeTime(_))));
}

#[test]
fn dissipative_group_damps_single_mode() {
    // xi = 1 on this grid: p = 3 * 0.3 + 0.3 * (1 - 0.09) = 1.173
    let g = make_grid(2.0 * PI, 64).unwrap();
    let cfg = EvolutionConfig::new(1e-3, 1.0, 0.3).unwrap();
    let f = Field::from_fn(&g, |x| x.cos());
    let out = apply_w2(&f, 1.0, &cfg).unwrap();
    let exact = Field::from_fn(&g, |x| (-1.173f64).exp() * (x + 1.0).cos());
    assert!(sup_diff(&out, &exact) < 1e-14);
}

fn soliton_field(g: &Grid1D, c: f64, x0: f64) -> Field {
    soliton::psi(&SolitonParams::new(c, x0).unwrap(), g).unwrap()
}

#[test]
fn kdv_translates_soliton() {
    let g = make_grid(20.0 * PI, 512).unwrap();
    let cfg = EvolutionConfig::new(1e-3, 1.0, 0.3).unwrap();
    let stepper = KdvStepper::new(&g, &cfg).unwrap();
    let u0 = soliton_field(&g, 1.0, 0.0);
    let e0 = lyapunov(&u0, 1.0);
    let u = stepper.evolve(&u0, 5000, |_, _| {}).unwrap();
    assert!((u.max_location() - 5.0).abs() < 1e-3);
    assert!(sup_diff(&u, &soliton_field(&g, 1.0, 5.0)) < 1e-6);
    assert!((lyapunov(&u, 1.0) - e0).abs() < 1e-6 * e0.abs());
}

#[test]
fn kdv_keeps_zero() {
    let g = make_grid(10.0, 64).unwrap();
    let cfg = EvolutionConfig::new(1e-2, 1.0, 0.3).unwrap();
    let u = KdvStepper::new(&g, &cfg).unwrap().evolve(&Field::zeros(&g), 50, |_, _| {}).unwrap();
    assert!(u.values().iter().all(|&x| x == 0.0));
}

#[test]
fn kdv_conserves_mass_and_momentum() {
    let g = make_grid(20.0 * PI, 512).unwrap();
    let u0 = &soliton_field(&g, 1.0, -10.0) + &bump(&g).scaled(0.2);
    let (m0, p0) = (u0.integral(), u0.l2_norm().powi(2));
    for scheme in [Scheme::Etdrk4, Scheme::Ifrk4] {
        let cfg = EvolutionConfig::new(1e-3, 1.0, 0.3).unwrap().with_scheme(scheme);
        let mut worst: f64 = 0.0;
        KdvStepper::new(&g, &cfg)
            .unwrap()
            .evolve(&u0, 10_000, |n, u| {
                if n % 500 == 0 {
                    worst = worst
                        .max((u.integral() - m0).abs() / m0.abs())
                        .max((u.l2_norm().powi(2) - p0).abs() / p0);
                }
            })
            .unwrap();
        assert!(worst < 1e-8, "{scheme:?}: {worst}");
    }
}

fn kdv_at(g: &Grid1D, u0: &Field, dt: f64, t: f64, scheme: Scheme) -> Field {
    let cfg = EvolutionConfig::new(dt, 1.0, 0.3).unwrap().with_scheme(scheme);
    let steps = (t / dt).round() as usize;
    KdvStepper::new(g, &cfg).unwrap().evolve(u0, steps, |_, _| {}).unwrap()
}

#[test]
fn schemes_are_fourth_order_and_agree() {
    let g = make_grid(20.0, 256).unwrap();
    let u0 = &soliton_field(&g, 2.0, 0.0) + &bump(&g).scaled(0.3);
    let reference = kdv_at(&g, &u0, 2.5e-4, 1.0, Scheme::Etdrk4);
    for scheme in [Scheme::Etdrk4, Scheme::Ifrk4] {
        let e1 = sup_diff(&kdv_at(&g, &u0, 0.01, 1.0, scheme), &reference);
        let e2 = sup_diff(&kdv_at(&g, &u0, 0.005, 1.0, scheme), &reference);
        assert!(e1 / e2 >= 8.0, "{scheme:?}: {e1} -> {e2}");
    }
    let a = kdv_at(&g, &u0, 1e-3, 1.0, Scheme::Etdrk4);
    let b = kdv_at(&g, &u0, 1e-3, 1.0, Scheme::Ifrk4);
    assert!(sup_diff(&a, &b) < 1e-8);
}

#[test]
fn config_is_validated() {
    assert!(EvolutionConfig::new(0.0, 1.0, 0.3).is_err());
    assert!(EvolutionConfig::new(1e-3, -1.0, 0.3).is_err());
    assert!(EvolutionConfig::new(1e-3, 1.0, f64::NAN).is_err());
    // the weighted flow needs 0 < a < sqrt(c0 / 3)
    assert!(EvolutionConfig::new(1e-3, 1.0, 0.6).unwrap().weight_params().is_err());
    assert_eq!("ifrk4".parse::<Scheme>().unwrap(), Scheme::Ifrk4);
    assert!("rk2".parse::<Scheme>().is_err());
}

fn package(g: &Grid1D, a: f64, c0: f64) -> SpectralPackage {
    build_spectral_package(&WeightParams::new(a, c0).unwrap(), g).unwrap()
}

#[test]
fn zero_perturbation_is_a_fixed_point() {
    let g = make_grid(20.0 * PI, 256).unwrap();
    let cfg = EvolutionConfig::new(1e-2, 1.0, 0.3).unwrap();
    let pkg = package(&g, 0.3, 1.0);
    let st = PerturbationState::new(Field::zeros(&g), Field::zeros(&g), ModulationState::at_rest(1.0, 0.3));
    let v = step_v(&st, &cfg, &pkg).unwrap();
    let w = step_w(&st, &cfg, &pkg).unwrap();
    assert!(v.sup_norm() == 0.0 && w.sup_norm() == 0.0);
}

#[test]
fn free_coupling_is_the_linear_multiplier() {
    let g = make_grid(20.0, 128).unwrap();
    let (a, c0, dt) = (0.3, 1.0, 0.05);
    let cfg = EvolutionConfig::new(dt, c0, a).unwrap();
    let pkg = package(&g, a, c0);
    let stepper = PerturbationStepper::new(&g, &cfg, &pkg, Coupling::FREE, RateMode::Frozen).unwrap();
    let f = bump(&g);
    let st = PerturbationState::new(f.clone(), f.clone(), ModulationState::at_rest(c0, a));
    let next = stepper.step(&st).unwrap();
    let v_exact = kdv_core::grid::apply_multiplier(&f, |xi| Complex64::new(0.0, dt * (xi * xi * xi + c0 * xi)).exp());
    let w_exact = kdv_core::grid::apply_multiplier(&f, |xi| (dt * shifted_symbol(xi, a, c0)).exp());
    assert!(sup_diff(&next.v, &v_exact) < 1e-12);
    assert!(sup_diff(&next.w, &w_exact) < 1e-12);
}

#[test]
fn package_mismatch_is_rejected() {
    let g = make_grid(20.0, 128).unwrap();
    let cfg = EvolutionConfig::new(1e-2, 1.0, 0.3).unwrap();
    let pkg = package(&g, 0.2, 1.0);
    assert!(PerturbationStepper::new(&g, &cfg, &pkg, Coupling::FULL, RateMode::Tracked).is_err());
}

/// Coupled run from `psi_1 + eps * bump`, returning the final state.
fn coupled_run(g: &Grid1D, eps: f64, coupling: Coupling, t: f64, dt: f64) -> (PerturbationState, f64, Field) {
    let u0 = &soliton_field(g, 1.0, 0.0) + &bump(g).scaled(eps);
    let (st, v0, w0) = project_initial(&u0, 1.0, 0.3).unwrap();
    let cfg = EvolutionConfig::new(dt, 1.0, 0.3).unwrap();
    let pkg = package(g, 0.3, 1.0);
    let stepper = PerturbationStepper::new(g, &cfg, &pkg, coupling, RateMode::Tracked).unwrap();
    let mut s = PerturbationState::new(v0, w0, st);
    for _ in 0..(t / dt).round() as usize {
        s = stepper.step(&s).unwrap();
    }
    (s, st.c, u0)
}

#[test]
fn coupled_flow_reproduces_kdv() {
    let g = make_grid(20.0 * PI, 512).unwrap();
    let (s, c_start, u0) = coupled_run(&g, 1e-2, Coupling::FULL, 1.0, 1e-3);
    let lab = s.lab_field().unwrap();
    let direct = kdv_at(&g, &u0, 1e-3, 1.0, Scheme::Etdrk4);
    assert!(sup_diff(&lab, &direct) < 1e-6, "{}", sup_diff(&lab, &direct));
    assert!((s.modulation.c - c_start).abs() <= s.cdot_integral * (1.0 + 1e-9) + 1e-15);
}

#[test]
fn linear_coupling_differs_at_second_order() {
    let g = make_grid(20.0 * PI, 256).unwrap();
    let mut gaps = Vec::new();
    for eps in [1e-3, 5e-4] {
        let (full, _, _) = coupled_run(&g, eps, Coupling::FULL, 0.5, 1e-2);
        let (lin, _, _) = coupled_run(&g, eps, Coupling::LINEAR, 0.5, 1e-2);
        gaps.push(sup_diff(&full.v, &lin.v));
    }
    let ratio = gaps[0] / gaps[1];
    assert!((3.5..4.5).contains(&ratio), "{gaps:?}");
}

#[test]
fn constraint_is_preserved_by_tracked_flow() {
    let g = make_grid(20.0 * PI, 512).unwrap();
    let (s, _, _) = coupled_run(&g, 1e-3, Coupling::FULL, 2.0, 1e-2);
    let pkg = package(&g, 0.3, 1.0);
    assert!(pkg.constraint_ratio(&s.w) < 1e-6);
}
