//! Batch experiments: stability scenarios with their segment audit, spectrum
//! surveys and norm-estimate probes. Everything here is pure computation;
//! file formats live in the command-line crate.

use std::f64::consts::PI;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bourgain::{
    self, bilinear_ratio, embedding_constant, embedding_ratio, linear_estimate_ratio,
    resonance_defect, shell_decompose, EstimateKind, LinearInput, ProbeWindow, SpaceTimeField,
};
use crate::error::{Error, Result};
use crate::evolution::{
    Coupling, EvolutionConfig, PerturbationState, PerturbationStepper, RateMode, Scheme,
    CONSTRAINT_LIMIT,
};
use crate::grid::{make_grid, Field, Grid1D};
use crate::linearized::{build_spectral_package, discretized_spectrum, curve_distance, WeightParams};
use crate::modulation::{project_initial, reproject, ModulationState};
use crate::soliton::{self, SolitonParams};

/// Shape of the initial perturbation added to the soliton.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    /// `e^{-y^2}`
    Gaussian,
    /// `y e^{-y^2}`
    OddGaussian,
    /// Seeded sum of eight random Gaussians, scaled to unit sup norm.
    Noise,
}

impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Shape::Gaussian),
            "odd-gaussian" => Ok(Shape::OddGaussian),
            "noise" => Ok(Shape::Noise),
            other => Err(Error::InvalidArgument(format!("unknown perturbation shape '{other}'"))),
        }
    }
}

pub fn perturbation_shape(shape: Shape, grid: &Grid1D, seed: u64) -> Field {
    match shape {
        Shape::Gaussian => Field::from_fn(grid, |y| (-y * y).exp()),
        Shape::OddGaussian => Field::from_fn(grid, |y| y * (-y * y).exp()),
        Shape::Noise => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let bumps: Vec<(f64, f64, f64)> = (0..8)
                .map(|_| {
                    (
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-4.0..4.0),
                        rng.random_range(0.5..2.0),
                    )
                })
                .collect();
            let f = Field::from_fn(grid, |y| {
                bumps
                    .iter()
                    .map(|(amp, y0, w)| amp * (-((y - y0) / w).powi(2)).exp())
                    .sum()
            });
            let peak = f.sup_norm();
            if peak > 0.0 {
                f.scaled(1.0 / peak)
            } else {
                f
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub c0: f64,
    /// Weight; `a = 0` runs the unweighted contrast, where `w` is `v`.
    pub a: f64,
    pub eps: f64,
    pub eps_cap: f64,
    pub shape: Shape,
    pub half_length: f64,
    pub n_points: usize,
    pub dt: f64,
    pub t_final: f64,
    /// Segment length of the audit.
    pub delta: f64,
    /// Spacing of trajectory samples.
    pub sample_dt: f64,
    pub seed: u64,
    pub scheme: Scheme,
    /// Weight used for modulation tracking when `a = 0`.
    pub track_weight: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            c0: 1.0,
            a: 0.3,
            eps: 1e-3,
            eps_cap: 0.05,
            shape: Shape::Gaussian,
            half_length: 20.0 * PI,
            n_points: 1024,
            dt: 1e-3,
            t_final: 40.0,
            delta: 1.0,
            sample_dt: 0.1,
            seed: 0,
            scheme: Scheme::Etdrk4,
            track_weight: 0.3,
        }
    }
}

fn steps_in(span: f64, dt: f64, what: &str) -> Result<usize> {
    let n = span / dt;
    let r = n.round();
    if r < 1.0 || (n - r).abs() > 1e-6 * r.max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "{what} = {span} is not a positive multiple of dt = {dt}"
        )));
    }
    Ok(r as usize)
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        soliton::check_speed(self.c0)?;
        let limit = (self.c0 / 3.0).sqrt();
        if !(self.a >= 0.0 && self.a < limit) {
            return Err(Error::Weight { a: self.a, c: self.c0 });
        }
        if self.a == 0.0 {
            WeightParams::new(self.track_weight, self.c0)?;
        }
        if !(self.eps >= 0.0 && self.eps < self.eps_cap) {
            return Err(Error::InvalidArgument(format!(
                "eps = {} outside [0, {})",
                self.eps, self.eps_cap
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::TimeStep(self.dt));
        }
        if !(self.delta > 0.0) {
            return Err(Error::InvalidArgument(format!("delta = {} must be positive", self.delta)));
        }
        steps_in(self.t_final, self.dt, "t_final")?;
        steps_in(self.delta, self.dt, "delta")?;
        steps_in(self.sample_dt, self.dt, "sample_dt")?;
        make_grid(self.half_length, self.n_points)?;
        Ok(())
    }

    /// Weight of the tracked flow.
    pub fn tracking_weight(&self) -> f64 {
        if self.a == 0.0 {
            self.track_weight
        } else {
            self.a
        }
    }

    pub fn gap_reference(&self) -> f64 {
        self.a * (self.c0 - self.a * self.a)
    }
}

/// One trajectory sample; the `w` columns hold `v` when `a = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub l2_v: f64,
    pub h1_v: f64,
    pub l2_w: f64,
    pub h1_w: f64,
    pub c: f64,
    pub gamma: f64,
    pub cdot: f64,
    pub gammadot: f64,
    pub event: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub kind: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub n: usize,
    pub t: f64,
    /// `||w(n delta)||_{H^1}^2`
    pub n_value: f64,
    pub h1_v: f64,
    pub cdot_abs: f64,
    pub gammadot_abs: f64,
    pub c_dev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationAudit {
    pub config: ScenarioConfig,
    pub table: Vec<AuditRow>,
    pub kappa: Option<f64>,
    /// Fitted slope of `log ||w||_{H^1}`; negative when decaying.
    pub rate: Option<f64>,
    /// Decay rate `-rate`, to compare with `gap_reference`.
    pub b_fit: Option<f64>,
    pub r2: Option<f64>,
    pub gap_reference: f64,
    pub cdot_rate: Option<f64>,
    pub gammadot_rate: Option<f64>,
    pub max_h1_v: f64,
    pub c_tail_change: Option<f64>,
    /// Whether `N(n) < N(n-1)` for every segment after the transient.
    pub decreasing_after_transient: Option<bool>,
    pub max_constraint_ratio: Option<f64>,
    pub reprojections: usize,
    pub events: Vec<Event>,
    pub flags: Vec<String>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutput {
    pub trajectory: Vec<TrajectoryRow>,
    pub audit: IterationAudit,
}

/// Result of a log-linear least-squares fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Slope of `log value` against `t`.
    pub rate: f64,
    pub kappa_per_delta: f64,
    pub r2: f64,
    pub samples_used: usize,
}

/// Fit `log value = b0 + rate * t` after dropping the first 10% of samples.
pub fn fit_decay_rate(series: &[(f64, f64)], delta: f64) -> Result<DecayFit> {
    if series.len() < 5 {
        return Err(Error::InvalidArgument(format!(
            "decay fit needs at least 5 samples, got {}",
            series.len()
        )));
    }
    if let Some((t, v)) = series.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "decay fit needs positive values, got {v} at t = {t}"
        )));
    }
    let used = &series[series.len() / 10..];
    let n = used.len() as f64;
    let mt = used.iter().map(|p| p.0).sum::<f64>() / n;
    let my = used.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let (mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0);
    for &(t, v) in used {
        let (dt, dy) = (t - mt, v.ln() - my);
        stt += dt * dt;
        sty += dt * dy;
        syy += dy * dy;
    }
    if stt == 0.0 {
        return Err(Error::Degenerate("decay fit over a single time"));
    }
    let rate = sty / stt;
    let ss_res = (syy - rate * sty).max(0.0);
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(DecayFit {
        rate,
        kappa_per_delta: (rate * delta).exp(),
        r2,
        samples_used: used.len(),
    })
}

fn near_multiple(t: f64, delta: f64) -> Option<usize> {
    let q = t / delta;
    let r = q.round();
    ((q - r).abs() < 1e-6 && r >= 0.0).then_some(r as usize)
}

fn row_at(rows: &[TrajectoryRow], t: f64) -> Option<&TrajectoryRow> {
    rows.iter()
        .rev()
        .find(|r| (r.t - t).abs() < 1e-9 * t.abs().max(1.0))
}

/// Rebuild the segment audit from trajectory samples.
pub fn audit_from_trajectory(rows: &[TrajectoryRow], config: &ScenarioConfig) -> IterationAudit {
    let delta = config.delta;
    let mut flags = Vec::new();
    let mut table: Vec<AuditRow> = Vec::new();
    for r in rows {
        let Some(n) = near_multiple(r.t, delta) else { continue };
        let entry = AuditRow {
            n,
            t: r.t,
            n_value: r.h1_w * r.h1_w,
            h1_v: r.h1_v,
            cdot_abs: r.cdot.abs(),
            gammadot_abs: r.gammadot.abs(),
            c_dev: (r.c - config.c0).abs(),
        };
        match table.last_mut() {
            Some(last) if last.n == n => *last = entry,
            _ => table.push(entry),
        }
    }

    let series = |f: fn(&TrajectoryRow) -> f64| -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for r in rows {
            match out.last_mut() {
                Some(last) if last.0 == r.t => *last = (r.t, f(r)),
                _ => out.push((r.t, f(r))),
            }
        }
        out
    };
    let segments = table.len().saturating_sub(1);
    let (mut kappa, mut rate, mut b_fit, mut r2) = (None, None, None, None);
    match fit_decay_rate(&series(|r| r.h1_w), delta) {
        Ok(fit) => {
            rate = Some(fit.rate);
            b_fit = Some(-fit.rate);
            r2 = Some(fit.r2);
            if segments >= 5 {
                kappa = Some(fit.kappa_per_delta);
            } else {
                flags.push(format!("kappa undefined: only {segments} segments"));
            }
        }
        Err(e) => flags.push(format!("kappa undefined: {e}")),
    }
    let decay = |f: fn(&TrajectoryRow) -> f64, name: &str, flags: &mut Vec<String>| {
        match fit_decay_rate(&series(f), delta) {
            Ok(fit) => Some(-fit.rate),
            Err(e) => {
                flags.push(format!("{name} rate undefined: {e}"));
                None
            }
        }
    };
    let cdot_rate = decay(|r| r.cdot.abs(), "cdot", &mut flags);
    let gammadot_rate = decay(|r| r.gammadot.abs(), "gammadot", &mut flags);

    let t_end = rows.last().map_or(0.0, |r| r.t);
    let c_tail_change = match (row_at(rows, t_end), row_at(rows, 0.5 * t_end)) {
        (Some(end), Some(mid)) if t_end > 0.0 => Some((end.c - mid.c).abs()),
        _ => None,
    };
    let decreasing_after_transient = (segments >= 2).then(|| {
        let skip = (segments / 10).max(1);
        table
            .windows(2)
            .skip(skip)
            .all(|p| p[1].n_value < p[0].n_value)
    });
    let events = rows
        .iter()
        .filter(|r| !r.event.is_empty() && r.event != "start")
        .map(|r| Event {
            t: r.t,
            kind: r.event.clone(),
            detail: String::new(),
        })
        .collect::<Vec<_>>();
    IterationAudit {
        config: config.clone(),
        gap_reference: config.gap_reference(),
        kappa,
        rate,
        b_fit,
        r2,
        cdot_rate,
        gammadot_rate,
        max_h1_v: rows.iter().map(|r| r.h1_v).fold(0.0, f64::max),
        c_tail_change,
        decreasing_after_transient,
        max_constraint_ratio: None,
        reprojections: events.iter().filter(|e| e.kind == "reproject").count(),
        events,
        flags,
        failure: None,
        table,
    }
}

fn sample(state: &PerturbationState, unweighted: bool, event: &str) -> TrajectoryRow {
    let (l2_v, h1_v) = (state.v.l2_norm(), state.v.h1_norm());
    let (l2_w, h1_w) = if unweighted {
        (l2_v, h1_v)
    } else {
        (state.w.l2_norm(), state.w.h1_norm())
    };
    let m = &state.modulation;
    TrajectoryRow {
        t: state.t,
        l2_v,
        h1_v,
        l2_w,
        h1_w,
        c: m.c,
        gamma: m.gamma,
        cdot: m.cdot,
        gammadot: m.gammadot,
        event: event.to_string(),
    }
}

pub fn run_stability_scenario(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    run_stability_scenario_observed(cfg, |_| {})
}

/// Run a scenario, handing every trajectory sample to `observe` as it is
/// produced. Solver failures after the start end the run early; the partial
/// output then carries the failure record.
pub fn run_stability_scenario_observed(
    cfg: &ScenarioConfig,
    mut observe: impl FnMut(&TrajectoryRow),
) -> Result<ScenarioOutput> {
    cfg.validate()?;
    let grid = make_grid(cfg.half_length, cfg.n_points)?;
    let a = cfg.tracking_weight();
    let unweighted = cfg.a == 0.0;
    let evo = EvolutionConfig::new(cfg.dt, cfg.c0, a)?.with_scheme(cfg.scheme);
    let pkg = build_spectral_package(&WeightParams::new(a, cfg.c0)?, &grid)?;

    let base = soliton::psi(&SolitonParams::centered(cfg.c0)?, &grid)?;
    let u0 = base.axpy(cfg.eps, &perturbation_shape(cfg.shape, &grid, cfg.seed));
    let (st, v0, w0) = if cfg.eps == 0.0 {
        // the split of an exact soliton is known; projecting would only add roundoff
        (ModulationState::at_rest(cfg.c0, a), Field::zeros(&grid), Field::zeros(&grid))
    } else {
        project_initial(&u0, cfg.c0, a)?
    };
    let stepper = PerturbationStepper::new(&grid, &evo, &pkg, Coupling::FULL, RateMode::Tracked)?;

    let total = steps_in(cfg.t_final, cfg.dt, "t_final")?;
    let seg = steps_in(cfg.delta, cfg.dt, "delta")?;
    let stride = steps_in(cfg.sample_dt, cfg.dt, "sample_dt")?;

    let mut state = PerturbationState::new(v0, w0, st);
    let mut rows = vec![sample(&state, unweighted, "start")];
    observe(&rows[0]);
    let mut events = Vec::new();
    let mut failure = None;
    let mut max_ratio = pkg.constraint_ratio(&state.w);
    for n in 1..=total {
        let t = n as f64 * cfg.dt;
        let next = stepper.step(&state).and_then(|mut s| {
            s.t = t;
            let ratio = pkg.constraint_ratio(&s.w);
            max_ratio = max_ratio.max(ratio);
            if ratio > CONSTRAINT_LIMIT {
                events.push(Event {
                    t,
                    kind: "reproject".into(),
                    detail: format!("constraint ratio {ratio:.3e}"),
                });
                return reproject(&s, &pkg).map(|r| (r, "reproject"));
            }
            Ok((s, ""))
        });
        match next {
            Ok((s, event)) => {
                state = s;
                if n % stride == 0 || n % seg == 0 || !event.is_empty() {
                    let row = sample(&state, unweighted, event);
                    observe(&row);
                    rows.push(row);
                }
            }
            Err(e) => {
                events.push(Event {
                    t,
                    kind: "failure".into(),
                    detail: e.to_string(),
                });
                failure = Some(format!("t = {t}: {e}"));
                break;
            }
        }
    }

    let mut audit = audit_from_trajectory(&rows, cfg);
    audit.max_constraint_ratio = Some(max_ratio);
    audit.events = events;
    audit.failure = failure;
    Ok(ScenarioOutput {
        trajectory: rows,
        audit,
    })
}

// ---------------------------------------------------------------------------
// spectrum survey

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub a: f64,
    pub c: f64,
    pub re_lambda: f64,
    pub im_lambda: f64,
    pub is_discrete_flag: bool,
    pub boundary_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveySummary {
    pub a: f64,
    pub c: f64,
    /// Extrapolated gap when available, otherwise the raw gap.
    pub gap: f64,
    /// `-max Re lambda` over the non-kernel eigenvalues on the survey grid.
    pub gap_raw: f64,
    pub gap_reference: f64,
    pub kernel_count: usize,
    pub artifact_count: usize,
    pub max_curve_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub a: f64,
    pub c: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpectrumSurvey {
    pub rows: Vec<SpectrumRow>,
    pub summaries: Vec<SurveySummary>,
    pub skipped: Vec<SkipRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyConfig {
    pub points: Vec<(f64, f64)>,
    pub half_length: f64,
    pub n_points: usize,
    /// Combine with a half-size solve to cancel the leading box error in the gap.
    pub extrapolate: bool,
}

impl Default for SurveyConfig {
    fn default() -> Self {
        Self {
            points: vec![(0.1, 1.0), (0.3, 1.0), (0.5, 1.0)],
            half_length: 20.0 * PI,
            n_points: 512,
            extrapolate: true,
        }
    }
}

fn raw_gap(params: &WeightParams, grid: &Grid1D) -> Result<(f64, Vec<crate::linearized::Eigenpoint>)> {
    let spec = discretized_spectrum(params, grid)?;
    let top = spec
        .iter()
        .filter(|e| !e.is_kernel())
        .map(|e| e.lambda.re)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((-top, spec))
}

pub fn run_spectrum_survey(cfg: &SurveyConfig) -> Result<SpectrumSurvey> {
    let grid = make_grid(cfg.half_length, cfg.n_points)?;
    let coarse = if cfg.extrapolate && cfg.n_points >= 32 {
        Some(make_grid(0.5 * cfg.half_length, cfg.n_points / 2)?)
    } else {
        None
    };
    let mut out = SpectrumSurvey::default();
    for &(a, c) in &cfg.points {
        let params = match WeightParams::new(a, c) {
            Ok(p) => p,
            Err(e) => {
                out.skipped.push(SkipRecord {
                    a,
                    c,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let (gap_raw, spec) = raw_gap(&params, &grid)?;
        let gap = match &coarse {
            Some(g) => 2.0 * gap_raw - raw_gap(&params, g)?.0,
            None => gap_raw,
        };
        out.summaries.push(SurveySummary {
            a,
            c,
            gap,
            gap_raw,
            gap_reference: params.spectral_gap(),
            kernel_count: spec.iter().filter(|e| e.is_kernel()).count(),
            artifact_count: spec.iter().filter(|e| e.is_artifact()).count(),
            max_curve_distance: spec
                .iter()
                .filter(|e| !e.is_kernel())
                .map(|e| curve_distance(e.lambda, &params))
                .fold(0.0, f64::max),
        });
        out.rows.extend(spec.iter().map(|e| SpectrumRow {
            a,
            c,
            re_lambda: e.lambda.re,
            im_lambda: e.lambda.im,
            is_discrete_flag: e.is_kernel(),
            boundary_mass: e.boundary_mass,
        }));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// norm probes

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeKind {
    ShellParseval,
    Resonance,
    Embedding,
    Bilinear,
    AiryHom,
    AiryInhom,
    DissHom,
    DissInhom,
}

impl ProbeKind {
    pub const ALL: [ProbeKind; 8] = [
        ProbeKind::ShellParseval,
        ProbeKind::Resonance,
        ProbeKind::Embedding,
        ProbeKind::Bilinear,
        ProbeKind::AiryHom,
        ProbeKind::AiryInhom,
        ProbeKind::DissHom,
        ProbeKind::DissInhom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProbeKind::ShellParseval => "shell-parseval",
            ProbeKind::Resonance => "resonance",
            ProbeKind::Embedding => "embedding",
            ProbeKind::Bilinear => "bilinear",
            ProbeKind::AiryHom => "airy-hom",
            ProbeKind::AiryInhom => "airy-inhom",
            ProbeKind::DissHom => "diss-hom",
            ProbeKind::DissInhom => "diss-inhom",
        }
    }

    fn linear(self) -> Option<EstimateKind> {
        match self {
            ProbeKind::AiryHom => Some(EstimateKind::AiryHom),
            ProbeKind::AiryInhom => Some(EstimateKind::AiryInhom),
            ProbeKind::DissHom => Some(EstimateKind::DissHom),
            ProbeKind::DissInhom => Some(EstimateKind::DissInhom),
            _ => None,
        }
    }

    /// Whether the report is a measured estimate constant that should be
    /// stable under refinement.
    pub fn is_estimate(self) -> bool {
        matches!(self, ProbeKind::Bilinear) || self.linear().is_some()
    }
}

impl FromStr for ProbeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProbeKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown probe '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub seed: u64,
    pub s: f64,
    pub kinds: Vec<ProbeKind>,
    /// Spatial half-length of the probe grid.
    pub half_length: f64,
    /// Base resolution; every estimate is also run at twice these sizes.
    pub n_points: usize,
    pub n_t: usize,
    pub a: f64,
    pub c0: f64,
    pub parseval_samples: usize,
    pub resonance_samples: usize,
    pub embedding_samples: usize,
    pub bilinear_samples: usize,
    pub linear_samples: usize,
}

impl ProbeConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            s: 1.0,
            kinds: ProbeKind::ALL.to_vec(),
            half_length: 8.0 * PI,
            n_points: 64,
            n_t: 128,
            a: 0.3,
            c0: 1.0,
            parseval_samples: 1000,
            resonance_samples: 10_000,
            embedding_samples: 200,
            bilinear_samples: 100,
            linear_samples: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub n_points: usize,
    pub n_t: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub estimate_kind: String,
    pub s: f64,
    pub ensemble_size: usize,
    pub max_ratio: f64,
    pub mean_ratio: f64,
    pub min_ratio: f64,
    pub resolution: Resolution,
    /// The bound the ratio is checked against, when there is one.
    pub bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityCheck {
    pub estimate_kind: String,
    pub coarse: f64,
    pub fine: f64,
    pub relative_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeOutput {
    pub reports: Vec<ProbeReport>,
    pub stability: Vec<StabilityCheck>,
}

/// Window length of the probes: `[-4, 4)`, twice the support of `rho`.
const PROBE_HALF_WINDOW: f64 = 4.0;

struct Stats {
    max: f64,
    min: f64,
    sum: f64,
    n: usize,
}

impl Stats {
    fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            min: f64::INFINITY,
            sum: 0.0,
            n: 0,
        }
    }

    fn push(&mut self, x: f64) {
        self.max = self.max.max(x);
        self.min = self.min.min(x);
        self.sum += x;
        self.n += 1;
    }

    fn report(&self, kind: ProbeKind, s: f64, res: Resolution, bound: Option<f64>) -> ProbeReport {
        ProbeReport {
            estimate_kind: kind.name().to_string(),
            s,
            ensemble_size: self.n,
            max_ratio: self.max,
            mean_ratio: self.sum / self.n.max(1) as f64,
            min_ratio: self.min,
            resolution: res,
            bound,
        }
    }
}

/// Band-limited lattice coefficients, indexed by signed `(p, k)` offsets.
struct Band {
    bp: i64,
    bk: i64,
    coeffs: Vec<Complex64>,
}

impl Band {
    fn random(rng: &mut ChaCha8Rng, bp: i64, bk: i64) -> Self {
        let len = ((2 * bp + 1) * (2 * bk + 1)) as usize;
        let coeffs = (0..len)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        Self { bp, bk, coeffs }
    }

    fn field(&self, grid: &Grid1D, n_t: usize, duration: f64) -> Result<SpaceTimeField> {
        let w = 2 * self.bk + 1;
        SpaceTimeField::from_lattice(grid, n_t, -0.5 * duration, duration, |p, k| {
            if p.abs() <= self.bp && k.abs() <= self.bk {
                self.coeffs[((p + self.bp) * w + k + self.bk) as usize]
            } else {
                Complex64::default()
            }
        })
    }
}

/// Localized, oscillating initial data `sum A e^{-(x - x0)^2 / w^2} cos(k x + phi)`.
struct Packet {
    terms: Vec<[f64; 5]>,
}

impl Packet {
    fn random(rng: &mut ChaCha8Rng) -> Self {
        let terms = (0..3)
            .map(|_| {
                [
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-3.0..3.0),
                    rng.random_range(2.0..4.0),
                    rng.random_range(0.0..1.5),
                    rng.random_range(0.0..2.0 * PI),
                ]
            })
            .collect();
        Self { terms }
    }

    fn eval(&self, x: f64) -> f64 {
        self.terms
            .iter()
            .map(|[amp, x0, w, k, phi]| amp * (-((x - x0) / w).powi(2)).exp() * (k * x + phi).cos())
            .sum()
    }
}

fn probe_rng(seed: u64, kind: ProbeKind) -> ChaCha8Rng {
    let salt = ProbeKind::ALL.iter().position(|&k| k == kind).unwrap_or(0) as u64;
    ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn probe_at(cfg: &ProbeConfig, kind: ProbeKind, res: Resolution) -> Result<ProbeReport> {
    let grid = make_grid(cfg.half_length, res.n_points)?;
    let duration = 2.0 * PROBE_HALF_WINDOW;
    let mut rng = probe_rng(cfg.seed, kind);
    let mut stats = Stats::new();
    let mut bound = None;
    match kind {
        ProbeKind::ShellParseval => {
            for _ in 0..cfg.parseval_samples {
                let vals = (0..res.n_points * res.n_t)
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect();
                let f = SpaceTimeField::new(&grid, res.n_t, -PROBE_HALF_WINDOW, duration, vals)?;
                stats.push(shell_decompose(&f).total_sq() / f.l2_norm_sq());
            }
        }
        ProbeKind::Resonance => {
            for _ in 0..cfg.resonance_samples {
                let d = resonance_defect(
                    rng.random_range(-1e3..1e3),
                    rng.random_range(-10.0..10.0),
                    rng.random_range(-1e3..1e3),
                    rng.random_range(-10.0..10.0),
                );
                stats.push(d.abs());
            }
            bound = Some(1e-10);
        }
        ProbeKind::Embedding => {
            for _ in 0..cfg.embedding_samples {
                let (bp, bk) = (rng.random_range(1..40), rng.random_range(1..20));
                let band = Band::random(&mut rng, bp, bk);
                let f = band.field(&grid, res.n_t, duration)?;
                bound = Some(embedding_constant(&f, cfg.s));
                stats.push(embedding_ratio(&f, cfg.s)?);
            }
        }
        ProbeKind::Bilinear => {
            for _ in 0..cfg.bilinear_samples {
                let (bp, bk) = (rng.random_range(2..16), rng.random_range(2..12));
                let f = Band::random(&mut rng, bp, bk).field(&grid, res.n_t, duration)?;
                let g = Band::random(&mut rng, bp, bk).field(&grid, res.n_t, duration)?;
                stats.push(bilinear_ratio(&f, &g, cfg.s)?);
            }
        }
        _ => {
            let est = kind.linear().ok_or(Error::Degenerate("not a linear estimate"))?;
            let a = if est.is_dissipative() { cfg.a } else { 0.0 };
            let window = ProbeWindow {
                grid: grid.clone(),
                n_t: res.n_t,
                half_window: PROBE_HALF_WINDOW,
                a,
                c0: cfg.c0,
            };
            for i in 0..cfg.linear_samples {
                // the first sample is the narrowband Gaussian itself
                let packet = if i == 0 {
                    Packet { terms: vec![[1.0, 0.0, 8f64.sqrt(), 0.0, 0.0]] }
                } else {
                    Packet::random(&mut rng)
                };
                let ratio = match est {
                    EstimateKind::AiryHom | EstimateKind::DissHom => {
                        let f = Field::from_fn(&grid, |x| packet.eval(x));
                        linear_estimate_ratio(LinearInput::Initial(&f), est, cfg.s, &window)?
                    }
                    EstimateKind::AiryInhom | EstimateKind::DissInhom => {
                        let omega = if i == 0 { 0.0 } else { rng.random_range(0.0..3.0) };
                        let force = SpaceTimeField::from_fn(
                            &grid,
                            res.n_t,
                            -PROBE_HALF_WINDOW,
                            duration,
                            |t, x| bourgain::rho(t) * (omega * t).cos() * packet.eval(x),
                        )?;
                        linear_estimate_ratio(LinearInput::Forcing(&force), est, cfg.s, &window)?
                    }
                };
                stats.push(ratio);
            }
        }
    }
    Ok(stats.report(kind, cfg.s, res, bound))
}

/// Run every requested probe at the base resolution; estimate probes are
/// repeated with both sizes doubled and their maxima compared.
pub fn run_norm_probes(cfg: &ProbeConfig) -> Result<ProbeOutput> {
    let base = Resolution {
        n_points: cfg.n_points,
        n_t: cfg.n_t,
    };
    let fine = Resolution {
        n_points: 2 * cfg.n_points,
        n_t: 2 * cfg.n_t,
    };
    let mut reports = Vec::new();
    let mut stability = Vec::new();
    for &kind in &cfg.kinds {
        let coarse = probe_at(cfg, kind, base)?;
        if kind.is_estimate() || kind == ProbeKind::Embedding {
            let refined = probe_at(cfg, kind, fine)?;
            stability.push(StabilityCheck {
                estimate_kind: kind.name().to_string(),
                coarse: coarse.max_ratio,
                fine: refined.max_ratio,
                relative_change: (refined.max_ratio - coarse.max_ratio).abs() / coarse.max_ratio,
            });
            reports.push(coarse);
            reports.push(refined);
        } else {
            reports.push(coarse);
        }
    }
    Ok(ProbeOutput { reports, stability })
}
