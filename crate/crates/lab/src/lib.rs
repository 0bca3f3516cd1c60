//! Command-line experiments on top of `kdv-core`: configuration handling,
//! output formats and the four subcommands.

pub mod config;
pub mod io;

use std::path::Path;

use kdv_core::experiments::{
    audit_from_trajectory, run_norm_probes, run_spectrum_survey, run_stability_scenario_observed,
    IterationAudit, ProbeConfig, ProbeOutput, ScenarioConfig, SpectrumSurvey, SurveyConfig,
    TrajectoryRow,
};
use log::{info, warn};

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Run(#[from] kdv_core::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl LabError {
    /// 1 for bad configuration, 2 for anything that went wrong while running.
    pub fn exit_code(&self) -> u8 {
        match self {
            LabError::Config(_) => 1,
            _ => 2,
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<(), LabError> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const AUDIT_FILE: &str = "audit.json";

/// Run a stability scenario into `out_dir`. Outputs are written even when the
/// run stops early; the returned audit then carries the failure.
pub fn simulate(cfg: &ScenarioConfig, out_dir: &Path) -> Result<IterationAudit, LabError> {
    ensure_dir(out_dir)?;
    let segment = cfg.delta;
    let out = run_stability_scenario_observed(cfg, |row| {
        let q = row.t / segment;
        if (q - q.round()).abs() < 1e-9 {
            info!("t = {:.3}  |w|_H1 = {:.3e}  |v|_H1 = {:.3e}  c = {:.9}", row.t, row.h1_w, row.h1_v, row.c);
        }
    })?;
    for e in &out.audit.events {
        match e.kind.as_str() {
            "reproject" => info!("re-projection at t = {}: {}", e.t, e.detail),
            _ => warn!("{} at t = {}: {}", e.kind, e.t, e.detail),
        }
    }
    for f in &out.audit.flags {
        warn!("{f}");
    }
    io::write_csv(&out_dir.join(TRAJECTORY_FILE), &io::TRAJECTORY_HEADER, &out.trajectory)?;
    io::write_json(&out_dir.join(AUDIT_FILE), &out.audit)?;
    Ok(out.audit)
}

pub fn spectrum(cfg: &SurveyConfig, out_dir: &Path) -> Result<SpectrumSurvey, LabError> {
    ensure_dir(out_dir)?;
    let survey = run_spectrum_survey(cfg)?;
    for s in &survey.skipped {
        warn!("skipping (a, c) = ({}, {}): {}", s.a, s.c, s.reason);
    }
    io::write_csv(&out_dir.join("spectrum.csv"), &io::SPECTRUM_HEADER, &survey.rows)?;
    io::write_csv(&out_dir.join("spectrum_summary.csv"), &io::SUMMARY_HEADER, &survey.summaries)?;
    io::write_csv(&out_dir.join("spectrum_skipped.csv"), &io::SKIPPED_HEADER, &survey.skipped)?;
    Ok(survey)
}

pub fn norms(cfg: &ProbeConfig, out_path: &Path) -> Result<ProbeOutput, LabError> {
    if let Some(dir) = out_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    let out = run_norm_probes(cfg)?;
    for s in &out.stability {
        info!(
            "{}: max ratio {:.4} -> {:.4} under doubling ({:.1}%)",
            s.estimate_kind,
            s.coarse,
            s.fine,
            100.0 * s.relative_change
        );
    }
    io::write_json(out_path, &out)?;
    Ok(out)
}

/// Recompute the audit of an existing trajectory file.
pub fn audit(trajectory: &Path, cfg: &ScenarioConfig, out_path: &Path) -> Result<IterationAudit, LabError> {
    let rows: Vec<TrajectoryRow> = io::read_csv(trajectory)?;
    let audit = audit_from_trajectory(&rows, cfg);
    for f in &audit.flags {
        warn!("{f}");
    }
    io::write_json(out_path, &audit)?;
    Ok(audit)
}
