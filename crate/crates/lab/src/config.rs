//! Flat `key = value` configuration files and command-line overrides.

use std::f64::consts::PI;
use std::path::Path;

use kdv_core::experiments::{ScenarioConfig, Shape};
use kdv_core::evolution::Scheme;

use crate::LabError;

/// Parse `key = value` lines; `#` starts a comment, blank lines are ignored.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, LabError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| LabError::Config(format!("line {}: expected key = value", i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn read_pairs(path: &Path) -> Result<Vec<(String, String)>, LabError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| LabError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_pairs(&text)
}

/// A real number, optionally written as a multiple of pi: `20pi`, `pi`.
pub fn parse_real(s: &str) -> Result<f64, LabError> {
    let t = s.trim();
    let bad = || LabError::Config(format!("not a number: '{s}'"));
    if let Some(head) = t.strip_suffix("pi") {
        let head = head.trim().trim_end_matches('*');
        let factor = if head.is_empty() { 1.0 } else { head.parse::<f64>().map_err(|_| bad())? };
        return Ok(factor * PI);
    }
    t.parse::<f64>().map_err(|_| bad())
}

fn parse_int<T: std::str::FromStr>(s: &str) -> Result<T, LabError> {
    s.trim()
        .parse()
        .map_err(|_| LabError::Config(format!("not an integer: '{s}'")))
}

/// Apply one setting; keys use the field names of [`ScenarioConfig`].
pub fn apply(cfg: &mut ScenarioConfig, key: &str, value: &str) -> Result<(), LabError> {
    match key {
        "c0" => cfg.c0 = parse_real(value)?,
        "a" => cfg.a = parse_real(value)?,
        "eps" => cfg.eps = parse_real(value)?,
        "eps_cap" => cfg.eps_cap = parse_real(value)?,
        "shape" => cfg.shape = value.parse::<Shape>().map_err(|e| LabError::Config(e.to_string()))?,
        "half_length" | "L" => cfg.half_length = parse_real(value)?,
        "n_points" | "N" => cfg.n_points = parse_int(value)?,
        "dt" => cfg.dt = parse_real(value)?,
        "t_final" | "T" => cfg.t_final = parse_real(value)?,
        "delta" => cfg.delta = parse_real(value)?,
        "sample_dt" => cfg.sample_dt = parse_real(value)?,
        "seed" => cfg.seed = parse_int(value)?,
        "scheme" => {
            cfg.scheme = value.parse::<Scheme>().map_err(|e| LabError::Config(e.to_string()))?
        }
        "track_weight" => cfg.track_weight = parse_real(value)?,
        other => return Err(LabError::Config(format!("unknown setting '{other}'"))),
    }
    Ok(())
}

/// Defaults, then the file (if any), then the overrides, in that order.
/// The `output` key is returned separately since it is not part of the run.
pub fn build_scenario(
    file: Option<&Path>,
    overrides: &[(String, String)],
) -> Result<(ScenarioConfig, Option<String>), LabError> {
    let mut cfg = ScenarioConfig::default();
    let mut output = None;
    let mut pairs = match file {
        Some(p) => read_pairs(p)?,
        None => Vec::new(),
    };
    pairs.extend(overrides.iter().cloned());
    for (k, v) in &pairs {
        if k == "output" {
            output = Some(v.clone());
        } else {
            apply(&mut cfg, k, v)?;
        }
    }
    cfg.validate().map_err(|e| LabError::Config(e.to_string()))?;
    Ok((cfg, output))
}

/// Split a `key=value` command-line override.
pub fn parse_override(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| format!("expected key=value, got '{s}'"))
}

/// Comma-separated list of reals.
pub fn parse_list(s: &str) -> Result<Vec<f64>, LabError> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(parse_real)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_skip_comments_and_blanks() {
        let p = parse_pairs("# header\n\na = 0.3  # weight\nL=20pi\n").unwrap();
        assert_eq!(p, vec![("a".into(), "0.3".into()), ("L".into(), "20pi".into())]);
        assert!(parse_pairs("nonsense").is_err());
    }

    #[test]
    fn reals_accept_pi_multiples() {
        assert_eq!(parse_real("pi").unwrap(), PI);
        assert_eq!(parse_real("20pi").unwrap(), 20.0 * PI);
        assert_eq!(parse_real("2*pi").unwrap(), 2.0 * PI);
        assert_eq!(parse_real("1e-3").unwrap(), 1e-3);
        assert!(parse_real("abc").is_err());
    }

    #[test]
    fn overrides_win_over_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "a = 0.2\neps = 1e-3\noutput = out\n").unwrap();
        let (cfg, out) = build_scenario(Some(&path), &[("a".into(), "0.4".into())]).unwrap();
        assert_eq!(cfg.a, 0.4);
        assert_eq!(cfg.eps, 1e-3);
        assert_eq!(out.as_deref(), Some("out"));
    }

    #[test]
    fn invalid_settings_are_reported() {
        assert!(build_scenario(None, &[("colour".into(), "red".into())]).is_err());
        assert!(build_scenario(None, &[("a".into(), "0.9".into())]).is_err());
        assert!(build_scenario(None, &[("n_points".into(), "1.5".into())]).is_err());
    }
}
