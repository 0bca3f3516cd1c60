use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kdv_core::experiments::{ProbeConfig, ProbeKind, SurveyConfig};
use kdv_lab::config::{self, parse_override};
use kdv_lab::LabError;
use log::error;

#[derive(Parser)]
#[command(name = "kdvlab", version, about = "Weighted stability experiments for KdV solitons")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a perturbed-soliton scenario and write trajectory.csv and audit.json.
    Simulate(SimulateArgs),
    /// Discretized spectrum of the weighted operator over a parameter grid.
    Spectrum(SpectrumArgs),
    /// Empirical probes of the space-time norm estimates.
    Norms(NormsArgs),
    /// Re-fit the segment audit from an existing trajectory file.
    Audit(AuditArgs),
}

#[derive(Args)]
struct ScenarioArgs {
    /// Flat key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra setting, repeatable; applied after the file.
    #[arg(long = "set", value_parser = parse_override)]
    set: Vec<(String, String)>,
    #[arg(long)]
    c0: Option<String>,
    #[arg(long)]
    a: Option<String>,
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    shape: Option<String>,
    #[arg(long)]
    half_length: Option<String>,
    #[arg(long)]
    n_points: Option<String>,
    #[arg(long)]
    dt: Option<String>,
    #[arg(long)]
    t_final: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    sample_dt: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    scheme: Option<String>,
}

impl ScenarioArgs {
    fn overrides(&self) -> Vec<(String, String)> {
        let mut out = self.set.clone();
        let flags = [
            ("c0", &self.c0),
            ("a", &self.a),
            ("eps", &self.eps),
            ("shape", &self.shape),
            ("half_length", &self.half_length),
            ("n_points", &self.n_points),
            ("dt", &self.dt),
            ("t_final", &self.t_final),
            ("delta", &self.delta),
            ("sample_dt", &self.sample_dt),
            ("seed", &self.seed),
            ("scheme", &self.scheme),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                out.push((k.to_string(), v.clone()));
            }
        }
        out
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Output directory; may also be given as `output` in the config file.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SpectrumArgs {
    /// Comma-separated weights.
    #[arg(long, default_value = "0.1,0.3,0.5")]
    a: String,
    /// Comma-separated speeds.
    #[arg(long, default_value = "1")]
    c: String,
    #[arg(long, default_value = "20pi")]
    half_length: String,
    #[arg(long, default_value_t = 512)]
    n_points: usize,
    /// Report the raw gap only, without the half-size extrapolation.
    #[arg(long)]
    no_extrapolate: bool,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct NormsArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    s: f64,
    /// Comma-separated probe names; all probes when omitted.
    #[arg(long)]
    kinds: Option<String>,
    #[arg(long)]
    n_points: Option<usize>,
    #[arg(long)]
    n_t: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    /// Output JSON file.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long)]
    trajectory: PathBuf,
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Output JSON file.
    #[arg(long)]
    output: PathBuf,
}

fn run(cli: Cli) -> Result<u8, LabError> {
    match cli.command {
        Command::Simulate(args) => {
            let (cfg, from_file) =
                config::build_scenario(args.scenario.config.as_deref(), &args.scenario.overrides())?;
            let dir = args
                .output
                .or(from_file.map(PathBuf::from))
                .ok_or_else(|| LabError::Config("no output directory given".into()))?;
            let audit = kdv_lab::simulate(&cfg, &dir)?;
            if let Some(f) = &audit.failure {
                error!("run stopped early: {f}");
                return Ok(2);
            }
            Ok(0)
        }
        Command::Spectrum(args) => {
            let (a_list, c_list) = (config::parse_list(&args.a)?, config::parse_list(&args.c)?);
            let cfg = SurveyConfig {
                points: c_list
                    .iter()
                    .flat_map(|&c| a_list.iter().map(move |&a| (a, c)))
                    .collect(),
                half_length: config::parse_real(&args.half_length)?,
                n_points: args.n_points,
                extrapolate: !args.no_extrapolate,
            };
            kdv_core::make_grid(cfg.half_length, cfg.n_points)
                .map_err(|e| LabError::Config(e.to_string()))?;
            kdv_lab::spectrum(&cfg, &args.output)?;
            Ok(0)
        }
        Command::Norms(args) => {
            let mut cfg = ProbeConfig::new(args.seed);
            cfg.s = args.s;
            if let Some(k) = &args.kinds {
                cfg.kinds = k
                    .split(',')
                    .map(|s| s.trim().parse::<ProbeKind>())
                    .collect::<Result<_, _>>()
                    .map_err(|e| LabError::Config(e.to_string()))?;
            }
            if let Some(n) = args.n_points {
                cfg.n_points = n;
            }
            if let Some(n) = args.n_t {
                cfg.n_t = n;
            }
            if let Some(n) = args.samples {
                cfg.parseval_samples = n;
                cfg.resonance_samples = n;
                cfg.embedding_samples = n;
                cfg.bilinear_samples = n;
                cfg.linear_samples = n;
            }
            if cfg.s < 0.0 && cfg.kinds.contains(&ProbeKind::Bilinear) {
                return Err(LabError::Config("the bilinear probe needs s >= 0".into()));
            }
            kdv_core::make_grid(cfg.half_length, cfg.n_points)
                .map_err(|e| LabError::Config(e.to_string()))?;
            if !cfg.n_t.is_power_of_two() || cfg.n_t < 2 {
                return Err(LabError::Config(format!("n_t = {} is not a power of two", cfg.n_t)));
            }
            kdv_lab::norms(&cfg, &args.output)?;
            Ok(0)
        }
        Command::Audit(args) => {
            let (cfg, _) =
                config::build_scenario(args.scenario.config.as_deref(), &args.scenario.overrides())?;
            kdv_lab::audit(&args.trajectory, &cfg, &args.output)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
