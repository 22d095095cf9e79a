//! Flags, the `--config` file, and their merge.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use clockstat::lindblad::{build_two_level_model, LindbladModel, TwoLevelParams};
use clockstat::range::LinRange;
use serde::Deserialize;

use crate::CliError;

pub const DEFAULT_OMEGA: f64 = 3.0;
pub const DEFAULT_GAMMA: f64 = 7.5;

#[derive(Debug, Parser)]
#[command(
    name = "clockstat",
    version,
    about = "Counting statistics and timing error of photon-click clocks",
    after_help = "Ranges use min:max:steps with inclusive endpoints.\n\
                  CLOCKSTAT_THREADS caps the number of worker threads."
)]
pub struct Cli {
    /// JSON file with default values; explicit flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing) [default: .]
    #[arg(long, short, global = true, value_name = "DIR")]
    pub output: Option<PathBuf>,
    /// Format for theta, cumulants and crosscheck results [default: csv]
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// θ(s) from the tilted generator, with the two-level closed form alongside
    Theta(ThetaArgs),
    /// Rate, variance rate, Fano factor, δτ and click-count statistics
    Cumulants(CumulantsArgs),
    /// δτ over an (Ω, γ) grid plus the γ minimizing δτ per Ω
    Sweep(SweepArgs),
    /// Quantum-jump trajectories, clock readouts and ensemble statistics
    Trajectories(TrajectoriesArgs),
    /// Waiting-time density over a (γ, t) grid and peak census
    Wtd(WtdArgs),
    /// KS test of simulated inter-click intervals against the analytic WTD
    Crosscheck(CrosscheckArgs),
}

impl Command {
    pub fn mode(&self) -> &'static str {
        match self {
            Self::Theta(_) => "theta",
            Self::Cumulants(_) => "cumulants",
            Self::Sweep(_) => "sweep",
            Self::Trajectories(_) => "trajectories",
            Self::Wtd(_) => "wtd",
            Self::Crosscheck(_) => "crosscheck",
        }
    }
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Detection efficiency in (0, 1] [default: 1]
    #[arg(long)]
    pub eta: Option<f64>,
    /// Model JSON file (explicit operators or {"tla": {...}}); overrides Ω, γ, η
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ThetaArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// [default: -0.3:0.3:61]
    #[arg(long, value_name = "MIN:MAX:STEPS", allow_hyphen_values = true)]
    pub s_range: Option<LinRange>,
}

#[derive(Debug, Args)]
pub struct CumulantsArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Readout time for δτ and N statistics [default: 1000]
    #[arg(long)]
    pub t: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// [default: 0.5:6:23]
    #[arg(long, value_name = "MIN:MAX:STEPS", allow_hyphen_values = true)]
    pub omega_range: Option<LinRange>,
    /// [default: 0.5:20:79]
    #[arg(long, value_name = "MIN:MAX:STEPS", allow_hyphen_values = true)]
    pub gamma_range: Option<LinRange>,
    /// [default: 1]
    #[arg(long)]
    pub eta: Option<f64>,
    /// [default: 1000]
    #[arg(long)]
    pub t: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrajectoriesArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// [default: 20]
    #[arg(long)]
    pub n_traj: Option<usize>,
    /// [default: 1000]
    #[arg(long)]
    pub t_max: Option<f64>,
    /// [default: 42]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Points of the uniform readout grid on [0, t_max] [default: 200]
    #[arg(long)]
    pub grid_points: Option<usize>,
}

#[derive(Debug, Args)]
pub struct WtdArgs {
    /// [default: 3]
    #[arg(long)]
    pub omega: Option<f64>,
    /// [default: 1:16:61]
    #[arg(long, value_name = "MIN:MAX:STEPS", allow_hyphen_values = true)]
    pub gamma_range: Option<LinRange>,
    /// End of the exported time grid [default: 6]
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Points of the exported time grid [default: 601]
    #[arg(long)]
    pub t_points: Option<usize>,
    /// Minimum density of a counted peak [default: 0.014]
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CrosscheckArgs {
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Number of simulated intervals [default: 100000]
    #[arg(long)]
    pub n_samples: Option<usize>,
    /// [default: 42]
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Contents of a `--config` file. Every key is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub mode: Option<String>,
    pub omega: Option<f64>,
    pub gamma: Option<f64>,
    pub eta: Option<f64>,
    /// Path (relative to the config file) or inline model object.
    pub model: Option<serde_json::Value>,
    pub s_range: Option<LinRange>,
    pub omega_range: Option<LinRange>,
    pub gamma_range: Option<LinRange>,
    pub t: Option<f64>,
    pub t_max: Option<f64>,
    pub n_traj: Option<usize>,
    pub seed: Option<u64>,
    pub grid_points: Option<usize>,
    pub t_points: Option<usize>,
    pub threshold: Option<f64>,
    pub n_samples: Option<usize>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: Self = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }
}

/// Where a model came from; the closed form only applies to `Tla`.
pub enum ModelSource {
    Tla(TwoLevelParams),
    Explicit { model: LindbladModel, label: String },
}

impl ModelSource {
    pub fn resolve(args: &ModelArgs, file: &FileConfig) -> Result<Self, CliError> {
        if let Some(path) = &args.model {
            return Self::from_path(path);
        }
        // explicit Ω/γ/η flags beat a model given in the config file
        let flags_given = args.omega.is_some() || args.gamma.is_some() || args.eta.is_some();
        if !flags_given {
            match &file.model {
                Some(serde_json::Value::String(p)) => {
                    return Self::from_path(&file.base_dir.join(p))
                }
                Some(v @ serde_json::Value::Object(_)) => {
                    return Self::from_json(&v.to_string(), "inline")
                }
                Some(_) => {
                    return Err(CliError::Usage(
                        "config `model` must be a path or an object".into(),
                    ))
                }
                None => {}
            }
        }
        let p = TwoLevelParams::new(
            pick(args.omega, file.omega, DEFAULT_OMEGA),
            pick(args.gamma, file.gamma, DEFAULT_GAMMA),
            pick(args.eta, file.eta, 1.0),
        )
        .map_err(usage)?;
        Ok(Self::Tla(p))
    }

    fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read model {}: {e}", path.display())))?;
        Self::from_json(&text, &path.display().to_string())
    }

    fn from_json(text: &str, label: &str) -> Result<Self, CliError> {
        #[derive(Deserialize)]
        struct Shorthand {
            tla: TlaFields,
        }
        #[derive(Deserialize)]
        struct TlaFields {
            omega: f64,
            gamma: f64,
            #[serde(default = "one")]
            eta: f64,
        }
        fn one() -> f64 {
            1.0
        }
        if let Ok(s) = serde_json::from_str::<Shorthand>(text) {
            let p = TwoLevelParams::new(s.tla.omega, s.tla.gamma, s.tla.eta).map_err(usage)?;
            return Ok(Self::Tla(p));
        }
        let model = LindbladModel::from_json(text).map_err(usage)?;
        Ok(Self::Explicit {
            model,
            label: label.into(),
        })
    }

    pub fn model(&self) -> Result<LindbladModel, CliError> {
        match self {
            Self::Tla(p) => build_two_level_model(p).map_err(usage),
            Self::Explicit { model, .. } => Ok(model.clone()),
        }
    }

    /// `(Ω, γ)` when the closed forms apply (two-level atom, η = 1).
    pub fn ideal_tla(&self) -> Option<(f64, f64)> {
        match self {
            Self::Tla(p) if p.eta == 1.0 => Some((p.omega, p.gamma)),
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Tla(p) => format!("tla(omega={},gamma={},eta={})", p.omega, p.gamma, p.eta),
            Self::Explicit { label, .. } => label.clone(),
        }
    }
}

pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

pub fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

pub fn require_positive(name: &str, x: f64) -> Result<f64, CliError> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(CliError::Usage(format!(
            "--{name} must be a positive number, got {x}"
        )))
    }
}
