//! Run configuration: command-line flags layered over an optional TOML file
//! layered over built-in defaults.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Parser;
use dual_elasticity::cases::CaseName;
use dual_elasticity::dtp::AuxParams;
use dual_elasticity::newton::NewtonConfig;
use serde::{Deserialize, Serialize};

/// Command-line flags. Every flag is optional; unset flags fall back to the
/// config file and then to the defaults.
#[derive(Debug, Clone, Default, Parser)]
#[command(name = "dual-elasticity", version, allow_negative_numbers = true, about = "Dual solvers for a nonconvex elastic bar, and a dual-density lab")]
pub struct Cli {
    /// Case to run, e.g. `stress_free` or `hat_bifurcation(1.0)`.
    #[arg(long)]
    pub case: Option<String>,
    /// Group of runs: statics, dynamics, convexity or all.
    #[arg(long)]
    pub suite: Option<String>,
    /// Comma-separated element counts of a static refinement study.
    #[arg(long, value_delimiter = ',')]
    pub elements: Option<Vec<usize>>,
    /// Space elements of a space-time run.
    #[arg(long)]
    pub nx: Option<usize>,
    /// Time elements of a space-time run.
    #[arg(long)]
    pub nt: Option<usize>,
    /// Length of the space-time window.
    #[arg(long = "T", value_name = "T")]
    pub final_time: Option<f64>,
    #[arg(long = "c-u")]
    pub c_u: Option<f64>,
    #[arg(long = "c-e")]
    pub c_e: Option<f64>,
    #[arg(long = "c-v")]
    pub c_v: Option<f64>,
    /// Reference density.
    #[arg(long)]
    pub rho0: Option<f64>,
    /// Newton tolerance on the largest residual entry.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long = "max-iter")]
    pub max_iter: Option<usize>,
    /// Fraction of each Newton step applied.
    #[arg(long)]
    pub damping: Option<f64>,
    /// Bump amplitude of the perturbed dynamic case.
    #[arg(long)]
    pub perturbation: Option<f64>,
    /// Also integrate the primal equations on the same window.
    #[arg(long = "compare-primal")]
    pub compare_primal: bool,
    /// Random points per model in the convexity suite.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "out-dir")]
    pub out_dir: Option<PathBuf>,
    /// TOML file with the same keys as the flags (snake_case, `T` for the window).
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Contents of a config file. Unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub case: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub suite: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elements: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nx: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nt: Option<usize>,
    #[serde(rename = "T", skip_serializing_if = "Option::is_none")]
    pub final_time: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_u: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_e: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_v: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub damping: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub compare_primal: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{field}: {message}")]
    Field { field: &'static str, message: String },
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config file {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl ConfigError {
    /// Name of the offending field, for field-level errors.
    pub fn field(&self) -> Option<&'static str> {
        match self {
            ConfigError::Field { field, .. } => Some(field),
            _ => None,
        }
    }
}

fn field_err(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        field,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Statics,
    Dynamics,
    Convexity,
    All,
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "statics" => Ok(Suite::Statics),
            "dynamics" => Ok(Suite::Dynamics),
            "convexity" => Ok(Suite::Convexity),
            "all" => Ok(Suite::All),
            other => Err(format!("unknown suite '{other}' (expected statics, dynamics, convexity or all)")),
        }
    }
}

impl std::fmt::Display for Suite {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Suite::Statics => "statics",
            Suite::Dynamics => "dynamics",
            Suite::Convexity => "convexity",
            Suite::All => "all",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Job {
    Case(CaseName),
    Suite(Suite),
}

/// A validated run request.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub job: Job,
    /// Overrides each static case's own refinement ladder.
    pub elements: Option<Vec<usize>>,
    pub nx: Option<usize>,
    pub nt: Option<usize>,
    pub final_time: Option<f64>,
    pub aux: AuxParams,
    pub newton: NewtonConfig,
    pub perturbation: f64,
    pub compare_primal: bool,
    pub samples: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
}

pub const DEFAULT_SAMPLES: usize = 100;
pub const DEFAULT_SEED: u64 = 7;
pub const DEFAULT_PERTURBATION: f64 = 3e-4;

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            job: Job::Case(CaseName::StressFree),
            elements: None,
            nx: None,
            nt: None,
            final_time: None,
            aux: AuxParams::default(),
            newton: NewtonConfig::default(),
            perturbation: DEFAULT_PERTURBATION,
            compare_primal: false,
            samples: DEFAULT_SAMPLES,
            seed: DEFAULT_SEED,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    /// Field-level checks.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if let Some(el) = &self.elements {
            if el.is_empty() {
                return Err(field_err("elements", "needs at least one mesh size"));
            }
            if el.contains(&0) {
                return Err(field_err("elements", "mesh sizes must be at least 1"));
            }
        }
        if self.nx == Some(0) {
            return Err(field_err("nx", "must be at least 1"));
        }
        if self.nt == Some(0) {
            return Err(field_err("nt", "must be at least 1"));
        }
        if let Some(t) = self.final_time {
            if !(t > 0.0 && t.is_finite()) {
                return Err(field_err("T", format!("must be positive and finite, got {t}")));
            }
        }
        for (field, v) in [
            ("c_u", self.aux.c_u),
            ("c_e", self.aux.c_e),
            ("c_v", self.aux.c_v),
            ("rho0", self.aux.rho0),
            ("tol", self.newton.tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(field_err(field, format!("must be positive and finite, got {v}")));
            }
        }
        if self.newton.max_iter == 0 {
            return Err(field_err("max_iter", "must be at least 1"));
        }
        if !(self.newton.damping > 0.0 && self.newton.damping <= 1.0) {
            return Err(field_err("damping", format!("must lie in (0, 1], got {}", self.newton.damping)));
        }
        if !(self.perturbation >= 0.0 && self.perturbation.is_finite()) {
            return Err(field_err("perturbation", format!("must be non-negative and finite, got {}", self.perturbation)));
        }
        if self.samples == 0 {
            return Err(field_err("samples", "must be at least 1"));
        }
        Ok(())
    }

    /// The resolved configuration in config-file form.
    pub fn to_file(&self) -> ConfigFile {
        let (case, suite) = match self.job {
            Job::Case(c) => (Some(c.to_string()), None),
            Job::Suite(s) => (None, Some(s.to_string())),
        };
        ConfigFile {
            case,
            suite,
            elements: self.elements.clone(),
            nx: self.nx,
            nt: self.nt,
            final_time: self.final_time,
            c_u: Some(self.aux.c_u),
            c_e: Some(self.aux.c_e),
            c_v: Some(self.aux.c_v),
            rho0: Some(self.aux.rho0),
            tol: Some(self.newton.tol),
            max_iter: Some(self.newton.max_iter),
            damping: Some(self.newton.damping),
            perturbation: Some(self.perturbation),
            compare_primal: Some(self.compare_primal),
            samples: Some(self.samples),
            seed: Some(self.seed),
            out_dir: Some(self.out_dir.clone()),
        }
    }
}

/// Parses TOML config text.
pub fn parse_config_text(text: &str, path: &Path) -> Result<ConfigFile, ConfigError> {
    toml::from_str(text).map_err(|e| ConfigError::Parse {
        path: path.to_path_buf(),
        message: e.message().to_string(),
    })
}

/// Reads the file named by `--config`, if any, applies the flags on top and
/// validates the result.
pub fn parse_config(cli: &Cli) -> Result<RunConfig, ConfigError> {
    let file = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
                path: path.clone(),
                source,
            })?;
            parse_config_text(&text, path)?
        }
        None => ConfigFile::default(),
    };
    merge(&file, cli)
}

/// Flags beat file values, which beat defaults.
pub fn merge(file: &ConfigFile, cli: &Cli) -> Result<RunConfig, ConfigError> {
    let d = RunConfig::default();
    let case = cli.case.clone().or_else(|| file.case.clone());
    let suite = cli.suite.clone().or_else(|| file.suite.clone());
    let job = match (case, suite) {
        (Some(_), Some(_)) => return Err(field_err("case", "case and suite are mutually exclusive")),
        (Some(c), None) => Job::Case(CaseName::from_str(&c).map_err(|e| field_err("case", e.to_string()))?),
        (None, Some(s)) => Job::Suite(Suite::from_str(&s).map_err(|e| field_err("suite", e))?),
        (None, None) => d.job,
    };
    let aux = AuxParams {
        c_u: cli.c_u.or(file.c_u).unwrap_or(d.aux.c_u),
        c_e: cli.c_e.or(file.c_e).unwrap_or(d.aux.c_e),
        c_v: cli.c_v.or(file.c_v).unwrap_or(d.aux.c_v),
        rho0: cli.rho0.or(file.rho0).unwrap_or(d.aux.rho0),
        ..d.aux
    };
    let newton = NewtonConfig {
        tol: cli.tol.or(file.tol).unwrap_or(d.newton.tol),
        max_iter: cli.max_iter.or(file.max_iter).unwrap_or(d.newton.max_iter),
        damping: cli.damping.or(file.damping).unwrap_or(d.newton.damping),
        ..d.newton
    };
    let config = RunConfig {
        job,
        elements: cli.elements.clone().or_else(|| file.elements.clone()),
        nx: cli.nx.or(file.nx),
        nt: cli.nt.or(file.nt),
        final_time: cli.final_time.or(file.final_time),
        aux,
        newton,
        perturbation: cli.perturbation.or(file.perturbation).unwrap_or(d.perturbation),
        compare_primal: cli.compare_primal || file.compare_primal.unwrap_or(false),
        samples: cli.samples.or(file.samples).unwrap_or(d.samples),
        seed: cli.seed.or(file.seed).unwrap_or(d.seed),
        out_dir: cli.out_dir.clone().or_else(|| file.out_dir.clone()).unwrap_or(d.out_dir),
    };
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_text(text: &str, cli: &Cli) -> Result<RunConfig, ConfigError> {
        merge(&parse_config_text(text, Path::new("test.toml"))?, cli)
    }

    #[test]
    fn empty_file_gives_defaults() {
        let c = from_text("", &Cli::default()).unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.job, Job::Case(CaseName::StressFree));
    }

    #[test]
    fn negative_c_e_names_the_field() {
        let err = from_text("c_e = -1.0", &Cli::default()).unwrap_err();
        assert_eq!(err.field(), Some("c_e"));
        assert!(err.to_string().starts_with("c_e:"));
    }

    #[test]
    fn flags_beat_file() {
        let cli = Cli {
            elements: Some(vec![10, 20]),
            ..Default::default()
        };
        let c = from_text("elements = [100, 1600]\nc_u = 3.0", &cli).unwrap();
        assert_eq!(c.elements, Some(vec![10, 20]));
        assert_eq!(c.aux.c_u, 3.0);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(
            from_text("c_q = 1.0", &Cli::default()),
            Err(ConfigError::Parse { .. })
        ));
    }

    #[test]
    fn window_key_is_capital_t() {
        let c = from_text("T = 0.5\ncase = \"grain_boundary_dynamic\"", &Cli::default()).unwrap();
        assert_eq!(c.final_time, Some(0.5));
    }

    #[test]
    fn case_and_suite_conflict() {
        let cli = Cli {
            suite: Some("convexity".into()),
            ..Default::default()
        };
        assert_eq!(from_text("case = \"stress_free\"", &cli).unwrap_err().field(), Some("case"));
    }

    #[test]
    fn flags_parse() {
        let cli = Cli::try_parse_from([
            "dual-elasticity",
            "--case",
            "stress_free",
            "--elements",
            "100,1600,8000",
            "--T",
            "0.5",
            "--c-e",
            "50",
            "--compare-primal",
        ])
        .unwrap();
        assert_eq!(cli.elements, Some(vec![100, 1600, 8000]));
        assert_eq!(cli.final_time, Some(0.5));
        assert_eq!(cli.c_e, Some(50.0));
        assert!(cli.compare_primal);
    }

    #[test]
    fn resolved_config_round_trips() {
        let c = from_text("suite = \"convexity\"\nseed = 3", &Cli::default()).unwrap();
        let text = toml::to_string(&c.to_file()).unwrap();
        assert_eq!(from_text(&text, &Cli::default()).unwrap(), c);
    }
}
