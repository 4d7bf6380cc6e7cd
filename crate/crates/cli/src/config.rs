//! TOML run configuration.
//!
//! ```toml
//! [game]
//! n = 2
//! density1 = { family = "gaussian", mean = 0.0, scale = 1.0 }
//! density2 = { family = "gaussian", mean = 0.0, scale = 2.0 }
//! prior = { family = "uniform01" }
//!
//! [solver]
//! tolerance = 1e-10
//!
//! [simulation]
//! rounds = 1000000
//! seed = 7
//!
//! [output]
//! dir = "results"
//! ```
//!
//! Every table rejects unknown keys. Only `[game]` is required.

use std::fs;
use std::path::{Path, PathBuf};

use disclosure_core::distributions::DensityFamily;
use disclosure_core::{GameSpec, PreferencePrior, SolverConfig, SymmetricDensity};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub game: GameSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSection {
    pub n: usize,
    pub density1: DensitySection,
    pub density2: DensitySection,
    pub prior: PriorSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySection {
    pub family: DensityFamily,
    pub mean: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorSection {
    Uniform01,
    Beta { alpha: f64, beta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            tolerance: d.tolerance,
            max_iterations: d.max_iterations,
            restarts: d.restarts,
            seed: d.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub rounds: u64,
    pub seed: u64,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            rounds: 1_000_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Directory for JSON reports.
    pub dir: PathBuf,
    /// Directory for CSV tables; relative paths are taken under `dir`.
    pub plot_dir: PathBuf,
    /// Indent JSON reports.
    pub pretty: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("."),
            plot_dir: PathBuf::from("plots"),
            pretty: true,
        }
    }
}

impl OutputSection {
    pub fn report_path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn plot_path(&self, name: &str) -> PathBuf {
        self.dir.join(&self.plot_dir).join(name)
    }
}

/// Validated numerical objects built from a [`RunConfig`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolved {
    pub spec: GameSpec,
    pub solver: SolverConfig,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let density1 = density(&self.game.density1, "game.density1")?;
        let density2 = density(&self.game.density2, "game.density2")?;
        let prior = match self.game.prior {
            PriorSection::Uniform01 => PreferencePrior::uniform(),
            PriorSection::Beta { alpha, beta } => {
                PreferencePrior::beta(alpha, beta).map_err(|e| field_error("game.prior", e))?
            }
        };
        if self.game.n == 0 {
            return Err(CliError::Config("game.n: must be >= 1 (got 0)".into()));
        }
        let spec = GameSpec::new(density1, density2, prior, self.game.n)
            .map_err(|e| field_error("game", e))?;
        let solver = SolverConfig {
            tolerance: self.solver.tolerance,
            max_iterations: self.solver.max_iterations,
            restarts: self.solver.restarts,
            seed: self.solver.seed,
        };
        solver.validate().map_err(|e| field_error("solver", e))?;
        if self.simulation.rounds == 0 {
            return Err(CliError::Config(
                "simulation.rounds: must be >= 1 (got 0)".into(),
            ));
        }
        Ok(Resolved { spec, solver })
    }
}

fn density(section: &DensitySection, path: &str) -> Result<SymmetricDensity, CliError> {
    SymmetricDensity::new(section.family, section.mean, section.scale)
        .map_err(|e| field_error(path, e))
}

fn field_error(path: &str, e: disclosure_core::Error) -> CliError {
    match e {
        disclosure_core::Error::InvalidParameter {
            field,
            value,
            requirement,
        } => CliError::Config(format!(
            "{path}.{field}: must be {requirement} (got {value})"
        )),
        other => CliError::Config(format!("{path}: {other}")),
    }
}
