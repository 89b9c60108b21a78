//! Batch front end: loads an experiment config, runs one command and writes
//! `report.json` and `tables.csv` (plus any snapshots) to the output directory.

pub mod config;
pub mod error;
pub mod report;

mod algebra;
mod evolution;
mod transport;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use dqfield::kleingordon::scattering::gaussian_packets;
use dqfield::kleingordon::{Potential, Propagator};
use dqfield::{ModeGrid, ModeVector};

pub use config::{Command, ExperimentConfig};
pub use error::CliError;
pub use report::{Artifacts, Check, Report, Table};

/// Validated inputs shared by every command.
pub(crate) struct Context {
    pub command: Command,
    pub config: ExperimentConfig,
    pub grid: Arc<ModeGrid>,
    pub potential: Potential,
    /// Directory that relative input paths are taken from.
    pub base_dir: PathBuf,
}

impl Context {
    pub fn propagator(&self) -> Arc<Propagator> {
        Arc::new(Propagator::new(self.grid.clone(), self.potential.clone()))
    }

    /// Seeded Gaussian packets inside the small-data ball.
    pub fn packets(&self) -> Result<Vec<ModeVector>, CliError> {
        Ok(gaussian_packets(
            &self.grid,
            self.config.samples,
            self.config.seed,
            self.config.amplitude(),
        )?)
    }

    pub fn read_input(&self, field: &str, path: &Path) -> Result<String, CliError> {
        let full = self.base_dir.join(path);
        std::fs::read_to_string(&full)
            .map_err(|e| CliError::Config(format!("inputs.{field}: cannot read {}: {e}", full.display())))
    }

    /// `Err(Config)` unless `t` is a whole number of steps.
    pub fn check_steps(&self, t: f64) -> Result<usize, CliError> {
        let dt = self.config.numerics.dt;
        let prop = Propagator::new(self.grid.clone(), Potential::zero());
        prop.step_count(t, dt)
            .map_err(|e| CliError::Config(format!("numerics: horizon {t} with dt {dt}: {e}")))
    }

    pub fn report(&self, checks: Vec<Check>, results: serde_json::Value) -> Report {
        Report::new(self.command, self.config.clone(), checks, results)
    }
}

/// Validates `config` for `command` and fills in the resolved defaults.
pub fn resolve(command: Command, mut config: ExperimentConfig) -> Result<(ExperimentConfig, Potential), CliError> {
    let potential = config.validate(command)?;
    config.command = Some(command);
    config.numerics.resonance_tol = Some(config.resonance_tol());
    config.numerics.amplitude = Some(config.amplitude());
    // Where the files go is not part of the experiment.
    config.output_dir = None;
    Ok((config, potential))
}

/// Runs `command` without touching the file system (inputs aside).
pub fn execute(command: Command, config: ExperimentConfig, base_dir: &Path) -> Result<Artifacts, CliError> {
    let (config, potential) = resolve(command, config)?;
    let grid = ModeGrid::new(config.grid).map_err(|e| CliError::Config(format!("grid: {e}")))?;
    let ctx = Context {
        command,
        config,
        grid,
        potential,
        base_dir: base_dir.to_path_buf(),
    };
    match command {
        Command::LatticeEvolve => evolution::lattice_evolve(&ctx),
        Command::WaveOperators => evolution::wave_operators(&ctx),
        Command::Scatter => evolution::scatter(&ctx),
        Command::LieCheck => algebra::lie_check(&ctx),
        Command::Linearize => algebra::linearize(&ctx),
        Command::StarCheck => algebra::star_check(&ctx),
        Command::PushStar => transport::push_star(&ctx),
        Command::HamCheck => transport::ham_check(&ctx),
    }
}

/// Runs `command` and writes its artifacts to `output_dir`. The exit code is
/// 0 when every hard check passed and 1 otherwise.
pub fn run(command: Command, config: ExperimentConfig, base_dir: &Path, output_dir: &Path) -> Result<(Artifacts, i32), CliError> {
    let artifacts = execute(command, config, base_dir)?;
    artifacts.write(output_dir)?;
    let code = if artifacts.report.passed { 0 } else { 1 };
    Ok((artifacts, code))
}
