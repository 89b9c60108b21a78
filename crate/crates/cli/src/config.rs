//! Experiment configuration: parsing, defaults and field-level validation.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use dqfield::formal::ResonancePolicy;
use dqfield::kleingordon::{Direction, Potential, PotentialSpec, SmallDataBall};
use dqfield::GridSpec;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    LatticeEvolve,
    WaveOperators,
    Scatter,
    LieCheck,
    Linearize,
    StarCheck,
    PushStar,
    HamCheck,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::LatticeEvolve,
        Command::WaveOperators,
        Command::Scatter,
        Command::LieCheck,
        Command::Linearize,
        Command::StarCheck,
        Command::PushStar,
        Command::HamCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::LatticeEvolve => "lattice-evolve",
            Command::WaveOperators => "wave-operators",
            Command::Scatter => "scatter",
            Command::LieCheck => "lie-check",
            Command::Linearize => "linearize",
            Command::StarCheck => "star-check",
            Command::PushStar => "push-star",
            Command::HamCheck => "ham-check",
        }
    }

    /// Commands that run the interacting flow and need a Hamiltonian bounded below.
    pub fn integrates(self, transport: TransportChoice) -> bool {
        match self {
            Command::LatticeEvolve | Command::WaveOperators | Command::Scatter => true,
            Command::PushStar | Command::HamCheck => transport == TransportChoice::Numeric,
            _ => false,
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown command {s:?}"))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportChoice {
    /// Formal linearizing series, read from `inputs.omega` or solved for.
    #[default]
    Formal,
    /// The numerically integrated wave operator.
    Numeric,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative drift of `H` along `lattice-evolve`.
    pub energy_drift: f64,
    /// Absolute drift of each `P_j` along `lattice-evolve`.
    pub momentum: f64,
    /// Closure residual of pairs free of boosts and rotations.
    pub closure: f64,
    /// Intertwining residual of `P0` after `linearize`.
    pub intertwining: f64,
    /// Associativity and definition residuals of star products, relative.
    pub associativity: f64,
    /// `star_bracket` at `hbar^0` against `poisson`.
    pub bracket: f64,
    /// Relative `H` residual of the wave operator at the largest horizon.
    pub linearization: f64,
    /// Relative change of `H0` under the scattering operator.
    pub scatter_energy: f64,
    /// Star-power identity at represented degrees.
    pub ham: f64,
    /// Relative round trip of the wave operator or of a formal `Omega`.
    pub round_trip: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            energy_drift: 1e-6,
            momentum: 1e-10,
            closure: 1e-12,
            intertwining: 1e-10,
            associativity: 1e-11,
            bracket: 1e-12,
            linearization: 1e-3,
            scatter_energy: 1e-3,
            ham: 1e-10,
            round_trip: 1e-8,
        }
    }
}

impl Tolerances {
    fn entries(&self) -> [(&'static str, f64); 10] {
        [
            ("energy_drift", self.energy_drift),
            ("momentum", self.momentum),
            ("closure", self.closure),
            ("intertwining", self.intertwining),
            ("associativity", self.associativity),
            ("bracket", self.bracket),
            ("linearization", self.linearization),
            ("scatter_energy", self.scatter_energy),
            ("ham", self.ham),
            ("round_trip", self.round_trip),
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Numerics {
    pub dt: f64,
    pub horizons: Vec<f64>,
    pub degree_cap: usize,
    pub hbar_order: usize,
    /// Defaults to `mass / 100`.
    pub resonance_tol: Option<f64>,
    pub resonance_policy: ResonancePolicy,
    pub direction: Direction,
    pub transport: TransportChoice,
    /// Star powers checked by `ham-check`.
    pub powers: Vec<usize>,
    pub ball: SmallDataBall,
    /// Sup norm of the sample packets; defaults to the ball radius.
    pub amplitude: Option<f64>,
    /// Steps between rows of the `lattice-evolve` table.
    pub record_every: usize,
    /// Width and amplitude of the probe packets used by `lie-check`.
    pub probe_width: f64,
    pub probe_amplitude: f64,
    pub tolerances: Tolerances,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            dt: 0.01,
            horizons: vec![12.5, 25.0, 50.0],
            degree_cap: 3,
            hbar_order: 1,
            resonance_tol: None,
            resonance_policy: ResonancePolicy::Report,
            direction: Direction::Plus,
            transport: TransportChoice::Formal,
            powers: vec![1, 2],
            ball: SmallDataBall::default(),
            amplitude: None,
            record_every: 100,
            probe_width: 2.0,
            probe_amplitude: 0.5,
            tolerances: Tolerances::default(),
        }
    }
}

/// Files consumed by some commands; relative paths are taken from the config's directory.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Inputs {
    /// Functionals for `star-check`.
    pub left: Option<PathBuf>,
    pub right: Option<PathBuf>,
    /// A serialized formal series for `push-star` and `ham-check`.
    pub omega: Option<PathBuf>,
    /// Initial mode vector for `lattice-evolve`, instead of packets.
    pub initial: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    pub grid: GridSpec,
    #[serde(default)]
    pub potential: PotentialSpec,
    #[serde(default)]
    pub numerics: Numerics,
    /// Number of sample packets.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub inputs: Inputs,
}

fn default_samples() -> usize {
    4
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn resonance_tol(&self) -> f64 {
        self.numerics.resonance_tol.unwrap_or(self.grid.mass / 100.0)
    }

    pub fn amplitude(&self) -> f64 {
        let b = &self.numerics.ball;
        self.numerics.amplitude.unwrap_or(b.phi_max.min(b.pi_max))
    }

    /// Field-level checks; the potential is parsed here as well.
    pub fn validate(&self, command: Command) -> Result<Potential, CliError> {
        let bad = |field: &str, msg: String| CliError::Config(format!("{field}: {msg}"));
        self.grid.validate().map_err(|e| bad("grid", e.to_string()))?;
        let potential = Potential::new(&self.potential).map_err(|e| bad("potential", e.to_string()))?;
        let n = &self.numerics;
        if !(n.dt.is_finite() && n.dt > 0.0) {
            return Err(bad("numerics.dt", format!("{} (must be positive)", n.dt)));
        }
        if n.horizons.is_empty() {
            return Err(bad("numerics.horizons", "at least one horizon is required".into()));
        }
        for (i, &t) in n.horizons.iter().enumerate() {
            if !(t.is_finite() && t > 0.0) {
                return Err(bad(&format!("numerics.horizons[{i}]"), format!("{t} (must be positive)")));
            }
            if i > 0 && t <= n.horizons[i - 1] {
                return Err(bad("numerics.horizons", "must be strictly increasing".into()));
            }
        }
        if n.degree_cap == 0 {
            return Err(bad("numerics.degree_cap", "must be at least 1".into()));
        }
        if let Some(tol) = n.resonance_tol {
            if !(tol.is_finite() && tol > 0.0) {
                return Err(bad("numerics.resonance_tol", format!("{tol} (must be positive)")));
            }
        }
        if n.powers.is_empty() || n.powers.contains(&0) {
            return Err(bad("numerics.powers", "star powers must be at least 1".into()));
        }
        for (name, v) in [
            ("numerics.ball.phi_max", n.ball.phi_max),
            ("numerics.ball.pi_max", n.ball.pi_max),
            ("numerics.probe_width", n.probe_width),
            ("numerics.probe_amplitude", n.probe_amplitude),
            ("numerics.amplitude", self.amplitude()),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(bad(name, format!("{v} (must be positive)")));
            }
        }
        if n.record_every == 0 {
            return Err(bad("numerics.record_every", "must be at least 1".into()));
        }
        for (name, v) in n.tolerances.entries() {
            if !(v.is_finite() && v > 0.0) {
                return Err(bad(&format!("numerics.tolerances.{name}"), format!("{v} (must be positive)")));
            }
        }
        if self.samples == 0 {
            return Err(bad("samples", "at least one sample is required".into()));
        }
        if let Some(c) = self.command {
            if c != command {
                return Err(bad("command", format!("config is for {c}, but {command} was requested")));
            }
        }
        if command == Command::StarCheck && (self.inputs.left.is_none() != self.inputs.right.is_none()) {
            return Err(bad("inputs", "give both left and right functionals, or neither".into()));
        }
        if command.integrates(n.transport) {
            potential
                .positivity_certificate(self.grid.mass)
                .map_err(|e| bad("potential", e.to_string()))?;
        }
        Ok(potential)
    }
}
