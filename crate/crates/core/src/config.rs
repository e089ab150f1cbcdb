//! Simulation config files.
//!
//! A config is a TOML file with top-level `seed` and `n_nodes` and the
//! tables `[domain]`, `[radio]`, `[mobility]`, `[epidemic]` and
//! `[ensemble]`. Unknown keys are rejected, and every error names the
//! offending key as `table.key`.
//!
//! ```toml
//! seed = 2008
//! n_nodes = 4000
//!
//! [domain]
//! lx = 1000.0
//! ly = 1000.0
//! periodic = true
//!
//! [radio]
//! transmission_range = 50.0     # or the five raw pathloss parameters
//! interference_multiplier = 2.0
//!
//! [mobility]
//! model = "random_walk"         # static | random_walk | random_waypoint
//! step_length = 10.0
//! i_update = 1
//!
//! [epidemic]
//! lambda = 0.3
//! delta = 0.1
//! reception_mode = "ideal"      # ideal | sinr | mac_sinr
//!
//! [ensemble]
//! runs = 500
//! workers = 8
//! ```

use std::path::Path;

use serde::Deserialize;

use crate::epidemic::{EpidemicParams, ReceptionMode, Scenario};
use crate::geometry::Domain;
use crate::mobility::{MobilityKind, MobilityModel, DEFAULT_STEP_LENGTH};
use crate::radio::{RadioParams, DEFAULT_INTERFERENCE_MULTIPLIER};
use crate::topology::{grid_warning, CellGrid};
use crate::{Result, SimError};

pub const DEFAULT_MAX_STEPS: u32 = 100_000;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: u64,
    n_nodes: usize,
    domain: RawDomain,
    radio: RawRadio,
    #[serde(default)]
    mobility: RawMobility,
    epidemic: RawEpidemic,
    #[serde(default)]
    ensemble: RawEnsemble,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDomain {
    lx: f64,
    ly: f64,
    periodic: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRadio {
    transmit_power: Option<f64>,
    pathloss_constant: Option<f64>,
    pathloss_exponent: Option<f64>,
    noise: Option<f64>,
    sensitivity_threshold: Option<f64>,
    interference_multiplier: Option<f64>,
    transmission_range: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum ModelName {
    #[default]
    Static,
    RandomWalk,
    RandomWaypoint,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMobility {
    #[serde(default)]
    model: ModelName,
    step_length: Option<f64>,
    speed_min: Option<f64>,
    speed_max: Option<f64>,
    pause_steps: Option<u32>,
    #[serde(default = "one")]
    i_update: u32,
}

impl Default for RawMobility {
    fn default() -> Self {
        Self {
            model: ModelName::Static,
            step_length: None,
            speed_min: None,
            speed_max: None,
            pause_steps: None,
            i_update: 1,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEpidemic {
    lambda: f64,
    delta: f64,
    #[serde(default = "ideal")]
    reception_mode: ReceptionMode,
    #[serde(default = "default_max_steps")]
    max_steps: u32,
    #[serde(default = "one_usize")]
    initial_infected: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnsemble {
    #[serde(default = "one_usize")]
    runs: usize,
    #[serde(default = "one_usize")]
    workers: usize,
}

impl Default for RawEnsemble {
    fn default() -> Self {
        Self { runs: 1, workers: 1 }
    }
}

fn one() -> u32 {
    1
}

fn one_usize() -> usize {
    1
}

fn ideal() -> ReceptionMode {
    ReceptionMode::Ideal
}

fn default_max_steps() -> u32 {
    DEFAULT_MAX_STEPS
}

/// A validated config.
#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub seed: u64,
    pub scenario: Scenario,
    pub runs: usize,
    pub workers: usize,
    /// Non-fatal issues found while parsing.
    pub warnings: Vec<String>,
}

fn err(msg: impl Into<String>) -> SimError {
    SimError::Config(msg.into())
}

fn require(value: Option<f64>, key: &str) -> Result<f64> {
    value.ok_or_else(|| err(format!("missing key `{key}`")))
}

fn reject_unused(value: Option<impl Sized>, key: &str, model: &str) -> Result<()> {
    match value {
        Some(_) => Err(err(format!("`{key}` is not used by mobility model {model}"))),
        None => Ok(()),
    }
}

impl SimConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| err(e.to_string()))?;
        let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner().to_string();
            let inner = inner.trim();
            if path == "." || path.is_empty() {
                err(inner.to_string())
            } else {
                err(format!("{path}: {inner}"))
            }
        })?;
        Self::from_raw(raw)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    fn from_raw(raw: RawConfig) -> Result<Self> {
        let mut warnings = Vec::new();
        if raw.n_nodes < 1 {
            return Err(err("n_nodes must be >= 1"));
        }
        let domain = Domain::new(raw.domain.lx, raw.domain.ly, raw.domain.periodic)
            .map_err(|_| err("domain.lx and domain.ly must be positive"))?;

        let radio = build_radio(&raw.radio, &mut warnings)?;
        let mobility = build_mobility(&raw.mobility)?;
        mobility.check_domain(&domain).map_err(|e| err(e.to_string()))?;

        let epidemic = EpidemicParams {
            lambda: raw.epidemic.lambda,
            delta: raw.epidemic.delta,
            reception_mode: raw.epidemic.reception_mode,
            max_steps: raw.epidemic.max_steps,
            initial_infected: raw.epidemic.initial_infected,
        };
        epidemic.validate(raw.n_nodes).map_err(|e| err(e.to_string()))?;

        let ranges = [
            ("radio.transmission_range", radio.transmission_range()),
            ("radio.interference_range", radio.interference_range()),
        ];
        let checked = if epidemic.reception_mode.needs_interference() { &ranges[..] } else { &ranges[..1] };
        for &(key, range) in checked {
            if CellGrid::dimensions(&domain, range).is_err() {
                return Err(err(format!(
                    "{key} = {range} m exceeds the domain ({} x {} m)",
                    domain.lx, domain.ly
                )));
            }
            warnings.extend(grid_warning(&domain, range));
        }

        if raw.ensemble.runs < 1 {
            return Err(err("ensemble.runs must be >= 1"));
        }
        if raw.ensemble.workers < 1 {
            return Err(err("ensemble.workers must be >= 1"));
        }
        Ok(Self {
            seed: raw.seed,
            scenario: Scenario { n_nodes: raw.n_nodes, domain, radio, mobility, epidemic },
            runs: raw.ensemble.runs,
            workers: raw.ensemble.workers,
            warnings,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Result<Self> {
        if workers < 1 {
            return Err(err("ensemble.workers must be >= 1"));
        }
        self.workers = workers;
        Ok(self)
    }
}

fn build_radio(raw: &RawRadio, warnings: &mut Vec<String>) -> Result<RadioParams> {
    let multiplier = raw.interference_multiplier.unwrap_or(DEFAULT_INTERFERENCE_MULTIPLIER);
    let raw_keys = [
        raw.transmit_power,
        raw.pathloss_constant,
        raw.noise,
        raw.sensitivity_threshold,
    ];
    let to_config = |e: SimError| err(e.to_string());
    match raw.transmission_range {
        Some(range) => {
            if raw_keys.iter().any(Option::is_some) {
                warnings.push(format!(
                    "radio.transmission_range = {range} overrides the pathloss parameters; radio.noise is re-derived"
                ));
            }
            let mut params = RadioParams::new(
                raw.transmit_power.unwrap_or(1.0),
                raw.pathloss_constant.unwrap_or(1.0),
                raw.pathloss_exponent.unwrap_or(2.0),
                raw.noise.unwrap_or(1.0),
                raw.sensitivity_threshold.unwrap_or(1.0),
                multiplier,
            )
            .map_err(to_config)?;
            params.pin_range(range).map_err(|_| {
                err(format!("radio.transmission_range must be positive, got {range}"))
            })?;
            warnings.extend(params.warnings());
            Ok(params)
        }
        None => {
            let params = RadioParams::new(
                require(raw.transmit_power, "radio.transmit_power")?,
                require(raw.pathloss_constant, "radio.pathloss_constant")?,
                require(raw.pathloss_exponent, "radio.pathloss_exponent")?,
                require(raw.noise, "radio.noise")?,
                require(raw.sensitivity_threshold, "radio.sensitivity_threshold")?,
                multiplier,
            )
            .map_err(to_config)?;
            warnings.extend(params.warnings());
            Ok(params)
        }
    }
}

fn build_mobility(raw: &RawMobility) -> Result<MobilityModel> {
    let kind = match raw.model {
        ModelName::Static => {
            reject_unused(raw.step_length, "mobility.step_length", "static")?;
            reject_unused(raw.speed_min, "mobility.speed_min", "static")?;
            reject_unused(raw.speed_max, "mobility.speed_max", "static")?;
            reject_unused(raw.pause_steps, "mobility.pause_steps", "static")?;
            MobilityKind::Static
        }
        ModelName::RandomWalk => {
            reject_unused(raw.speed_min, "mobility.speed_min", "random_walk")?;
            reject_unused(raw.speed_max, "mobility.speed_max", "random_walk")?;
            reject_unused(raw.pause_steps, "mobility.pause_steps", "random_walk")?;
            MobilityKind::RandomWalk { step_length: raw.step_length.unwrap_or(DEFAULT_STEP_LENGTH) }
        }
        ModelName::RandomWaypoint => {
            reject_unused(raw.step_length, "mobility.step_length", "random_waypoint")?;
            MobilityKind::RandomWaypoint {
                speed_min: require(raw.speed_min, "mobility.speed_min")?,
                speed_max: require(raw.speed_max, "mobility.speed_max")?,
                pause_steps: raw.pause_steps.unwrap_or(0),
            }
        }
    };
    MobilityModel::new(kind, raw.i_update).map_err(|e| err(e.to_string()))
}
