//! Node mobility: static placement, fixed-length random walks and random
//! waypoint motion. One call to [`Mobility::update_positions`] is one
//! movement event; the epidemic driver issues one every `i_update` steps.

use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{Domain, Position};
use crate::rng::SimRng;
use crate::{Result, SimError};

pub const DEFAULT_STEP_LENGTH: f64 = 10.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum MobilityKind {
    Static,
    /// Fixed-length steps in a uniformly random direction.
    RandomWalk { step_length: f64 },
    /// Speeds are in meters per movement event.
    RandomWaypoint { speed_min: f64, speed_max: f64, pause_steps: u32 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MobilityModel {
    pub kind: MobilityKind,
    /// Epidemic steps between movement events.
    pub i_update: u32,
}

impl MobilityModel {
    pub fn new(kind: MobilityKind, i_update: u32) -> Result<Self> {
        let m = Self { kind, i_update };
        m.validate()?;
        Ok(m)
    }

    pub fn fixed() -> Self {
        Self { kind: MobilityKind::Static, i_update: 1 }
    }

    pub fn random_walk(step_length: f64, i_update: u32) -> Result<Self> {
        Self::new(MobilityKind::RandomWalk { step_length }, i_update)
    }

    pub fn is_static(&self) -> bool {
        matches!(self.kind, MobilityKind::Static)
    }

    pub fn validate(&self) -> Result<()> {
        if self.i_update < 1 {
            return Err(SimError::InvalidParameter("mobility.i_update must be >= 1".into()));
        }
        match self.kind {
            MobilityKind::Static => {}
            MobilityKind::RandomWalk { step_length } => {
                if !(step_length.is_finite() && step_length > 0.0) {
                    return Err(SimError::InvalidParameter(format!(
                        "mobility.step_length must be positive, got {step_length}"
                    )));
                }
            }
            MobilityKind::RandomWaypoint { speed_min, speed_max, .. } => {
                if !(speed_min.is_finite() && speed_max.is_finite() && 0.0 < speed_min && speed_min <= speed_max) {
                    return Err(SimError::InvalidParameter(format!(
                        "mobility speeds must satisfy 0 < speed_min <= speed_max, got {speed_min}, {speed_max}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Checks that the model is usable on `domain`.
    pub fn check_domain(&self, domain: &Domain) -> Result<()> {
        if domain.periodic && matches!(self.kind, MobilityKind::RandomWaypoint { .. }) {
            return Err(SimError::InvalidParameter(
                "random_waypoint mobility requires domain.periodic = false".into(),
            ));
        }
        Ok(())
    }
}

/// Moves `p` by `length` in direction `theta` and maps the result back
/// into the domain.
pub fn displace(p: Position, length: f64, theta: f64, domain: &Domain) -> Result<Position> {
    let (s, c) = theta.sin_cos();
    domain.canonicalize(Position::new(p.x + length * c, p.y + length * s))
}

pub fn step_random_walk(p: Position, step_length: f64, domain: &Domain, rng: &mut SimRng) -> Result<Position> {
    let theta = rng.gen_range(0.0..TAU);
    displace(p, step_length, theta, domain)
}

/// Per-node random-waypoint state.
#[derive(Clone, Debug, PartialEq)]
pub struct Waypoint {
    pub target: Position,
    pub speed: f64,
    /// Movement events left to wait at the current target.
    pub pause_left: u32,
}

impl Waypoint {
    pub fn draw(domain: &Domain, speed_min: f64, speed_max: f64, rng: &mut SimRng) -> Self {
        let target = uniform_position(domain, rng);
        let speed = if speed_min < speed_max { rng.gen_range(speed_min..=speed_max) } else { speed_min };
        Self { target, speed, pause_left: 0 }
    }
}

/// One random-waypoint movement event for a single node.
///
/// Moving nodes advance `speed` toward the target, landing on it when it is
/// within reach and then pausing for `pause_steps` events. A node whose
/// pause runs out draws a fresh target and speed without moving that event.
pub fn step_random_waypoint(
    p: Position,
    state: &mut Waypoint,
    speed_min: f64,
    speed_max: f64,
    pause_steps: u32,
    domain: &Domain,
    rng: &mut SimRng,
) -> Result<Position> {
    if state.pause_left > 0 {
        state.pause_left -= 1;
        if state.pause_left == 0 {
            *state = Waypoint::draw(domain, speed_min, speed_max, rng);
        }
        return Ok(p);
    }
    let (dx, dy) = (state.target.x - p.x, state.target.y - p.y);
    let remaining = dx.hypot(dy);
    if remaining <= state.speed {
        let arrived = state.target;
        if pause_steps == 0 {
            *state = Waypoint::draw(domain, speed_min, speed_max, rng);
        } else {
            state.pause_left = pause_steps;
        }
        return Ok(arrived);
    }
    let f = state.speed / remaining;
    domain.canonicalize(Position::new(p.x + f * dx, p.y + f * dy))
}

pub fn uniform_position(domain: &Domain, rng: &mut SimRng) -> Position {
    let x = rng.gen_range(0.0..domain.lx);
    let y = rng.gen_range(0.0..domain.ly);
    Position::new(x, y)
}

/// Uniform random placement of `n` nodes.
pub fn scatter(n: usize, domain: &Domain, rng: &mut SimRng) -> Vec<Position> {
    (0..n).map(|_| uniform_position(domain, rng)).collect()
}

/// A mobility model together with its per-node runtime state.
#[derive(Clone, Debug)]
pub struct Mobility {
    model: MobilityModel,
    waypoints: Vec<Waypoint>,
}

impl Mobility {
    /// Initializes per-node state; random waypoint draws one target and speed
    /// per node, in node order.
    pub fn new(model: MobilityModel, n: usize, domain: &Domain, rng: &mut SimRng) -> Result<Self> {
        model.validate()?;
        model.check_domain(domain)?;
        let waypoints = match model.kind {
            MobilityKind::RandomWaypoint { speed_min, speed_max, .. } => {
                (0..n).map(|_| Waypoint::draw(domain, speed_min, speed_max, rng)).collect()
            }
            _ => Vec::new(),
        };
        Ok(Self { model, waypoints })
    }

    pub fn model(&self) -> &MobilityModel {
        &self.model
    }

    pub fn waypoints(&self) -> &[Waypoint] {
        &self.waypoints
    }

    pub fn waypoints_mut(&mut self) -> &mut [Waypoint] {
        &mut self.waypoints
    }

    /// Applies one movement event to every node, in node-id order.
    pub fn update_positions(&mut self, positions: &mut [Position], domain: &Domain, rng: &mut SimRng) -> Result<()> {
        match self.model.kind {
            MobilityKind::Static => {}
            MobilityKind::RandomWalk { step_length } => {
                for p in positions.iter_mut() {
                    *p = step_random_walk(*p, step_length, domain, rng)?;
                }
            }
            MobilityKind::RandomWaypoint { speed_min, speed_max, pause_steps } => {
                for (p, w) in positions.iter_mut().zip(self.waypoints.iter_mut()) {
                    *p = step_random_waypoint(*p, w, speed_min, speed_max, pause_steps, domain, rng)?;
                }
            }
        }
        Ok(())
    }
}
