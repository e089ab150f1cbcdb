//! Rectangular simulation area, node positions and the distance metric.

use serde::{Deserialize, Serialize};

use crate::{Result, SimError};

/// A point in the simulation area, in meters.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Rectangular area `[0, lx) x [0, ly)`, toroidal when `periodic` is set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub lx: f64,
    pub ly: f64,
    pub periodic: bool,
}

impl Domain {
    pub fn new(lx: f64, ly: f64, periodic: bool) -> Result<Self> {
        if !(lx.is_finite() && lx > 0.0 && ly.is_finite() && ly > 0.0) {
            return Err(SimError::InvalidParameter(format!(
                "domain edges must be positive and finite, got {lx} x {ly}"
            )));
        }
        Ok(Self { lx, ly, periodic })
    }

    /// Square domain of edge `l`.
    pub fn square(l: f64, periodic: bool) -> Result<Self> {
        Self::new(l, l, periodic)
    }

    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    pub fn contains(&self, p: Position) -> bool {
        (0.0..self.lx).contains(&p.x) && (0.0..self.ly).contains(&p.y)
    }

    /// Per-axis separation `b - a`, minimum-image on a torus.
    #[inline]
    pub fn displacement(&self, a: Position, b: Position) -> (f64, f64) {
        let mut dx = b.x - a.x;
        let mut dy = b.y - a.y;
        if self.periodic {
            dx = min_image(dx, self.lx);
            dy = min_image(dy, self.ly);
        }
        (dx, dy)
    }

    #[inline]
    pub fn distance(&self, a: Position, b: Position) -> f64 {
        let (dx, dy) = self.displacement(a, b);
        dx.hypot(dy)
    }

    /// Maps an arbitrary finite point into the domain: modular wrap on a
    /// torus, mirror reflection at the walls otherwise.
    pub fn canonicalize(&self, p: Position) -> Result<Position> {
        if !(p.x.is_finite() && p.y.is_finite()) {
            return Err(SimError::NonFinite { x: p.x, y: p.y });
        }
        Ok(if self.periodic {
            Position::new(wrap(p.x, self.lx), wrap(p.y, self.ly))
        } else {
            Position::new(reflect(p.x, self.lx), reflect(p.y, self.ly))
        })
    }
}

/// Free-function form of [`Domain::distance`].
#[inline]
pub fn distance(a: Position, b: Position, d: &Domain) -> f64 {
    d.distance(a, b)
}

/// Free-function form of [`Domain::canonicalize`].
pub fn canonicalize(p: Position, d: &Domain) -> Result<Position> {
    d.canonicalize(p)
}

#[inline]
fn min_image(delta: f64, len: f64) -> f64 {
    let half = 0.5 * len;
    if delta > half {
        delta - len
    } else if delta < -half {
        delta + len
    } else {
        delta
    }
}

fn wrap(v: f64, len: f64) -> f64 {
    let w = v.rem_euclid(len);
    // rem_euclid rounds tiny negatives up to `len` itself
    if w >= len {
        0.0
    } else {
        w
    }
}

fn reflect(v: f64, len: f64) -> f64 {
    if (0.0..len).contains(&v) {
        return v;
    }
    let folded = v.rem_euclid(2.0 * len);
    let r = if folded >= len { 2.0 * len - folded } else { folded };
    if r >= len {
        below(len)
    } else if r < 0.0 {
        0.0
    } else {
        r
    }
}

/// Largest double strictly below a positive finite `v`.
fn below(v: f64) -> f64 {
    f64::from_bits(v.to_bits() - 1)
}
