//! Pathloss radio model: received power, link feasibility, ranges and SINR.
//!
//! Received power decays as `P / (c * r^alpha)`. A link from `i` to `j`
//! exists when the received power over the noise floor reaches the
//! sensitivity threshold, which fixes a hard transmission range. Interference
//! is only accounted for within `interference_multiplier` times that range.

use serde::{Deserialize, Serialize};

use crate::{Result, SimError};

/// Conventional interference range, in units of the transmission range.
pub const DEFAULT_INTERFERENCE_MULTIPLIER: f64 = 2.0;

/// Homogeneous radio parameters shared by every node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadioParams {
    /// Transmit power in watts.
    pub transmit_power: f64,
    /// Frequency-dependent pathloss constant.
    pub pathloss_constant: f64,
    pub pathloss_exponent: f64,
    /// Noise floor at the receiver, in watts.
    pub noise: f64,
    /// Minimum signal-to-noise(-plus-interference) ratio for reception.
    pub sensitivity_threshold: f64,
    pub interference_multiplier: f64,
    /// When set, the transmission range is pinned to this value and `noise`
    /// is derived from it.
    range_override: Option<f64>,
}

impl RadioParams {
    pub fn new(
        transmit_power: f64,
        pathloss_constant: f64,
        pathloss_exponent: f64,
        noise: f64,
        sensitivity_threshold: f64,
        interference_multiplier: f64,
    ) -> Result<Self> {
        let params = Self {
            transmit_power,
            pathloss_constant,
            pathloss_exponent,
            noise,
            sensitivity_threshold,
            interference_multiplier,
            range_override: None,
        };
        params.validate()?;
        for w in params.warnings() {
            log::warn!("{w}");
        }
        Ok(params)
    }

    /// Parameters whose transmission range is exactly `range`.
    ///
    /// Power, pathloss constant and threshold are 1; the noise floor is chosen
    /// so that the link condition is tight at `range`.
    pub fn with_range(range: f64, pathloss_exponent: f64, interference_multiplier: f64) -> Result<Self> {
        let mut params = Self::new(1.0, 1.0, pathloss_exponent, 1.0, 1.0, interference_multiplier)?;
        params.pin_range(range)?;
        Ok(params)
    }

    /// Pins the transmission range to `range`, re-deriving the noise floor
    /// from the other parameters so SINR decisions stay consistent with it.
    pub fn pin_range(&mut self, range: f64) -> Result<()> {
        if !(range.is_finite() && range > 0.0) {
            return Err(SimError::InvalidParameter(format!(
                "transmission_range must be positive, got {range}"
            )));
        }
        self.noise = self.transmit_power
            / (self.pathloss_constant * self.sensitivity_threshold * range.powf(self.pathloss_exponent));
        self.range_override = Some(range);
        self.validate()
    }

    pub fn range_override(&self) -> Option<f64> {
        self.range_override
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("transmit_power", self.transmit_power),
            ("pathloss_constant", self.pathloss_constant),
            ("noise", self.noise),
            ("sensitivity_threshold", self.sensitivity_threshold),
            ("pathloss_exponent", self.pathloss_exponent),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(SimError::InvalidParameter(format!(
                    "radio.{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.interference_multiplier.is_finite() && self.interference_multiplier >= 1.0) {
            return Err(SimError::InvalidParameter(format!(
                "radio.interference_multiplier must be >= 1, got {}",
                self.interference_multiplier
            )));
        }
        Ok(())
    }

    /// Non-fatal oddities in the parameter set.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(2.0..=5.0).contains(&self.pathloss_exponent) {
            out.push(format!(
                "radio.pathloss_exponent {} is outside the usual [2, 5]",
                self.pathloss_exponent
            ));
        }
        out
    }

    /// Power received at distance `r` from a transmitter.
    pub fn received_power(&self, r: f64) -> Result<f64> {
        if r.is_nan() || r <= 0.0 {
            return Err(SimError::NonPositiveDistance(r));
        }
        Ok(self.transmit_power / (self.pathloss_constant * r.powf(self.pathloss_exponent)))
    }

    /// Link condition against an arbitrary total noise level (inclusive).
    pub fn link_ok(&self, r: f64, total_noise: f64) -> Result<bool> {
        if total_noise.is_nan() || total_noise <= 0.0 {
            return Err(SimError::InvalidParameter(format!(
                "total noise must be positive, got {total_noise}"
            )));
        }
        Ok(self.received_power(r)? / total_noise >= self.sensitivity_threshold)
    }

    pub fn transmission_range(&self) -> f64 {
        self.range_override.unwrap_or_else(|| {
            (self.transmit_power / (self.pathloss_constant * self.sensitivity_threshold * self.noise))
                .powf(self.pathloss_exponent.recip())
        })
    }

    pub fn interference_range(&self) -> f64 {
        self.interference_multiplier * self.transmission_range()
    }

    /// Reception at distance `r_signal` in the presence of simultaneous
    /// transmitters at `interferer_distances`.
    pub fn sinr_ok(&self, r_signal: f64, interferer_distances: &[f64]) -> Result<bool> {
        let signal = self.received_power(r_signal)?;
        let mut interference = 0.0;
        for &d in interferer_distances {
            interference += self.received_power(d)?;
        }
        Ok(signal / (self.noise + interference) >= self.sensitivity_threshold)
    }
}
