use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical constants of the coupled oscillator pair
/// `V = ½(ωx²x² + ωy²y²) + ε·x·y²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillatorParams {
    pub omega_x: f64,
    pub omega_y: f64,
    pub mass_x: f64,
    pub mass_y: f64,
    pub hbar: f64,
    pub epsilon: f64,
}

impl Default for OscillatorParams {
    fn default() -> Self {
        Self {
            omega_x: 1.0,
            omega_y: std::f64::consts::FRAC_1_SQRT_2,
            mass_x: 1.0,
            mass_y: 1.0,
            hbar: 1.0,
            epsilon: 0.0,
        }
    }
}

impl OscillatorParams {
    pub fn with_epsilon(epsilon: f64) -> Self {
        Self {
            epsilon,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("omega_x", self.omega_x),
            ("omega_y", self.omega_y),
            ("mass_x", self.mass_x),
            ("mass_y", self.mass_y),
            ("hbar", self.hbar),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {value}"
                )));
            }
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be non-negative, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    /// Inverse length scale squared `mω/ħ` along x.
    pub fn alpha_x(&self) -> f64 {
        self.mass_x * self.omega_x / self.hbar
    }

    pub fn alpha_y(&self) -> f64 {
        self.mass_y * self.omega_y / self.hbar
    }

    /// Classical potential energy per unit mass convention used by the
    /// classical engine (unit masses).
    pub fn potential(&self, x: f64, y: f64) -> f64 {
        0.5 * (self.omega_x * self.omega_x * x * x + self.omega_y * self.omega_y * y * y)
            + self.epsilon * x * y * y
    }
}
