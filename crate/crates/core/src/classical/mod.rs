//! Classical flow of the same potential with unit masses: orbits, surfaces
//! of section, rotation numbers, curves of zero velocity, the formal third
//! integral and chaotic-area estimates.

mod area;
mod czv;
mod flow;
mod integral;
mod rotation;
mod section;

pub use area::{chaotic_area_fraction, classical_lyapunov, AreaConfig, AreaEstimate};
pub use czv::{czv, escape_perturbation, is_open, saddle_energy, saddle_point, ZeroVelocityCurve};
pub use flow::{integrate_classical, time_reversal_error, ClassicalConfig, ClassicalRecord, ESCAPE_RADIUS};
pub use integral::{
    invariant_curve_distance, resonant_denominator, third_integral, third_integral_along, third_integral_section,
    ThirdIntegralValue,
};
pub use rotation::{find_plateaus, rotation_curve, rotation_number, scan_line, RotationConfig, RotationCurve, RotationSample};
pub use section::{central_periodic_orbit, poincare_section, return_map, CentralOrbit, ReturnMap, SectionPoint, SectionRun};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::OscillatorParams;

/// Phase-space point `(x, y, ẋ, ẏ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalState {
    pub x: f64,
    pub y: f64,
    pub px: f64,
    pub py: f64,
}

impl ClassicalState {
    pub fn new(x: f64, y: f64, px: f64, py: f64) -> Self {
        Self { x, y, px, py }
    }

    pub fn from_array(z: &[f64; 4]) -> Self {
        Self::new(z[0], z[1], z[2], z[3])
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x, self.y, self.px, self.py]
    }

    /// `H = ½(ẋ² + ẏ²) + V(x, y)`.
    pub fn energy(&self, params: &OscillatorParams) -> f64 {
        0.5 * (self.px * self.px + self.py * self.py) + params.potential(self.x, self.y)
    }

    /// Point on the section `y = 0` with `ẏ > 0` at energy `e`.
    pub fn on_section(params: &OscillatorParams, e: f64, x: f64, px: f64) -> Result<Self> {
        let k = 2.0 * e - px * px - params.omega_x * params.omega_x * x * x;
        if !(k > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "section point ({x}, {px}) is not allowed at energy {e}"
            )));
        }
        Ok(Self::new(x, 0.0, px, k.sqrt()))
    }

    pub fn with_reversed_velocity(&self) -> Self {
        Self::new(self.x, self.y, -self.px, -self.py)
    }
}

/// Largest `|x|` on the section `y = 0` at energy `e`.
pub fn section_half_width(params: &OscillatorParams, e: f64) -> f64 {
    (2.0 * e).max(0.0).sqrt() / params.omega_x
}
