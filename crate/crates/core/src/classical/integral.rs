use serde::{Deserialize, Serialize};

use super::flow::ClassicalRecord;
use super::section::SectionPoint;
use super::ClassicalState;
use crate::error::{Error, Result};
use crate::params::OscillatorParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThirdIntegralValue {
    pub c: f64,
    /// `max |Φ(t) − Φ(0)|` over the samples.
    pub drift: f64,
}

/// `4ωy² − ωx²`, refused when below `1e-6` in magnitude.
pub fn resonant_denominator(params: &OscillatorParams) -> Result<f64> {
    let a = 4.0 * params.omega_y * params.omega_y - params.omega_x * params.omega_x;
    if a.abs() < 1e-6 {
        return Err(Error::ResonantDenominator(a));
    }
    Ok(a)
}

/// First-order formal integral
/// `Φ = ½(ẋ² + ωx²x²) + ε[(2ωy² − ωx²)xy² + 2xẏ² − 2yẋẏ]/(4ωy² − ωx²)`.
pub fn third_integral(params: &OscillatorParams, s: &ClassicalState) -> Result<f64> {
    let a = resonant_denominator(params)?;
    let (wx2, wy2) = (params.omega_x * params.omega_x, params.omega_y * params.omega_y);
    let base = 0.5 * (s.px * s.px + wx2 * s.x * s.x);
    let first = (2.0 * wy2 - wx2) * s.x * s.y * s.y + 2.0 * s.x * s.py * s.py - 2.0 * s.y * s.px * s.py;
    Ok(base + params.epsilon * first / a)
}

/// Section form at `y = 0` with `ẏ² = 2E − ωx²x² − ẋ²`.
pub fn third_integral_section(params: &OscillatorParams, e: f64, x: f64, px: f64) -> Result<f64> {
    let a = resonant_denominator(params)?;
    let wx2 = params.omega_x * params.omega_x;
    let vy2 = 2.0 * e - wx2 * x * x - px * px;
    Ok(0.5 * (px * px + wx2 * x * x) + 2.0 * params.epsilon * x * vy2 / a)
}

fn section_gradient(params: &OscillatorParams, e: f64, a: f64, x: f64, px: f64) -> [f64; 2] {
    let wx2 = params.omega_x * params.omega_x;
    let k = 2.0 * params.epsilon / a;
    [
        wx2 * x + k * (2.0 * e - 3.0 * wx2 * x * x - px * px),
        px - 2.0 * k * x * px,
    ]
}

pub fn third_integral_along(params: &OscillatorParams, record: &ClassicalRecord) -> Result<ThirdIntegralValue> {
    let first = record
        .samples
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty classical record".into()))?;
    let phi = |r: &[f64; 5]| third_integral(params, &ClassicalState::new(r[1], r[2], r[3], r[4]));
    let c = phi(first)?;
    let mut drift = 0.0f64;
    for r in &record.samples {
        drift = drift.max((phi(r)? - c).abs());
    }
    Ok(ThirdIntegralValue { c, drift })
}

/// Largest first-order distance `|Φ(p) − C|/|∇Φ(p)|` from section points to
/// the level curve of the section form through their mean value `C`.
pub fn invariant_curve_distance(params: &OscillatorParams, e: f64, points: &[SectionPoint]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::InvalidParameter("no section points".into()));
    }
    let a = resonant_denominator(params)?;
    let values: Vec<f64> = points
        .iter()
        .map(|q| third_integral_section(params, e, q.x, q.px))
        .collect::<Result<_>>()?;
    let c = values.iter().sum::<f64>() / values.len() as f64;
    Ok(points
        .iter()
        .zip(&values)
        .map(|(q, v)| {
            let g = section_gradient(params, e, a, q.x, q.px);
            (v - c).abs() / g[0].hypot(g[1]).max(1e-300)
        })
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::{integrate_classical, ClassicalConfig};

    #[test]
    fn uncoupled_value_is_x_energy() {
        let p = OscillatorParams::default();
        let s = ClassicalState::new(0.3, 0.7, -0.2, 0.4);
        let v = third_integral(&p, &s).unwrap();
        assert!((v - 0.5 * (0.04 + 0.09)).abs() < 1e-15);
        let r = integrate_classical(&p, s, 300.0, 0.5, &ClassicalConfig::default()).unwrap();
        assert!(third_integral_along(&p, &r).unwrap().drift < 1e-10);
    }

    #[test]
    fn section_form_matches_full_form() {
        let p = OscillatorParams::with_epsilon(0.04);
        let s = ClassicalState::on_section(&p, 2.0, 0.6, -0.5).unwrap();
        let full = third_integral(&p, &s).unwrap();
        let sec = third_integral_section(&p, s.energy(&p), s.x, s.px).unwrap();
        assert!((full - sec).abs() < 1e-13);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = OscillatorParams::with_epsilon(0.07);
        let a = resonant_denominator(&p).unwrap();
        let (e, x, px) = (2.5, 0.4, 0.9);
        let g = section_gradient(&p, e, a, x, px);
        let h = 1e-6;
        let f = |x, px| third_integral_section(&p, e, x, px).unwrap();
        assert!((g[0] - (f(x + h, px) - f(x - h, px)) / (2.0 * h)).abs() < 1e-8);
        assert!((g[1] - (f(x, px + h) - f(x, px - h)) / (2.0 * h)).abs() < 1e-8);
    }

    #[test]
    fn resonance_refused() {
        let p = OscillatorParams {
            omega_y: 0.5,
            ..OscillatorParams::default()
        };
        assert!(matches!(resonant_denominator(&p), Err(Error::ResonantDenominator(_))));
        assert!(third_integral(&p, &ClassicalState::new(0.0, 0.0, 0.0, 0.0)).is_err());
    }
}
