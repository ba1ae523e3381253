use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::OscillatorParams;

/// Energy of the saddles of `V`, `ωx²ωy⁴/(8ε²)`; infinite at `ε = 0`.
pub fn saddle_energy(params: &OscillatorParams) -> f64 {
    let e = params.epsilon;
    if e == 0.0 {
        return f64::INFINITY;
    }
    let (wx2, wy2) = (params.omega_x * params.omega_x, params.omega_y * params.omega_y);
    wx2 * wy2 * wy2 / (8.0 * e * e)
}

/// Upper saddle `(−ωy²/(2ε), ωxωy/(√2|ε|))` of `V`.
pub fn saddle_point(params: &OscillatorParams) -> Option<[f64; 2]> {
    let e = params.epsilon;
    (e != 0.0).then(|| {
        let wy2 = params.omega_y * params.omega_y;
        [-wy2 / (2.0 * e), params.omega_x * params.omega_y / (std::f64::consts::SQRT_2 * e.abs())]
    })
}

/// Curve of zero velocity `y² = (2E − ωx²x²)/(ωy² + 2εx)` as upper-branch
/// samples `(x, y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroVelocityCurve {
    pub energy: f64,
    pub epsilon: f64,
    pub points: Vec<[f64; 2]>,
    pub open: bool,
}

/// The allowed region is open when the root of the denominator lies where
/// the numerator is positive.
pub fn is_open(params: &OscillatorParams, e: f64) -> bool {
    if params.epsilon == 0.0 {
        return false;
    }
    let wy2 = params.omega_y * params.omega_y;
    let root = -wy2 / (2.0 * params.epsilon);
    2.0 * e - params.omega_x * params.omega_x * root * root >= 0.0
}

pub fn czv(params: &OscillatorParams, e: f64, samples: usize) -> Result<ZeroVelocityCurve> {
    params.validate()?;
    if !(e > 0.0) || samples < 2 {
        return Err(Error::InvalidParameter("energy must be positive and at least 2 samples requested".into()));
    }
    let (wx2, wy2) = (params.omega_x * params.omega_x, params.omega_y * params.omega_y);
    let w = (2.0 * e).sqrt() / params.omega_x;
    let mut points = Vec::with_capacity(samples);
    for k in 0..samples {
        let x = -w + 2.0 * w * k as f64 / (samples - 1) as f64;
        let num = (2.0 * e - wx2 * x * x).max(0.0);
        let den = wy2 + 2.0 * params.epsilon * x;
        if den > 0.0 {
            points.push([x, (num / den).sqrt()]);
        }
    }
    Ok(ZeroVelocityCurve {
        energy: e,
        epsilon: params.epsilon,
        points,
        open: is_open(params, e),
    })
}

/// Smallest `ε ∈ [lo, hi]` at which the curve of zero velocity at energy
/// `energy_of(ε)` opens, by bisection to `tol`.
pub fn escape_perturbation<F>(params: &OscillatorParams, mut energy_of: F, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(lo > 0.0 && hi > lo && tol > 0.0) {
        return Err(Error::InvalidParameter("need 0 < lo < hi and tol > 0".into()));
    }
    let mut open_at = |eps: f64| -> Result<bool> {
        let p = OscillatorParams {
            epsilon: eps,
            ..*params
        };
        Ok(is_open(&p, energy_of(eps)?))
    };
    let (mut a, mut b) = (lo, hi);
    if open_at(a)? || !open_at(b)? {
        return Err(Error::InvalidParameter(format!("no closed-to-open transition in [{lo}, {hi}]")));
    }
    while b - a > tol {
        let m = 0.5 * (a + b);
        if open_at(m)? {
            b = m;
        } else {
            a = m;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn saddle_is_a_critical_point_at_the_quoted_energy() {
        let p = OscillatorParams::with_epsilon(0.09);
        let [x, y] = saddle_point(&p).unwrap();
        let gx = p.omega_x * p.omega_x * x + p.epsilon * y * y;
        let gy = y * (p.omega_y * p.omega_y + 2.0 * p.epsilon * x);
        assert!(gx.abs() < 1e-12 && gy.abs() < 1e-12);
        assert!((p.potential(x, y) - saddle_energy(&p)).abs() < 1e-12);
        assert!((saddle_energy(&p) - 1.0 / (32.0 * 0.09 * 0.09)).abs() < 1e-12);
    }

    #[test]
    fn ellipse_at_zero_coupling() {
        let p = OscillatorParams::default();
        let c = czv(&p, 2.0, 101).unwrap();
        assert!(!c.open);
        for [x, y] in c.points {
            assert!((0.5 * (x * x + 0.5 * y * y) - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn openness_switches_at_saddle_energy() {
        let p = OscillatorParams::with_epsilon(0.1);
        let es = saddle_energy(&p);
        assert!(!is_open(&p, es * (1.0 - 1e-9)) && is_open(&p, es * (1.0 + 1e-9)));
    }

    #[test]
    fn constant_energy_escape() {
        // E fixed at 3.125 opens exactly at ε = 0.1
        let eps = escape_perturbation(&OscillatorParams::default(), |_| Ok(3.125), 0.05, 0.2, 1e-10).unwrap();
        assert!((eps - 0.1).abs() < 1e-9);
    }
}
