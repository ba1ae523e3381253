use serde::{Deserialize, Serialize};

use super::ClassicalState;
use crate::error::{Error, Result};
use crate::ode::{Dop853, StepControl, System};
use crate::params::OscillatorParams;

pub const ESCAPE_RADIUS: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassicalConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_step: f64,
    pub escape_radius: f64,
}

impl Default for ClassicalConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-13,
            rel_tol: 1e-13,
            max_step: 0.5,
            escape_radius: ESCAPE_RADIUS,
        }
    }
}

impl ClassicalConfig {
    pub fn validate(&self) -> Result<()> {
        let all = [self.abs_tol, self.rel_tol, self.max_step, self.escape_radius];
        if all.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter(
                "classical tolerances, max_step and escape_radius must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn control(&self) -> StepControl {
        StepControl {
            abs_tol: self.abs_tol,
            rel_tol: self.rel_tol,
            max_step: self.max_step,
            min_step: 1e-10,
            initial_step: None,
        }
    }

    pub(crate) fn escaped(&self, z: &[f64]) -> bool {
        !(z[0].abs() <= self.escape_radius && z[1].abs() <= self.escape_radius)
    }
}

/// `(ẍ, ÿ) = (−ωx²x − εy², −ωy²y − 2εxy)`.
pub(crate) fn acceleration(p: &OscillatorParams, x: f64, y: f64) -> [f64; 2] {
    [
        -p.omega_x * p.omega_x * x - p.epsilon * y * y,
        -p.omega_y * p.omega_y * y - 2.0 * p.epsilon * x * y,
    ]
}

pub(crate) struct Flow(pub OscillatorParams);

impl System<4> for Flow {
    fn rhs(&mut self, _t: f64, z: &[f64; 4], dz: &mut [f64; 4]) -> Result<()> {
        let [ax, ay] = acceleration(&self.0, z[0], z[1]);
        *dz = [z[2], z[3], ax, ay];
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalRecord {
    pub initial: ClassicalState,
    pub energy: f64,
    /// Rows `(t, x, y, ẋ, ẏ)` at the requested cadence.
    pub samples: Vec<[f64; 5]>,
    pub last: ClassicalState,
    pub end_time: f64,
    /// Largest relative energy error over accepted steps.
    pub max_energy_drift: f64,
    pub escaped: Option<f64>,
    pub steps: usize,
}

fn relative_drift(e: f64, e0: f64) -> f64 {
    (e - e0).abs() / e0.abs().max(f64::MIN_POSITIVE)
}

/// Integrates Hamilton's equations to `t_end`, sampling every `cadence`.
/// Leaving the box `|x|, |y| ≤ escape_radius` truncates the record.
pub fn integrate_classical(
    params: &OscillatorParams,
    initial: ClassicalState,
    t_end: f64,
    cadence: f64,
    cfg: &ClassicalConfig,
) -> Result<ClassicalRecord> {
    params.validate()?;
    cfg.validate()?;
    if !(t_end >= 0.0 && cadence > 0.0) {
        return Err(Error::InvalidParameter("t_end must be non-negative and cadence positive".into()));
    }
    let e0 = initial.energy(params);
    let mut sys = Flow(*params);
    let mut solver = Dop853::new(0.0, initial.to_array(), cfg.control());
    let z0 = initial.to_array();
    let mut samples = vec![[0.0, z0[0], z0[1], z0[2], z0[3]]];
    let mut next = 1usize;
    let mut drift = 0.0f64;
    let mut escaped = None;
    while solver.t() < t_end {
        solver.set_step_cap(t_end - solver.t());
        solver.step(&mut sys)?;
        let z = *solver.y();
        if !z.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { t: solver.t() });
        }
        drift = drift.max(relative_drift(ClassicalState::from_array(&z).energy(params), e0));
        loop {
            let ts = next as f64 * cadence;
            if ts > solver.t() || ts > t_end {
                break;
            }
            let w = if ts == solver.t() { z } else { solver.dense(&mut sys, ts)? };
            samples.push([ts, w[0], w[1], w[2], w[3]]);
            next += 1;
        }
        if cfg.escaped(&z) {
            escaped = Some(solver.t());
            break;
        }
        if t_end - solver.t() <= 1e-12 * t_end.max(1.0) {
            break;
        }
    }
    Ok(ClassicalRecord {
        initial,
        energy: e0,
        samples,
        last: ClassicalState::from_array(solver.y()),
        end_time: solver.t(),
        max_energy_drift: drift,
        escaped,
        steps: solver.stats().accepted,
    })
}

/// Distance from the start after integrating to `t`, reversing velocities
/// and integrating for `t` again.
pub fn time_reversal_error(
    params: &OscillatorParams,
    initial: ClassicalState,
    t: f64,
    cfg: &ClassicalConfig,
) -> Result<f64> {
    let fwd = integrate_classical(params, initial, t, t.max(1e-9), cfg)?;
    if let Some(te) = fwd.escaped {
        return Err(Error::Escaped { t: te });
    }
    let back = integrate_classical(params, fwd.last.with_reversed_velocity(), t, t.max(1e-9), cfg)?;
    let end = back.last.with_reversed_velocity().to_array();
    Ok(end
        .iter()
        .zip(initial.to_array())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_solution_at_zero_coupling() {
        let p = OscillatorParams::default();
        let s = ClassicalState::new(0.7, -0.3, 0.2, 0.5);
        let r = integrate_classical(&p, s, 1000.0, 10.0, &ClassicalConfig::default()).unwrap();
        let wy = p.omega_y;
        for row in &r.samples {
            let t = row[0];
            let x = s.x * t.cos() + s.px * t.sin();
            let y = s.y * (wy * t).cos() + s.py / wy * (wy * t).sin();
            assert!((row[1] - x).abs() < 1e-9 && (row[2] - y).abs() < 1e-9, "t={t}");
        }
        assert_eq!(r.samples.len(), 101);
    }

    #[test]
    fn energy_drift_bound_orbit() {
        let p = OscillatorParams::with_epsilon(0.09);
        let s = ClassicalState::on_section(&p, 2.0, 0.3, 0.1).unwrap();
        let r = integrate_classical(&p, s, 1e4, 100.0, &ClassicalConfig::default()).unwrap();
        assert!(r.escaped.is_none());
        assert!(r.max_energy_drift < 1e-9, "{:e}", r.max_energy_drift);
    }

    #[test]
    fn escape_above_saddle() {
        let p = OscillatorParams::with_epsilon(0.1);
        // saddle energy 1/(32 ε²) = 3.125
        let s = ClassicalState::on_section(&p, 4.0, -1.0, 0.0).unwrap();
        let r = integrate_classical(&p, s, 5000.0, 1.0, &ClassicalConfig::default()).unwrap();
        let t = r.escaped.expect("orbit should leave the box");
        assert!((r.end_time - t).abs() < 1e-12 && r.end_time < 5000.0);
    }

    #[test]
    fn reversibility() {
        let p = OscillatorParams::with_epsilon(0.05);
        let s = ClassicalState::on_section(&p, 2.88, 0.5, -0.4).unwrap();
        let err = time_reversal_error(&p, s, 200.0, &ClassicalConfig::default()).unwrap();
        assert!(err < 1e-7, "{err:e}");
    }
}
