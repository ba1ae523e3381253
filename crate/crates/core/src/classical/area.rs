use serde::{Deserialize, Serialize};

use super::flow::{acceleration, ClassicalConfig};
use super::{section_half_width, ClassicalState};
use crate::bohm::{DeviationState, DEFAULT_SEPARATION};
use crate::error::{Error, Result};
use crate::grid::{Grid, Rect};
use crate::ode::{Dop853, StepControl, System};
use crate::params::OscillatorParams;

struct PairFlow(OscillatorParams);

impl System<8> for PairFlow {
    fn rhs(&mut self, _t: f64, z: &[f64; 8], dz: &mut [f64; 8]) -> Result<()> {
        let a = acceleration(&self.0, z[0], z[1]);
        let b = acceleration(&self.0, z[4], z[5]);
        *dz = [z[2], z[3], a[0], a[1], z[6], z[7], b[0], b[1]];
        Ok(())
    }
}

/// Runs an orbit with a shadow `separation` away in phase space, pulling the
/// shadow back every `t0`. Stops early once `stop(&deviation)` holds or
/// either orbit leaves the escape box.
fn shadow<F: FnMut(&DeviationState) -> bool>(
    params: &OscillatorParams,
    initial: ClassicalState,
    t_end: f64,
    t0: f64,
    control: StepControl,
    escape_radius: f64,
    mut stop: F,
) -> Result<(DeviationState, Option<f64>)> {
    let sep = DEFAULT_SEPARATION;
    let d = 0.5 * sep;
    let z = initial.to_array();
    let mut y = [z[0], z[1], z[2], z[3], z[0] + d, z[1] + d, z[2] + d, z[3] + d];
    let mut dev = DeviationState::new(t0, sep);
    let mut sys = PairFlow(*params);
    let mut solver = Dop853::new(0.0, y, control);
    let checkpoints = (t_end / t0 + 1e-9).floor() as usize;
    for lambda in 1..=checkpoints {
        let target = lambda as f64 * t0;
        while solver.t() < target {
            solver.set_step_cap(target - solver.t());
            solver.step(&mut sys)?;
            let w = solver.y();
            if w.iter().take(2).chain(&w[4..6]).any(|v| !(v.abs() <= escape_radius)) {
                dev.truncated = Some(crate::bohm::Abort {
                    t: solver.t(),
                    reason: "escaped".into(),
                });
                return Ok((dev, Some(solver.t())));
            }
            if target - solver.t() <= 1e-12 * target {
                break;
            }
        }
        y = *solver.y();
        let diff: Vec<f64> = (0..4).map(|i| y[4 + i] - y[i]).collect();
        let xi = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(xi > 0.0 && xi.is_finite()) {
            return Err(Error::NonFinite { t: target });
        }
        dev.push(xi);
        let s = sep / xi;
        for i in 0..4 {
            y[4 + i] = y[i] + s * diff[i];
        }
        let h = solver.step_size();
        solver = Dop853::new(
            target,
            y,
            StepControl {
                initial_step: Some(h),
                ..control
            },
        );
        if stop(&dev) {
            break;
        }
    }
    Ok((dev, None))
}

/// Finite-time Lyapunov series of a classical orbit, same bookkeeping as
/// the Bohmian one.
pub fn classical_lyapunov(
    params: &OscillatorParams,
    initial: ClassicalState,
    t_end: f64,
    t0: f64,
    cfg: &ClassicalConfig,
) -> Result<DeviationState> {
    params.validate()?;
    cfg.validate()?;
    if !(t0 > 0.0) {
        return Err(Error::InvalidParameter("renormalization interval must be positive".into()));
    }
    Ok(shadow(params, initial, t_end, t0, cfg.control(), cfg.escape_radius, |_| false)?.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AreaConfig {
    pub resolution: usize,
    pub t_horizon: f64,
    /// Orbit is chaotic once its shadow separation has grown by `e^{ln_growth}`.
    pub ln_growth: f64,
    pub renormalization: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
}

impl Default for AreaConfig {
    fn default() -> Self {
        Self {
            resolution: 60,
            t_horizon: 5000.0,
            ln_growth: 4.0 * std::f64::consts::LN_10,
            renormalization: 10.0,
            abs_tol: 1e-10,
            rel_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaEstimate {
    pub energy: f64,
    pub epsilon: f64,
    pub resolution: usize,
    pub allowed: usize,
    pub chaotic: usize,
    pub escaped: usize,
    /// `chaotic / allowed`; escaping cells are counted in neither.
    pub fraction: f64,
    /// Per-cell status on `(x, ẋ)`: 0 forbidden, 1 ordered, 2 chaotic, 3 escaped.
    pub cells: Grid<u8>,
}

/// Fraction of the allowed `(x, ẋ)` section disk filled by orbits whose
/// shadow separation grows by `e^{ln_growth}` within `t_horizon`.
pub fn chaotic_area_fraction(params: &OscillatorParams, e: f64, ac: &AreaConfig) -> Result<AreaEstimate> {
    params.validate()?;
    if ac.resolution == 0 || !(ac.t_horizon > 0.0 && ac.ln_growth > 0.0 && ac.renormalization > 0.0) {
        return Err(Error::InvalidParameter("invalid area-fraction configuration".into()));
    }
    let wx = section_half_width(params, e);
    let wp = (2.0 * e).max(0.0).sqrt();
    let region = Rect::new(-wx, wx, -wp, wp);
    let n = ac.resolution;
    let control = StepControl {
        abs_tol: ac.abs_tol,
        rel_tol: ac.rel_tol,
        max_step: 0.5,
        min_step: 1e-10,
        initial_step: None,
    };
    let cells: Vec<(f64, f64)> = (0..n * n)
        .map(|k| {
            let (i, j) = (k % n, k / n);
            (
                region.x_min + (i as f64 + 0.5) * region.width() / n as f64,
                region.y_min + (j as f64 + 0.5) * region.height() / n as f64,
            )
        })
        .collect();
    let classify = |&(x, px): &(f64, f64)| -> Result<u8> {
        let Ok(start) = ClassicalState::on_section(params, e, x, px) else {
            return Ok(0);
        };
        let (dev, escaped) = shadow(params, start, ac.t_horizon, ac.renormalization, control, super::ESCAPE_RADIUS, |d| {
            drawup_exceeds(d, ac.ln_growth)
        })?;
        Ok(if escaped.is_some() {
            3
        } else if drawup_exceeds(&dev, ac.ln_growth) {
            2
        } else {
            1
        })
    };
    #[cfg(feature = "parallel")]
    let status: Vec<u8> = {
        use rayon::prelude::*;
        cells.par_iter().map(classify).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let status: Vec<u8> = cells.iter().map(classify).collect::<Result<_>>()?;
    let count = |v: u8| status.iter().filter(|&&s| s == v).count();
    let (ordered, chaotic, escaped) = (count(1), count(2), count(3));
    let allowed = ordered + chaotic;
    Ok(AreaEstimate {
        energy: e,
        epsilon: params.epsilon,
        resolution: n,
        allowed,
        chaotic,
        escaped,
        fraction: if allowed == 0 { 0.0 } else { chaotic as f64 / allowed as f64 },
        cells: Grid::new(region, n, n, status),
    })
}

/// Cumulative stretching has risen `ln_growth` above its running minimum.
fn drawup_exceeds(d: &DeviationState, ln_growth: f64) -> bool {
    let (mut cum, mut low) = (0.0f64, 0.0f64);
    for a in &d.stretchings {
        cum += a;
        low = low.min(cum);
        if cum - low >= ln_growth {
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrable_case_has_no_chaos() {
        let ac = AreaConfig {
            resolution: 8,
            t_horizon: 500.0,
            ..AreaConfig::default()
        };
        let a = chaotic_area_fraction(&OscillatorParams::default(), 2.0, &ac).unwrap();
        assert_eq!(a.chaotic, 0);
        assert!(a.allowed > 30 && a.fraction == 0.0);
    }

    #[test]
    fn uncoupled_lyapunov_decays() {
        let p = OscillatorParams::default();
        let s = ClassicalState::on_section(&p, 2.0, 0.5, 0.3).unwrap();
        let d = classical_lyapunov(&p, s, 2000.0, 1.0, &ClassicalConfig::default()).unwrap();
        let last = d.last_chi().unwrap();
        assert!(last.abs() < 5e-3, "{last}");
    }
}
