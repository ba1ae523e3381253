use serde::{Deserialize, Serialize};

use super::trajectory::{Abort, DensityGuard, IntegratorConfig, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::ode::{Dop853, System};
use crate::state::Propagator;

pub const DEFAULT_SEPARATION: f64 = 1e-8;

/// Stretching numbers `α_λ = ln(ξ_λ/ξ₀)` at checkpoints `t = λ·t₀` and the
/// finite-time exponent `χ_λ = Σ_{i≤λ} α_i / (λ t₀)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationState {
    pub t0: f64,
    pub separation: f64,
    pub times: Vec<f64>,
    pub xi: Vec<f64>,
    pub stretchings: Vec<f64>,
    pub chi: Vec<f64>,
    pub truncated: Option<Abort>,
    sum: f64,
}

impl DeviationState {
    pub fn new(t0: f64, separation: f64) -> Self {
        Self {
            t0,
            separation,
            times: Vec::new(),
            xi: Vec::new(),
            stretchings: Vec::new(),
            chi: Vec::new(),
            truncated: None,
            sum: 0.0,
        }
    }

    /// Records the separation reached at the next checkpoint.
    pub fn push(&mut self, xi: f64) {
        let lambda = self.times.len() + 1;
        let alpha = (xi / self.separation).ln();
        self.sum += alpha;
        self.times.push(lambda as f64 * self.t0);
        self.xi.push(xi);
        self.stretchings.push(alpha);
        self.chi.push(self.sum / (lambda as f64 * self.t0));
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_chi(&self) -> Option<f64> {
        self.chi.last().copied()
    }

    /// Sum of stretchings over checkpoints with `t ∈ (a, b]`.
    pub fn stretching_between(&self, a: f64, b: f64) -> f64 {
        self.times
            .iter()
            .zip(&self.stretchings)
            .filter(|(t, _)| **t > a && **t <= b)
            .map(|(_, s)| s)
            .sum()
    }
}

/// Orbit and shadow as a single 4D system sharing steps and `Ψ(t)`.
struct PairSystem {
    field: Field,
    last_density: f64,
}

impl System<4> for PairSystem {
    fn rhs(&mut self, t: f64, y: &[f64; 4], dy: &mut [f64; 4]) -> Result<()> {
        let (v, d) = self.field.velocity_and_density(t, y[0], y[1])?;
        let w = self.field.velocity(t, y[2], y[3])?;
        self.last_density = d;
        *dy = [v[0], v[1], w[0], w[1]];
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShadowRun {
    pub record: TrajectoryRecord,
    pub deviation: DeviationState,
}

/// Two-trajectory shadowing: the shadow starts `separation` away and is
/// pulled back to that distance along the current deviation every `t0`.
/// Positions of the main orbit are sampled every `cadence`.
pub fn shadow_bohmian(
    propagator: &Propagator,
    initial: [f64; 2],
    t_end: f64,
    t0: f64,
    cadence: f64,
    cfg: &IntegratorConfig,
) -> Result<ShadowRun> {
    cfg.validate()?;
    if !(t0 > 0.0 && cadence > 0.0) {
        return Err(Error::InvalidParameter("renormalization interval and cadence must be positive".into()));
    }
    let sep = DEFAULT_SEPARATION;
    let mut sys = PairSystem {
        field: Field::new(propagator.clone()),
        last_density: 0.0,
    };
    let (_, d0) = sys.field.velocity_and_density(0.0, initial[0], initial[1])?;
    let dir = std::f64::consts::FRAC_1_SQRT_2 * sep;
    let y0 = [initial[0], initial[1], initial[0] + dir, initial[1] + dir];
    let mut guard = DensityGuard::new(cfg);
    guard.observe(d0, cfg.max_step);
    let mut record = TrajectoryRecord {
        initial,
        samples: vec![[0.0, initial[0], initial[1]]],
        accepted_steps: 0,
        rejected_steps: 0,
        min_density_seen: d0,
        abort: None,
    };
    let mut deviation = DeviationState::new(t0, sep);
    let mut solver = Dop853::new(0.0, y0, cfg.control());
    let mut cap = cfg.max_step;
    let mut next_sample = 1usize;
    let mut accepted = 0;
    let mut rejected = 0;
    let checkpoints = (t_end / t0 + 1e-9).floor() as usize;
    'outer: for lambda in 1..=checkpoints {
        let target = lambda as f64 * t0;
        while solver.t() < target {
            solver.set_step_cap(cap.min(target - solver.t()));
            if let Err(e) = solver.step(&mut sys) {
                record.abort = Some(Abort::from_error(solver.t(), &e));
                break 'outer;
            }
            cap = guard.observe(sys.last_density, cfg.max_step);
            loop {
                let ts = next_sample as f64 * cadence;
                if ts > solver.t() + 1e-12 * ts || ts > t_end {
                    break;
                }
                let y = if (ts - solver.t()).abs() <= 1e-12 * ts {
                    *solver.y()
                } else {
                    match solver.dense(&mut sys, ts) {
                        Ok(y) => y,
                        Err(e) => {
                            record.abort = Some(Abort::from_error(ts, &e));
                            break 'outer;
                        }
                    }
                };
                record.samples.push([ts, y[0], y[1]]);
                next_sample += 1;
            }
            if target - solver.t() <= 1e-12 * target {
                break;
            }
        }
        let y = *solver.y();
        let (dx, dy) = (y[2] - y[0], y[3] - y[1]);
        let xi = dx.hypot(dy);
        if !(xi > 0.0 && xi.is_finite()) {
            record.abort = Some(Abort {
                t: target,
                reason: format!("degenerate separation {xi:e}"),
            });
            break;
        }
        deviation.push(xi);
        let s = sep / xi;
        let stats = solver.stats();
        accepted += stats.accepted;
        rejected += stats.rejected;
        let h = solver.step_size();
        solver = Dop853::new(
            target,
            [y[0], y[1], y[0] + s * dx, y[1] + s * dy],
            crate::ode::StepControl {
                initial_step: Some(h),
                ..cfg.control()
            },
        );
    }
    let stats = solver.stats();
    record.accepted_steps = accepted + stats.accepted;
    record.rejected_steps = rejected + stats.rejected;
    record.min_density_seen = guard.min_seen.min(d0);
    deviation.truncated = record.abort.clone();
    Ok(ShadowRun { record, deviation })
}

pub fn lyapunov_series(
    propagator: &Propagator,
    initial: [f64; 2],
    t_end: f64,
    t0: f64,
    cfg: &IntegratorConfig,
) -> Result<DeviationState> {
    Ok(shadow_bohmian(propagator, initial, t_end, t0, t_end.max(t0), cfg)?.deviation)
}

/// Least-squares slope of `ln χ` against `ln t` over checkpoints in `[a, b]`
/// with positive `χ`.
pub fn log_log_slope(dev: &DeviationState, a: f64, b: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = dev
        .times
        .iter()
        .zip(&dev.chi)
        .filter(|(t, c)| **t >= a && **t <= b && **c > 0.0)
        .map(|(t, c)| (t.ln(), c.ln()))
        .collect();
    fit_slope(&pts)
}

/// Slope of `ln max|χ|` against `ln t`, the maximum taken over successive
/// octaves `[t, 2t]` starting at `a` and ending by `b`. Robust to the sign
/// changes of `χ` on near-rigid flows.
pub fn envelope_slope(dev: &DeviationState, a: f64, b: f64) -> Option<f64> {
    if !(a > 0.0 && b > 2.0 * a) {
        return None;
    }
    let mut pts = Vec::new();
    let mut lo = a;
    while 2.0 * lo <= b * (1.0 + 1e-12) {
        let peak = dev
            .times
            .iter()
            .zip(&dev.chi)
            .filter(|(t, _)| **t >= lo && **t <= 2.0 * lo)
            .map(|(_, c)| c.abs())
            .fold(0.0f64, f64::max);
        if peak > 0.0 {
            pts.push(((lo * std::f64::consts::SQRT_2).ln(), peak.ln()));
        }
        lo *= 2.0;
    }
    fit_slope(&pts)
}

fn fit_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn chi_is_running_mean_of_stretchings(xs in prop::collection::vec(1e-12f64..1e-3, 1..60), t0 in 0.1f64..5.0) {
            let mut d = DeviationState::new(t0, 1e-8);
            for &x in &xs {
                d.push(x);
            }
            let mut sum = 0.0;
            for (k, a) in d.stretchings.iter().enumerate() {
                sum += a;
                prop_assert_eq!(d.chi[k], sum / ((k + 1) as f64 * t0));
            }
        }
    }

    #[test]
    fn slope_of_power_law() {
        let mut d = DeviationState::new(1.0, 1.0);
        for k in 1..=100 {
            let t = k as f64;
            // χ = 3/t  ⇒  cumulative sum = 3 ⇒ α_1 = 3, then 0.
            d.push(if k == 1 { 3f64.exp() } else { 1.0 });
            assert!((d.chi[k - 1] - 3.0 / t).abs() < 1e-12);
        }
        assert!((log_log_slope(&d, 10.0, 100.0).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn envelope_of_oscillating_decay() {
        let mut d = DeviationState::new(1.0, 1.0);
        let mut prev = 0.0;
        for k in 1..=4096 {
            let t = k as f64;
            // cumulative sum sin(t)·2, so χ = 2 sin(t)/t changes sign
            let cum = 2.0 * t.sin();
            d.push((cum - prev).exp());
            prev = cum;
        }
        let s = envelope_slope(&d, 64.0, 4096.0).unwrap();
        assert!((s + 1.0).abs() < 0.05, "{s}");
        assert!(log_log_slope(&d, 64.0, 4096.0).map_or(true, |v| (v + 1.0).abs() > 1e-3));
    }
}
