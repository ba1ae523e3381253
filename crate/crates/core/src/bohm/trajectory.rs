use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::ode::{Dop853, StepControl, System};
use crate::state::Propagator;

/// Step-control settings for Bohmian trajectories.
///
/// Stiffness policy: explicit DOP853 with step rejection at evaluations
/// that hit a node, plus a step cap of `guard_step` whenever `|Ψ|²` falls
/// below `guard_factor` times the running median along the path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub guard_factor: f64,
    pub guard_step: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-9,
            max_step: 0.5,
            min_step: 1e-11,
            guard_factor: 1e-6,
            guard_step: 1e-3,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.abs_tol > 0.0
            && self.rel_tol > 0.0
            && self.min_step > 0.0
            && self.min_step < self.max_step
            && self.guard_factor >= 0.0
            && self.guard_step > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("integrator config {self:?}")))
        }
    }

    pub(crate) fn control(&self) -> StepControl {
        StepControl {
            abs_tol: self.abs_tol,
            rel_tol: self.rel_tol,
            max_step: self.max_step,
            min_step: self.min_step,
            initial_step: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Abort {
    pub t: f64,
    pub reason: String,
}

impl Abort {
    pub(crate) fn from_error(t: f64, e: &Error) -> Self {
        Self {
            t,
            reason: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub initial: [f64; 2],
    /// `(t, x, y)` at the requested cadence.
    pub samples: Vec<[f64; 3]>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub min_density_seen: f64,
    pub abort: Option<Abort>,
}

impl TrajectoryRecord {
    pub fn end_time(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s[0])
    }

    pub fn completed(&self) -> bool {
        self.abort.is_none()
    }
}

/// Median of a sliding window of recent densities.
#[derive(Debug, Clone)]
pub(crate) struct RunningMedian {
    window: std::collections::VecDeque<f64>,
    capacity: usize,
}

impl RunningMedian {
    pub(crate) fn new(capacity: usize) -> Self {
        Self {
            window: std::collections::VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    pub(crate) fn push(&mut self, v: f64) {
        if self.window.len() == self.capacity {
            self.window.pop_front();
        }
        self.window.push_back(v);
    }

    pub(crate) fn median(&self) -> f64 {
        let mut v: Vec<f64> = self.window.iter().copied().collect();
        if v.is_empty() {
            return 0.0;
        }
        let mid = v.len() / 2;
        *v.select_nth_unstable_by(mid, f64::total_cmp).1
    }
}

/// Tracks the density seen by the integrator and decides the guard cap.
#[derive(Debug, Clone)]
pub(crate) struct DensityGuard {
    median: RunningMedian,
    factor: f64,
    step: f64,
    pub(crate) min_seen: f64,
}

impl DensityGuard {
    pub(crate) fn new(cfg: &IntegratorConfig) -> Self {
        Self {
            median: RunningMedian::new(64),
            factor: cfg.guard_factor,
            step: cfg.guard_step,
            min_seen: f64::INFINITY,
        }
    }

    /// Records the density at an accepted point; returns the step cap.
    pub(crate) fn observe(&mut self, density: f64, max_step: f64) -> f64 {
        self.min_seen = self.min_seen.min(density);
        let low = density < self.factor * self.median.median();
        self.median.push(density);
        if low {
            self.step.min(max_step)
        } else {
            max_step
        }
    }
}

pub(crate) struct BohmSystem {
    pub(crate) field: Field,
    pub(crate) last_density: f64,
}

impl System<2> for BohmSystem {
    fn rhs(&mut self, t: f64, y: &[f64; 2], dy: &mut [f64; 2]) -> Result<()> {
        let (v, d) = self.field.velocity_and_density(t, y[0], y[1])?;
        self.last_density = d;
        *dy = v;
        Ok(())
    }
}

/// Integrates `dr/dt = v(r, t)` from `t = 0`, sampling every `cadence`.
pub fn integrate_bohmian(
    propagator: &Propagator,
    initial: [f64; 2],
    t_end: f64,
    cadence: f64,
    cfg: &IntegratorConfig,
) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    if !(cadence > 0.0 && t_end >= 0.0) {
        return Err(Error::InvalidParameter("cadence must be positive and t_end non-negative".into()));
    }
    let mut sys = BohmSystem {
        field: Field::new(propagator.clone()),
        last_density: 0.0,
    };
    let (_, d0) = sys.field.velocity_and_density(0.0, initial[0], initial[1])?;
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
    let mut solver = Dop853::new(0.0, initial, cfg.control());
    let mut cap = cfg.max_step;
    let mut k = 1usize;
    while solver.t() < t_end {
        solver.set_step_cap(cap.min(t_end - solver.t()));
        if let Err(e) = solver.step(&mut sys) {
            record.abort = Some(Abort::from_error(solver.t(), &e));
            break;
        }
        cap = guard.observe(sys.last_density, cfg.max_step);
        let mut next = k as f64 * cadence;
        while next <= solver.t() + 1e-12 * next.max(1.0) && next <= t_end {
            let y = if (next - solver.t()).abs() <= 1e-12 * next.max(1.0) {
                *solver.y()
            } else {
                match solver.dense(&mut sys, next) {
                    Ok(y) => y,
                    Err(e) => {
                        record.abort = Some(Abort::from_error(next, &e));
                        break;
                    }
                }
            };
            record.samples.push([next, y[0], y[1]]);
            k += 1;
            next = k as f64 * cadence;
        }
        if record.abort.is_some() {
            break;
        }
        if solver.t() >= t_end - 1e-12 * t_end.max(1.0) {
            break;
        }
    }
    let stats = solver.stats();
    record.accepted_steps = stats.accepted;
    record.rejected_steps = stats.rejected;
    record.min_density_seen = guard.min_seen.min(record.min_density_seen);
    Ok(record)
}
