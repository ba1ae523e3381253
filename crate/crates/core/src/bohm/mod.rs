//! Bohmian trajectories, stretching numbers, occupancy colorplots and the
//! chaos classifier.

mod classify;
mod histogram;
mod lyapunov;
mod sampling;
mod trajectory;

pub use classify::{
    classify_by_stretching, classify_trajectory, window_distance, ChaosVerdict, ClassifierConfig, ErgodicReference,
    Method,
};
pub use histogram::{frobenius_distance, node_visit_colorplot, occupancy, OccupancyHistogram, DEFAULT_BIN};
pub use lyapunov::{envelope_slope, log_log_slope, lyapunov_series, shadow_bohmian, DeviationState, ShadowRun, DEFAULT_SEPARATION};
pub use sampling::{born_sample, density_support};
pub use trajectory::{integrate_bohmian, Abort, IntegratorConfig, TrajectoryRecord};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{centroid, covariance, deformation, density_heatmap};
use crate::nodes::{find_nodes, DEFAULT_STEP};
use crate::grid::Rect;
use crate::state::Propagator;

/// Sampling cadence used for occupancy histograms.
pub const OCCUPANCY_CADENCE: f64 = 0.1;

/// Per-trajectory outcome of an ensemble run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMember {
    pub initial: [f64; 2],
    pub colorplot: ChaosVerdict,
    pub stretching: ChaosVerdict,
    pub final_chi: Option<f64>,
    pub abort: Option<Abort>,
}

impl EnsembleMember {
    pub fn onset(&self, method: Method) -> Option<f64> {
        match method {
            Method::Colorplot => self.colorplot.onset_time,
            Method::Lyapunov => self.stretching.onset_time,
        }
    }
}

/// Integrates every initial condition with its shadow and classifies it by
/// both methods. Members are independent; results keep input order.
pub fn run_ensemble(
    propagator: &Propagator,
    initials: &[[f64; 2]],
    t_end: f64,
    integrator: &IntegratorConfig,
    classifier: &ClassifierConfig,
) -> Result<Vec<EnsembleMember>> {
    run_ensemble_with(propagator, initials, t_end, integrator, classifier, &|_, _| Ok(()))
}

/// As [`run_ensemble`], handing each member's run to `sink` with its index
/// before the record is dropped.
pub fn run_ensemble_with(
    propagator: &Propagator,
    initials: &[[f64; 2]],
    t_end: f64,
    integrator: &IntegratorConfig,
    classifier: &ClassifierConfig,
    sink: &(dyn Fn(usize, &ShadowRun) -> Result<()> + Sync),
) -> Result<Vec<EnsembleMember>> {
    if initials.is_empty() {
        return Err(Error::InvalidParameter("empty ensemble".into()));
    }
    let reference = ErgodicReference::build(propagator, classifier, t_end)?;
    let member = |(k, p): (usize, &[f64; 2])| -> Result<EnsembleMember> {
        let run = shadow_bohmian(propagator, *p, t_end, 1.0, OCCUPANCY_CADENCE, integrator)?;
        sink(k, &run)?;
        Ok(EnsembleMember {
            initial: *p,
            colorplot: classify_trajectory(&run.record, &reference, classifier)?,
            stretching: classify_by_stretching(&run.deviation, classifier),
            final_chi: run.deviation.last_chi(),
            abort: run.record.abort,
        })
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        initials.par_iter().enumerate().map(member).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        initials.iter().enumerate().map(member).collect()
    }
}

/// One point of a chaotic-fraction curve with a Wilson 95% band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FractionPoint {
    pub t: f64,
    pub fraction: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Fraction of non-aborted members with onset `≤ t`, on the given times.
pub fn chaotic_fraction_curve(members: &[EnsembleMember], method: Method, times: &[f64]) -> Vec<FractionPoint> {
    let valid: Vec<&EnsembleMember> = members.iter().filter(|m| m.abort.is_none()).collect();
    let n = valid.len();
    times
        .iter()
        .map(|&t| {
            let k = valid.iter().filter(|m| m.onset(method).is_some_and(|o| o <= t)).count();
            let (lower, upper) = wilson_interval(k, n);
            FractionPoint {
                t,
                fraction: if n == 0 { 0.0 } else { k as f64 / n as f64 },
                lower,
                upper,
            }
        })
        .collect()
}

fn wilson_interval(k: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054;
    let (k, n) = (k as f64, n as f64);
    let p = k / n;
    let denom = 1.0 + z * z / n;
    let center = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

pub const DEFORMATION_THRESHOLD: f64 = 0.1;
pub const DEFORMATION_REGION: Rect = Rect::square(6.0);
const DEFORMATION_RESOLUTION: usize = 120;

/// First time on a `dt` grid at which the density deformation exceeds
/// `threshold`, or `None` within `t_max`.
pub fn deformation_time(propagator: &Propagator, dt: f64, t_max: f64, threshold: f64) -> Result<Option<f64>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter("time step must be positive".into()));
    }
    let steps = (t_max / dt).floor() as usize;
    for k in 1..=steps {
        let t = k as f64 * dt;
        if deformation(propagator, t, DEFORMATION_REGION, DEFORMATION_RESOLUTION)? > threshold {
            return Ok(Some(t));
        }
    }
    Ok(None)
}

/// Smallest Mahalanobis distance, in the density's own moment metric, from
/// the density centroid to a nodal point at time `t`; infinite without nodes.
pub fn node_blob_distance(propagator: &Propagator, t: f64) -> Result<f64> {
    let state = propagator.evolve(t);
    let g = density_heatmap(&state, DEFORMATION_REGION, DEFORMATION_RESOLUTION)?;
    let [mx, my] = centroid(&g);
    let [cxx, cxy, cyy] = covariance(&g);
    let det = cxx * cyy - cxy * cxy;
    let set = find_nodes(&state, DEFORMATION_REGION, DEFAULT_STEP)?;
    Ok(set
        .nodes
        .iter()
        .map(|n| {
            let (dx, dy) = (n.x - mx, n.y - my);
            ((cyy * dx * dx - 2.0 * cxy * dx * dy + cxx * dy * dy) / det).sqrt()
        })
        .fold(f64::INFINITY, f64::min))
}

/// First time on a `dt` grid at which a nodal point lies inside the
/// one-standard-deviation ellipse of the density, or `None` within `t_max`.
pub fn node_passage_time(propagator: &Propagator, dt: f64, t_max: f64) -> Result<Option<f64>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter("time step must be positive".into()));
    }
    let steps = (t_max / dt).floor() as usize;
    for k in 0..=steps {
        let t = k as f64 * dt;
        if node_blob_distance(propagator, t)? < 1.0 {
            return Ok(Some(t));
        }
    }
    Ok(None)
}
