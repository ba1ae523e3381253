use serde::{Deserialize, Serialize};

use super::histogram::{frobenius_distance, OccupancyHistogram};
use super::lyapunov::DeviationState;
use super::trajectory::TrajectoryRecord;
use crate::error::{Error, Result};
use crate::field::density_heatmap;
use crate::grid::Rect;
use crate::state::Propagator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Colorplot,
    Lyapunov,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaosVerdict {
    pub is_chaotic: bool,
    pub onset_time: Option<f64>,
    /// Start of the detected growth episode (stretching method only): the
    /// last checkpoint before onset with drawup at most `ln 10`.
    pub entry_time: Option<f64>,
    /// Distance of the last complete window from its reference.
    pub distance_to_reference: f64,
    /// Method statistic: the distance for colorplots, the largest
    /// log-growth of the deviation for the stretching method.
    pub score: f64,
    pub method: Method,
    /// Final distance within 10% of the threshold.
    pub borderline: bool,
    /// Record too short for a single window.
    pub undetermined: bool,
}

/// Classifier settings. Colorplot windows ending every `stride` are compared
/// with the reference; `window = 0` makes every window start at `t = 0`.
/// The stretching method flags deviation growth beyond `e^{ln_growth}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifierConfig {
    pub region: Rect,
    pub bin: f64,
    pub window: f64,
    pub stride: f64,
    pub threshold: f64,
    pub frame_dt: f64,
    pub ln_growth: f64,
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        self.region.validate()?;
        let positive = [self.bin, self.stride, self.threshold, self.frame_dt, self.ln_growth];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) || !(self.window >= 0.0) {
            return Err(Error::InvalidParameter(
                "classifier bin, stride, threshold, frame_dt and ln_growth must be positive, window non-negative".into(),
            ));
        }
        Ok(())
    }

    fn window_start(&self, end: f64) -> f64 {
        if self.window > 0.0 {
            end - self.window
        } else {
            0.0
        }
    }
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            region: Rect::square(4.0),
            bin: 0.4,
            window: 0.0,
            stride: 50.0,
            threshold: 0.05,
            frame_dt: 0.5,
            ln_growth: 2.0 * std::f64::consts::LN_10,
        }
    }
}

/// Time-averaged `|Ψ|²` on the classifier grid, queryable over any window
/// by prefix sums of frames taken every `dt`.
#[derive(Debug, Clone)]
pub struct ErgodicReference {
    pub region: Rect,
    pub bin: f64,
    pub dt: f64,
    prefix: Vec<Vec<f64>>,
}

impl ErgodicReference {
    pub fn build(propagator: &Propagator, cfg: &ClassifierConfig, t_end: f64) -> Result<Self> {
        cfg.validate()?;
        let n = OccupancyHistogram::new(cfg.region, cfg.bin)?.nx;
        let frames = (t_end / cfg.frame_dt).ceil() as usize + 1;
        let frame = |k: usize| -> Result<Vec<f64>> {
            let g = density_heatmap(&propagator.evolve(k as f64 * cfg.frame_dt), cfg.region, n)?;
            let s = g.sum();
            Ok(g.values().iter().map(|v| v / s).collect())
        };
        #[cfg(feature = "parallel")]
        let grids: Vec<Vec<f64>> = {
            use rayon::prelude::*;
            (0..frames).into_par_iter().map(frame).collect::<Result<_>>()?
        };
        #[cfg(not(feature = "parallel"))]
        let grids: Vec<Vec<f64>> = (0..frames).map(frame).collect::<Result<_>>()?;
        let mut prefix = Vec::with_capacity(frames + 1);
        let mut acc = vec![0.0; n * n];
        prefix.push(acc.clone());
        for g in grids {
            for (a, v) in acc.iter_mut().zip(&g) {
                *a += v;
            }
            prefix.push(acc.clone());
        }
        Ok(Self {
            region: cfg.region,
            bin: cfg.bin,
            dt: cfg.frame_dt,
            prefix,
        })
    }

    pub fn horizon(&self) -> f64 {
        (self.prefix.len() - 2) as f64 * self.dt
    }

    /// Normalized mean density over frames with `t ∈ [a, b]`.
    pub fn window(&self, a: f64, b: f64) -> Vec<f64> {
        let last = self.prefix.len() - 2;
        let i0 = ((a / self.dt).ceil().max(0.0) as usize).min(last);
        let i1 = ((b / self.dt).floor().max(0.0) as usize).clamp(i0, last);
        let (hi, lo) = (&self.prefix[i1 + 1], &self.prefix[i0]);
        let count = (i1 + 1 - i0) as f64;
        hi.iter().zip(lo).map(|(h, l)| (h - l) / count).collect()
    }
}

fn window_histogram(record: &TrajectoryRecord, cfg: &ClassifierConfig, a: f64, b: f64) -> Result<OccupancyHistogram> {
    let mut h = OccupancyHistogram::new(cfg.region, cfg.bin)?;
    for s in record.samples.iter().filter(|s| s[0] >= a && s[0] <= b) {
        h.add(s[1], s[2]);
    }
    Ok(h)
}

/// Distance between the trajectory's window histogram and the reference.
/// Samples outside the grid count as misses so escape regions are not
/// silently ignored.
pub fn window_distance(
    record: &TrajectoryRecord,
    reference: &ErgodicReference,
    cfg: &ClassifierConfig,
    a: f64,
    b: f64,
) -> Result<f64> {
    let h = window_histogram(record, cfg, a, b)?;
    let n = (h.total + h.outside).max(1) as f64;
    let p: Vec<f64> = h.counts.iter().map(|&c| c as f64 / n).collect();
    Ok(frobenius_distance(&p, &reference.window(a, b)))
}

/// Colorplot verdict: chaotic once the occupancy histogram of a window comes
/// within `threshold` of the ergodic reference over the same window.
pub fn classify_trajectory(
    record: &TrajectoryRecord,
    reference: &ErgodicReference,
    cfg: &ClassifierConfig,
) -> Result<ChaosVerdict> {
    if reference.region != cfg.region || reference.bin != cfg.bin {
        return Err(Error::InvalidParameter("reference grid does not match classifier grid".into()));
    }
    cfg.validate()?;
    let end = record.end_time().min(reference.horizon());
    let first = cfg.window.max(cfg.stride);
    let mut verdict = ChaosVerdict {
        is_chaotic: false,
        onset_time: None,
        entry_time: None,
        distance_to_reference: f64::NAN,
        score: f64::NAN,
        method: Method::Colorplot,
        borderline: false,
        undetermined: end < first - 1e-9,
    };
    if verdict.undetermined {
        return Ok(verdict);
    }
    let mut b = first;
    let mut last = f64::NAN;
    while b <= end + 1e-9 {
        last = window_distance(record, reference, cfg, cfg.window_start(b), b)?;
        if verdict.onset_time.is_none() && last < cfg.threshold {
            verdict.onset_time = Some(b);
        }
        b += cfg.stride;
    }
    verdict.is_chaotic = verdict.onset_time.is_some();
    verdict.distance_to_reference = last;
    verdict.score = last;
    verdict.borderline = ((last - cfg.threshold) / cfg.threshold).abs() < 0.1;
    Ok(verdict)
}

/// Stretching verdict: chaotic once the deviation has grown by a factor
/// `e^{ln_growth}` above its running minimum, i.e. the cumulative sum of
/// stretching numbers rises `ln_growth` above its lowest earlier value.
/// Ordered orbits keep this drawup bounded.
pub fn classify_by_stretching(dev: &DeviationState, cfg: &ClassifierConfig) -> ChaosVerdict {
    let mut verdict = ChaosVerdict {
        is_chaotic: false,
        onset_time: None,
        entry_time: None,
        distance_to_reference: f64::NAN,
        score: 0.0,
        method: Method::Lyapunov,
        borderline: false,
        undetermined: dev.is_empty(),
    };
    let (mut cum, mut low, mut best) = (0.0f64, 0.0f64, 0.0f64);
    let mut quiet = 0.0;
    for (t, a) in dev.times.iter().zip(&dev.stretchings) {
        cum += a;
        low = low.min(cum);
        best = best.max(cum - low);
        if verdict.onset_time.is_some() {
            continue;
        }
        if cum - low <= std::f64::consts::LN_10 {
            quiet = *t;
        }
        if cum - low >= cfg.ln_growth {
            verdict.onset_time = Some(*t);
            verdict.entry_time = Some(quiet);
        }
    }
    verdict.is_chaotic = verdict.onset_time.is_some();
    verdict.score = best;
    verdict.borderline = ((best - cfg.ln_growth) / cfg.ln_growth).abs() < 0.1;
    verdict
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stretching_drawup_detects_growth() {
        let mut d = DeviationState::new(1.0, 1e-8);
        for k in 0..200 {
            // shrinking first, then exponential growth of 0.5 per unit time
            let a: f64 = if k < 100 { -0.05 } else { 0.5 };
            d.push(1e-8 * a.exp());
        }
        let cfg = ClassifierConfig::default();
        let v = classify_by_stretching(&d, &cfg);
        assert!(v.is_chaotic);
        let onset = v.onset_time.unwrap();
        let expected = 100.0 + (cfg.ln_growth / 0.5).ceil();
        assert!((onset - expected).abs() < 1e-9, "{onset} vs {expected}");
        let entry = 100.0 + (std::f64::consts::LN_10 / 0.5).floor();
        assert_eq!(v.entry_time, Some(entry));
    }

    #[test]
    fn bounded_oscillation_is_ordered() {
        let mut d = DeviationState::new(1.0, 1e-8);
        for k in 0..5000 {
            let a = if k % 2 == 0 { 2.0 } else { -2.0 };
            d.push(1e-8 * f64::exp(a));
        }
        let v = classify_by_stretching(&d, &ClassifierConfig::default());
        assert!(!v.is_chaotic && v.onset_time.is_none() && v.entry_time.is_none());
        assert!((v.score - 2.0).abs() < 1e-12);
    }

    #[test]
    fn empty_series_is_undetermined() {
        let d = DeviationState::new(1.0, 1e-8);
        let v = classify_by_stretching(&d, &ClassifierConfig::default());
        assert!(v.undetermined && !v.is_chaotic && v.onset_time.is_none());
    }
}
