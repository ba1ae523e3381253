use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::flow::ClassicalConfig;
use super::section::{poincare_section, return_map, CentralOrbit};
use super::{section_half_width, ClassicalState};
use crate::error::{Error, Result};
use crate::params::OscillatorParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RotationConfig {
    pub crossings: usize,
    /// Largest accepted difference between the rotation numbers of the two
    /// halves of the run.
    pub convergence_tol: f64,
}

impl Default for RotationConfig {
    fn default() -> Self {
        Self {
            crossings: 1000,
            convergence_tol: 2e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationSample {
    pub x0: f64,
    pub rn: f64,
    /// `|RN(first half) − RN(second half)|`.
    pub spread: f64,
    pub chaotic: bool,
    pub escaped: bool,
    pub crossings: usize,
}

impl RotationSample {
    pub fn regular(&self) -> bool {
        !self.chaotic && !self.escaped
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationCurve {
    pub energy: f64,
    pub center: [f64; 2],
    pub samples: Vec<RotationSample>,
}

/// Mean of `Δφ/2π` with `Δφ ∈ [0, 2π)` the azimuth advance between
/// successive crossings seen from the centre.
pub fn rotation_number(
    params: &OscillatorParams,
    e: f64,
    center: [f64; 2],
    x0: f64,
    rc: &RotationConfig,
    cfg: &ClassicalConfig,
) -> Result<RotationSample> {
    if rc.crossings < 4 {
        return Err(Error::InvalidParameter("at least 4 crossings are required".into()));
    }
    let start = ClassicalState::on_section(params, e, x0, 0.0)?;
    if (x0 - center[0]).hypot(center[1]) <= 1e-9 * section_half_width(params, e) {
        return center_rotation_number(params, e, center, x0, rc, cfg);
    }
    let period = TAU / params.omega_y.min(params.omega_x);
    let run = poincare_section(params, start, rc.crossings, 20.0 * period * rc.crossings as f64, cfg)?;
    let mut sample = RotationSample {
        x0,
        rn: f64::NAN,
        spread: f64::NAN,
        chaotic: false,
        escaped: run.escaped.is_some(),
        crossings: run.points.len(),
    };
    if !run.complete {
        sample.chaotic = true;
        return Ok(sample);
    }
    let angle = |x: f64, px: f64| (px - center[1]).atan2(x - center[0]);
    let mut prev = angle(start.x, start.px);
    let steps: Vec<f64> = run
        .points
        .iter()
        .map(|q| {
            let a = angle(q.x, q.px);
            let d = (a - prev).rem_euclid(TAU);
            prev = a;
            d / TAU
        })
        .collect();
    let half = steps.len() / 2;
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    sample.rn = mean(&steps);
    sample.spread = (mean(&steps[..half]) - mean(&steps[half..])).abs();
    sample.chaotic = !(sample.spread <= rc.convergence_tol);
    Ok(sample)
}

/// Linearized rotation number of the fixed point itself: the return-map
/// Jacobian turns by `acos(tr/2)` per crossing, in the sense of `J₁₀`.
fn center_rotation_number(
    params: &OscillatorParams,
    e: f64,
    center: [f64; 2],
    x0: f64,
    rc: &RotationConfig,
    cfg: &ClassicalConfig,
) -> Result<RotationSample> {
    let j = return_map(params, e, center[0], center[1], cfg)?.jacobian;
    let tr = j[0][0] + j[1][1];
    let rn = if tr.abs() >= 2.0 {
        if tr > 0.0 {
            0.0
        } else {
            0.5
        }
    } else {
        let turn = (0.5 * tr).acos() / TAU;
        if j[1][0] > 0.0 {
            turn
        } else {
            1.0 - turn
        }
    };
    Ok(RotationSample {
        x0,
        rn,
        spread: 0.0,
        chaotic: false,
        escaped: false,
        crossings: rc.crossings,
    })
}

/// `n` scan points strictly inside the section line `ẋ = 0`.
pub fn scan_line(params: &OscillatorParams, e: f64, n: usize) -> Vec<f64> {
    let w = section_half_width(params, e);
    (0..n).map(|k| -w + 2.0 * w * (k as f64 + 0.5) / n as f64).collect()
}

pub fn rotation_curve(
    params: &OscillatorParams,
    e: f64,
    center: &CentralOrbit,
    xs: &[f64],
    rc: &RotationConfig,
    cfg: &ClassicalConfig,
) -> Result<RotationCurve> {
    let c = [center.x, center.px];
    let one = |x: &f64| rotation_number(params, e, c, *x, rc, cfg);
    #[cfg(feature = "parallel")]
    let samples: Vec<RotationSample> = {
        use rayon::prelude::*;
        xs.par_iter().map(one).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let samples: Vec<RotationSample> = xs.iter().map(one).collect::<Result<_>>()?;
    Ok(RotationCurve {
        energy: e,
        center: c,
        samples,
    })
}

/// Runs of at least `min_len` consecutive regular samples whose rotation
/// number lies within `tol` of `target`, as `(x_first, x_last)`.
pub fn find_plateaus(curve: &RotationCurve, target: f64, tol: f64, min_len: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut run: Vec<f64> = Vec::new();
    let flush = |run: &mut Vec<f64>, out: &mut Vec<(f64, f64)>| {
        if run.len() >= min_len.max(1) {
            out.push((run[0], run[run.len() - 1]));
        }
        run.clear();
    };
    for s in &curve.samples {
        if s.regular() && (s.rn - target).abs() < tol {
            run.push(s.x0);
        } else {
            flush(&mut run, &mut out);
        }
    }
    flush(&mut run, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::central_periodic_orbit;

    #[test]
    fn uncoupled_rotation_number() {
        let p = OscillatorParams::default();
        let cfg = ClassicalConfig::default();
        let c = central_periodic_orbit(&p, 2.0, &cfg).unwrap();
        let rc = RotationConfig {
            crossings: 200,
            ..RotationConfig::default()
        };
        let curve = rotation_curve(&p, 2.0, &c, &scan_line(&p, 2.0, 7), &rc, &cfg).unwrap();
        assert_eq!(curve.samples[3].x0, c.x);
        let expected = 2.0 - p.omega_x / p.omega_y;
        for s in &curve.samples {
            assert!(s.regular() && (s.rn - expected).abs() < 1e-3, "{s:?}");
        }
    }

    #[test]
    fn plateau_runs() {
        let mk = |x0: f64, rn: f64, chaotic: bool| RotationSample {
            x0,
            rn,
            spread: 0.0,
            chaotic,
            escaped: false,
            crossings: 10,
        };
        let curve = RotationCurve {
            energy: 1.0,
            center: [0.0, 0.0],
            samples: vec![
                mk(0.0, 0.6, false),
                mk(0.1, 0.667, false),
                mk(0.2, 0.666, false),
                mk(0.3, 0.6668, true),
                mk(0.4, 0.6665, false),
                mk(0.5, 0.6666, false),
                mk(0.6, 0.6667, false),
            ],
        };
        assert_eq!(find_plateaus(&curve, 2.0 / 3.0, 5e-3, 2), vec![(0.1, 0.2), (0.4, 0.6)]);
        assert_eq!(find_plateaus(&curve, 2.0 / 3.0, 5e-3, 3), vec![(0.4, 0.6)]);
    }
}
