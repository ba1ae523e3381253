use serde::{Deserialize, Serialize};

use super::flow::{acceleration, ClassicalConfig, Flow};
use super::ClassicalState;
use crate::error::{Error, Result};
use crate::ode::{Dop853, System};
use crate::params::OscillatorParams;

const CROSSING_TOL: f64 = 1e-10;

/// Upward crossing of `y = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionPoint {
    pub x: f64,
    pub px: f64,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionRun {
    pub points: Vec<SectionPoint>,
    pub escaped: Option<f64>,
    /// All requested crossings were found.
    pub complete: bool,
    /// `|y|` of the worst polished crossing.
    pub max_residual: f64,
}

/// Time of the `y: − → +` sign change inside the last step, by safeguarded
/// Newton iteration on the dense output (`ẏ` is itself a state component).
fn polish_crossing<const D: usize, S: System<D>>(solver: &mut Dop853<D>, sys: &mut S) -> Result<(f64, [f64; D])> {
    let (mut a, mut b) = (solver.t_prev(), solver.t());
    let (ya, yb) = (solver.y_prev()[1], solver.y()[1]);
    let mut t = a - ya * (b - a) / (yb - ya);
    let mut z = solver.dense(sys, t)?;
    for _ in 0..60 {
        if z[1] == 0.0 {
            break;
        }
        if z[1] < 0.0 {
            a = t;
        } else {
            b = t;
        }
        let mut next = t - z[1] / z[3];
        if !(next > a && next < b) {
            next = 0.5 * (a + b);
        }
        let done = (next - t).abs() <= 1e-15 * t.abs().max(1.0);
        t = next;
        z = solver.dense(sys, t)?;
        if done {
            break;
        }
    }
    if !(z[1].abs() < CROSSING_TOL) {
        return Err(Error::Convergence {
            what: "section crossing",
            iterations: 60,
            residual: z[1].abs(),
        });
    }
    Ok((t, z))
}

/// First `n_crossings` upward crossings of `y = 0` within `t_max`.
pub fn poincare_section(
    params: &OscillatorParams,
    initial: ClassicalState,
    n_crossings: usize,
    t_max: f64,
    cfg: &ClassicalConfig,
) -> Result<SectionRun> {
    params.validate()?;
    cfg.validate()?;
    let mut sys = Flow(*params);
    let mut solver = Dop853::new(0.0, initial.to_array(), cfg.control());
    let mut run = SectionRun {
        points: Vec::with_capacity(n_crossings),
        escaped: None,
        complete: n_crossings == 0,
        max_residual: 0.0,
    };
    while run.points.len() < n_crossings && solver.t() < t_max {
        solver.step(&mut sys)?;
        if solver.y_prev()[1] < 0.0 && solver.y()[1] >= 0.0 {
            let (t, z) = polish_crossing(&mut solver, &mut sys)?;
            run.max_residual = run.max_residual.max(z[1].abs());
            run.points.push(SectionPoint { x: z[0], px: z[2], t });
        }
        if cfg.escaped(solver.y()) {
            run.escaped = Some(solver.t());
            break;
        }
    }
    run.complete = run.points.len() == n_crossings;
    Ok(run)
}

/// Flow plus the 4×4 variational matrix, row-major after the state.
struct Variational(OscillatorParams);

impl System<20> for Variational {
    fn rhs(&mut self, _t: f64, z: &[f64; 20], dz: &mut [f64; 20]) -> Result<()> {
        let p = &self.0;
        let (x, y) = (z[0], z[1]);
        let [ax, ay] = acceleration(p, x, y);
        dz[..4].copy_from_slice(&[z[2], z[3], ax, ay]);
        // rows of ∂f/∂z: (0,0,1,0), (0,0,0,1), (−ωx², −2εy, 0, 0), (−2εy, −ωy²−2εx, 0, 0)
        let (wx2, wy2, e) = (p.omega_x * p.omega_x, p.omega_y * p.omega_y, p.epsilon);
        let m = &z[4..];
        for c in 0..4 {
            dz[4 + c] = m[8 + c];
            dz[8 + c] = m[12 + c];
            dz[12 + c] = -wx2 * m[c] - 2.0 * e * y * m[4 + c];
            dz[16 + c] = -2.0 * e * y * m[c] - (wy2 + 2.0 * e * x) * m[4 + c];
        }
        Ok(())
    }
}

/// Section return map at fixed energy and its Jacobian in `(x, ẋ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnMap {
    pub x: f64,
    pub px: f64,
    pub time: f64,
    pub jacobian: [[f64; 2]; 2],
}

pub fn return_map(params: &OscillatorParams, e: f64, x: f64, px: f64, cfg: &ClassicalConfig) -> Result<ReturnMap> {
    let s = ClassicalState::on_section(params, e, x, px)?;
    let mut z0 = [0.0; 20];
    z0[..4].copy_from_slice(&s.to_array());
    for i in 0..4 {
        z0[4 + 5 * i] = 1.0;
    }
    let mut sys = Variational(*params);
    let mut solver = Dop853::new(0.0, z0, cfg.control());
    let t_max = 1e3 * std::f64::consts::TAU / params.omega_y.min(params.omega_x);
    loop {
        solver.step(&mut sys)?;
        if solver.y_prev()[1] < 0.0 && solver.y()[1] >= 0.0 {
            break;
        }
        if cfg.escaped(solver.y()) {
            return Err(Error::Escaped { t: solver.t() });
        }
        if solver.t() > t_max {
            return Err(Error::Convergence {
                what: "section return",
                iterations: solver.stats().accepted,
                residual: solver.y()[1].abs(),
            });
        }
    }
    let (t, z) = polish_crossing(&mut solver, &mut sys)?;
    let phi = |r: usize, c: usize| z[4 + 4 * r + c];
    let wx2 = params.omega_x * params.omega_x;
    // admissible initial perturbations keep the energy fixed through δẏ₀
    let u = [
        [1.0, 0.0, 0.0, -wx2 * s.x / s.py],
        [0.0, 0.0, 1.0, -s.px / s.py],
    ];
    let [ax, _] = acceleration(params, z[0], z[1]);
    let f = [z[2], z[3], ax];
    let mut jac = [[0.0; 2]; 2];
    for (k, uk) in u.iter().enumerate() {
        let dz: Vec<f64> = (0..4).map(|r| (0..4).map(|c| phi(r, c) * uk[c]).sum()).collect();
        let dt = -dz[1] / z[3];
        jac[0][k] = dz[0] + f[0] * dt;
        jac[1][k] = dz[2] + f[2] * dt;
    }
    Ok(ReturnMap {
        x: z[0],
        px: z[2],
        time: t,
        jacobian: jac,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CentralOrbit {
    pub x: f64,
    pub px: f64,
    pub period: f64,
    pub trace: f64,
    pub stable: bool,
    pub iterations: usize,
}

/// Fixed point of the section map near the centre, by Newton iteration from
/// `(x, ẋ) = (−4Eε, 0)`.
pub fn central_periodic_orbit(params: &OscillatorParams, e: f64, cfg: &ClassicalConfig) -> Result<CentralOrbit> {
    params.validate()?;
    cfg.validate()?;
    let limit = super::section_half_width(params, e);
    let (mut x, mut px) = (-4.0 * e * params.epsilon, 0.0);
    let max_iter = 30;
    for it in 0..=max_iter {
        let m = return_map(params, e, x, px, cfg)?;
        let (rx, rp) = (m.x - x, m.px - px);
        let res = rx.hypot(rp);
        if res < 1e-11 {
            let trace = m.jacobian[0][0] + m.jacobian[1][1];
            return Ok(CentralOrbit {
                x,
                px,
                period: m.time,
                trace,
                stable: trace.abs() < 2.0,
                iterations: it,
            });
        }
        if it == max_iter {
            return Err(Error::Convergence {
                what: "central periodic orbit",
                iterations: it,
                residual: res,
            });
        }
        let a = m.jacobian[0][0] - 1.0;
        let b = m.jacobian[0][1];
        let c = m.jacobian[1][0];
        let d = m.jacobian[1][1] - 1.0;
        let det = a * d - b * c;
        if det.abs() < 1e-300 {
            return Err(Error::Convergence {
                what: "central periodic orbit (singular Jacobian)",
                iterations: it,
                residual: res,
            });
        }
        x -= (d * rx - b * rp) / det;
        px -= (-c * rx + a * rp) / det;
        if !(x.abs() < limit && px.abs() < limit) {
            return Err(Error::Convergence {
                what: "central periodic orbit (left the allowed region)",
                iterations: it + 1,
                residual: res,
            });
        }
    }
    unreachable!()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_at_zero_coupling() {
        let p = OscillatorParams::default();
        let e = 2.0;
        let s = ClassicalState::on_section(&p, e, (2.0 * e).sqrt() * 0.6, (2.0 * e).sqrt() * 0.3).unwrap();
        let run = poincare_section(&p, s, 100, 1e5, &ClassicalConfig::default()).unwrap();
        assert!(run.complete && run.max_residual < 1e-10);
        let r2 = s.x * s.x + s.px * s.px;
        for q in &run.points {
            assert!((q.x * q.x + q.px * q.px - r2).abs() < 1e-8);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let p = OscillatorParams::with_epsilon(0.05);
        let cfg = ClassicalConfig::default();
        let (e, x, px) = (2.88, 0.4, -0.2);
        let m = return_map(&p, e, x, px, &cfg).unwrap();
        let h = 1e-6;
        for k in 0..2 {
            let (dx, dp) = if k == 0 { (h, 0.0) } else { (0.0, h) };
            let plus = return_map(&p, e, x + dx, px + dp, &cfg).unwrap();
            let minus = return_map(&p, e, x - dx, px - dp, &cfg).unwrap();
            let col = [(plus.x - minus.x) / (2.0 * h), (plus.px - minus.px) / (2.0 * h)];
            for r in 0..2 {
                assert!((m.jacobian[r][k] - col[r]).abs() < 1e-6, "J[{r}][{k}] {} vs {}", m.jacobian[r][k], col[r]);
            }
        }
        let det = m.jacobian[0][0] * m.jacobian[1][1] - m.jacobian[0][1] * m.jacobian[1][0];
        assert!((det - 1.0).abs() < 1e-8, "area preservation {det}");
    }

    #[test]
    fn centre_at_zero_coupling() {
        let c = central_periodic_orbit(&OscillatorParams::default(), 2.0, &ClassicalConfig::default()).unwrap();
        assert!(c.x.abs() < 1e-12 && c.px.abs() < 1e-12 && c.stable && c.iterations == 0);
    }
}
