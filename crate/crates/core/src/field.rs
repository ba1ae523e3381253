//! Pointwise evaluation of `Ψ`, `∇Ψ`, `|Ψ|²` and the Bohmian velocity
//! field, plus gridded density snapshots.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, Rect};
use crate::hermite::eigenfunctions;
use crate::params::OscillatorParams;
use crate::state::{Propagator, StateVector};

/// Density below which the velocity field is treated as singular.
pub const NODE_DENSITY_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WavefunctionSample {
    pub psi_real: f64,
    pub psi_imag: f64,
    pub grad_real: [f64; 2],
    pub grad_imag: [f64; 2],
    pub density: f64,
}

/// Scratch tables for one evaluation point; reuse across calls.
#[derive(Debug, Clone)]
pub struct Scratch {
    fx: Vec<f64>,
    dfx: Vec<f64>,
    fy: Vec<f64>,
    dfy: Vec<f64>,
}

impl Scratch {
    pub fn new(cutoff: usize) -> Self {
        Self {
            fx: vec![0.0; cutoff + 1],
            dfx: vec![0.0; cutoff + 1],
            fy: vec![0.0; cutoff + 1],
            dfy: vec![0.0; cutoff + 1],
        }
    }
}

#[inline]
fn shell_index(nx: usize, ny: usize) -> usize {
    let n = nx + ny;
    n * (n + 1) / 2 + nx
}

/// `Ψ(x, y)` and its gradient from basis coefficients `q`.
pub fn eval_coefficients(
    q: &[Complex64],
    cutoff: usize,
    params: &OscillatorParams,
    x: f64,
    y: f64,
    scratch: &mut Scratch,
) -> WavefunctionSample {
    eigenfunctions(params.alpha_x(), x, &mut scratch.fx, &mut scratch.dfx);
    eigenfunctions(params.alpha_y(), y, &mut scratch.fy, &mut scratch.dfy);
    let zero = Complex64::new(0.0, 0.0);
    let (mut psi, mut gx, mut gy) = (zero, zero, zero);
    for nx in 0..=cutoff {
        let (mut a, mut b) = (zero, zero);
        for ny in 0..=(cutoff - nx) {
            let c = q[shell_index(nx, ny)];
            a += c * scratch.fy[ny];
            b += c * scratch.dfy[ny];
        }
        psi += a * scratch.fx[nx];
        gx += a * scratch.dfx[nx];
        gy += b * scratch.fx[nx];
    }
    WavefunctionSample {
        psi_real: psi.re,
        psi_imag: psi.im,
        grad_real: [gx.re, gy.re],
        grad_imag: [gx.im, gy.im],
        density: psi.re * psi.re + psi.im * psi.im,
    }
}

/// `(ħ/m)(Ψ_R ∇Ψ_I − Ψ_I ∇Ψ_R)/|Ψ|²` per axis.
pub fn velocity_from_sample(s: &WavefunctionSample, params: &OscillatorParams, x: f64, y: f64) -> Result<[f64; 2]> {
    if !(s.density >= NODE_DENSITY_FLOOR) {
        return Err(Error::NodeProximity { x, y, density: s.density });
    }
    let j = |k: usize| s.psi_real * s.grad_imag[k] - s.psi_imag * s.grad_real[k];
    Ok([
        params.hbar / params.mass_x * j(0) / s.density,
        params.hbar / params.mass_y * j(1) / s.density,
    ])
}

pub fn eval_wavefunction(state: &StateVector, x: f64, y: f64) -> WavefunctionSample {
    let mut scratch = Scratch::new(state.cutoff);
    eval_coefficients(&state.coefficients, state.cutoff, &state.params, x, y, &mut scratch)
}

pub fn bohm_velocity(state: &StateVector, x: f64, y: f64) -> Result<[f64; 2]> {
    let s = eval_wavefunction(state, x, y);
    velocity_from_sample(&s, &state.params, x, y)
}

/// Time-dependent field with a one-entry cache of `q(t)`; one per worker.
#[derive(Debug, Clone)]
pub struct Field {
    propagator: Propagator,
    time: f64,
    q: Vec<Complex64>,
    scratch: Scratch,
}

impl Field {
    pub fn new(propagator: Propagator) -> Self {
        let dim = propagator.dim();
        let cutoff = propagator.model().cutoff;
        Self {
            propagator,
            time: f64::NAN,
            q: vec![Complex64::new(0.0, 0.0); dim],
            scratch: Scratch::new(cutoff),
        }
    }

    pub fn propagator(&self) -> &Propagator {
        &self.propagator
    }

    pub fn params(&self) -> &OscillatorParams {
        self.propagator.params()
    }

    fn update(&mut self, t: f64) {
        if t != self.time {
            self.propagator.coefficients_at(t, &mut self.q);
            self.time = t;
        }
    }

    pub fn sample(&mut self, t: f64, x: f64, y: f64) -> WavefunctionSample {
        self.update(t);
        let cutoff = self.propagator.model().cutoff;
        let params = *self.propagator.params();
        eval_coefficients(&self.q, cutoff, &params, x, y, &mut self.scratch)
    }

    pub fn velocity(&mut self, t: f64, x: f64, y: f64) -> Result<[f64; 2]> {
        let s = self.sample(t, x, y);
        velocity_from_sample(&s, self.propagator.params(), x, y)
    }

    /// Velocity plus the density at the point.
    pub fn velocity_and_density(&mut self, t: f64, x: f64, y: f64) -> Result<([f64; 2], f64)> {
        let s = self.sample(t, x, y);
        Ok((velocity_from_sample(&s, self.propagator.params(), x, y)?, s.density))
    }
}

/// `Ψ` sampled at grid vertices; `values[j * xs.len() + i] = Ψ(xs[i], ys[j])`.
#[derive(Debug, Clone)]
pub struct VertexGrid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub values: Vec<Complex64>,
}

impl VertexGrid {
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.values[j * self.xs.len() + i]
    }
}

/// `Ψ` on the `(nx + 1) × (ny + 1)` vertices spanning `rect`, by separable
/// summation.
pub fn psi_on_grid(state: &StateVector, rect: Rect, nx: usize, ny: usize) -> VertexGrid {
    let k = state.cutoff;
    let xs = rect.vertex_xs(nx);
    let ys = rect.vertex_ys(ny);
    let tables = |alpha: f64, pts: &[f64]| -> Vec<Vec<f64>> {
        pts.iter()
            .map(|&p| {
                let mut v = vec![0.0; k + 1];
                let mut d = vec![0.0; k + 1];
                eigenfunctions(alpha, p, &mut v, &mut d);
                v
            })
            .collect()
    };
    let tx = tables(state.params.alpha_x(), &xs);
    let ty = tables(state.params.alpha_y(), &ys);
    let zero = Complex64::new(0.0, 0.0);
    // a[i][ny] = Σ_nx q(nx, ny) ψ_nx(x_i)
    let partial: Vec<Vec<Complex64>> = tx
        .iter()
        .map(|fx| {
            let mut row = vec![zero; k + 1];
            for (iy, r) in row.iter_mut().enumerate() {
                for ixl in 0..=(k - iy) {
                    *r += state.coefficients[shell_index(ixl, iy)] * fx[ixl];
                }
            }
            row
        })
        .collect();
    let mut values = Vec::with_capacity(xs.len() * ys.len());
    for fy in &ty {
        for a in &partial {
            values.push(a.iter().zip(fy).map(|(c, f)| c * f).sum());
        }
    }
    VertexGrid { xs, ys, values }
}

/// `|Ψ|²` at cell centers of a `resolution × resolution` grid.
pub fn density_heatmap(state: &StateVector, region: Rect, resolution: usize) -> Result<Grid<f64>> {
    if resolution < 2 {
        return Err(Error::InvalidParameter("heatmap resolution must be at least 2".into()));
    }
    let inner = region.cell_centers_rect(resolution, resolution);
    let psi = psi_on_grid(state, inner, resolution - 1, resolution - 1);
    let values = psi.values.iter().map(|c| c.norm_sqr()).collect();
    Ok(Grid::new(region, resolution, resolution, values))
}

/// Distance of the density at `t` from the `t = 0` density translated
/// to the same centroid, on unit-L² normalized grids.
pub fn deformation(propagator: &Propagator, t: f64, region: Rect, resolution: usize) -> Result<f64> {
    let now = density_heatmap(&propagator.evolve(t), region, resolution)?;
    let start_state = propagator.evolve(0.0);
    let c0 = centroid(&density_heatmap(&start_state, region, resolution)?);
    let c1 = centroid(&now);
    let shifted = region.translated(c0[0] - c1[0], c0[1] - c1[1]);
    let reference = density_heatmap(&start_state, shifted, resolution)?;
    let unit = |g: &Grid<f64>| {
        let norm = g.values().iter().map(|v| v * v).sum::<f64>().sqrt();
        g.values().iter().map(|v| v / norm).collect::<Vec<_>>()
    };
    let (a, b) = (unit(&now), unit(&reference));
    Ok(a.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt())
}

/// Density-weighted mean position of a cell-centered grid.
pub fn centroid(g: &Grid<f64>) -> [f64; 2] {
    let (mut sx, mut sy, mut s) = (0.0, 0.0, 0.0);
    for j in 0..g.ny() {
        for i in 0..g.nx() {
            let [x, y] = g.cell_center(i, j);
            let v = g.get(i, j);
            sx += v * x;
            sy += v * y;
            s += v;
        }
    }
    [sx / s, sy / s]
}

/// Density-weighted covariance `[σxx, σxy, σyy]` about `centroid(g)`.
pub fn covariance(g: &Grid<f64>) -> [f64; 3] {
    let [mx, my] = centroid(g);
    let (mut cxx, mut cxy, mut cyy, mut s) = (0.0, 0.0, 0.0, 0.0);
    for j in 0..g.ny() {
        for i in 0..g.nx() {
            let [x, y] = g.cell_center(i, j);
            let v = g.get(i, j);
            let (dx, dy) = (x - mx, y - my);
            cxx += v * dx * dx;
            cxy += v * dx * dy;
            cyy += v * dy * dy;
            s += v;
        }
    }
    [cxx / s, cxy / s, cyy / s]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::SpectralModel;
    use crate::state::{project_coherent, project_superposition, CoherentSpec, SuperpositionSpec};
    use rand::{Rng, SeedableRng};
    use std::sync::Arc;

    fn propagator(coherent: bool, eps: f64) -> Propagator {
        let k = if coherent { 12 } else { 8 };
        let model = Arc::new(SpectralModel::solve(k, &OscillatorParams::with_epsilon(eps)).unwrap());
        let basis = model.basis();
        let q0 = if coherent {
            project_coherent(&CoherentSpec::default(), &basis).unwrap()
        } else {
            project_superposition(&SuperpositionSpec::default(), &basis).unwrap()
        };
        Propagator::new(model, q0).unwrap()
    }

    #[test]
    fn ground_state_value_at_origin() {
        let model = Arc::new(SpectralModel::solve(4, &OscillatorParams::default()).unwrap());
        let mut q0 = vec![Complex64::new(0.0, 0.0); model.dim()];
        q0[0] = Complex64::new(1.0, 0.0);
        let s = Propagator::new(model, q0).unwrap().evolve(0.0);
        let v = eval_wavefunction(&s, 0.0, 0.0);
        let expect = (1.0 / std::f64::consts::PI).powf(0.25)
            * (std::f64::consts::FRAC_1_SQRT_2 / std::f64::consts::PI).powf(0.25);
        assert!((v.psi_real - expect).abs() < 1e-15);
        let vel = bohm_velocity(&s, 0.3, -0.7).unwrap();
        assert!(vel[0].abs() < 1e-15 && vel[1].abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for (coherent, eps) in [(true, 0.0), (true, 0.05), (false, 0.0), (false, 0.05)] {
            let p = propagator(coherent, eps);
            for _ in 0..25 {
                let t = rng.gen_range(0.0..50.0);
                let (x, y) = (rng.gen_range(-2.5..2.5), rng.gen_range(-2.5..2.5));
                let s = p.evolve(t);
                let v = eval_wavefunction(&s, x, y);
                let h = 1e-5;
                let fd = |dx: f64, dy: f64| {
                    let a = eval_wavefunction(&s, x + dx, y + dy);
                    let b = eval_wavefunction(&s, x - dx, y - dy);
                    [(a.psi_real - b.psi_real) / (2.0 * h), (a.psi_imag - b.psi_imag) / (2.0 * h)]
                };
                let scale = v.grad_real.iter().chain(&v.grad_imag).fold(0.0f64, |m, g| m.max(g.abs()));
                for (k, d) in [fd(h, 0.0), fd(0.0, h)].into_iter().enumerate() {
                    assert!((d[0] - v.grad_real[k]).abs() <= 1e-8 * scale.max(1e-3));
                    assert!((d[1] - v.grad_imag[k]).abs() <= 1e-8 * scale.max(1e-3));
                }
            }
        }
    }

    /// Coherent state capped at 6 quanta per axis, which keeps it an exact
    /// product inside the triangular `K = 12` basis.
    fn product_propagator(eps: f64) -> Propagator {
        let model = Arc::new(SpectralModel::solve(12, &OscillatorParams::with_epsilon(eps)).unwrap());
        let spec = CoherentSpec {
            level_cap: Some(6),
            ..CoherentSpec::default()
        };
        let q0 = project_coherent(&spec, &model.basis()).unwrap();
        Propagator::new(model, q0).unwrap()
    }

    #[test]
    fn separable_state_gives_y_independent_vx() {
        let p = product_propagator(0.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let t = rng.gen_range(0.0..20.0);
            let x = rng.gen_range(-2.0..2.0);
            let (y1, y2) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let s = p.evolve(t);
            let a = bohm_velocity(&s, x, y1).unwrap();
            let b = bohm_velocity(&s, x, y2).unwrap();
            assert!((a[0] - b[0]).abs() < 1e-9 * (1.0 + a[0].abs()), "{a:?} {b:?}");
        }
    }

    #[test]
    fn two_component_state_has_fixed_direction() {
        let model = Arc::new(SpectralModel::solve(4, &OscillatorParams::default()).unwrap());
        let basis = model.basis();
        let mut q0 = vec![Complex64::new(0.0, 0.0); model.dim()];
        q0[basis.index_of(0, 0).unwrap()] = Complex64::new(0.8, 0.0);
        q0[basis.index_of(1, 1).unwrap()] = Complex64::new(0.6, 0.0);
        let p = Propagator::new(model, q0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let (x, y) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let mut first: Option<[f64; 2]> = None;
            for k in 0..10 {
                let v = bohm_velocity(&p.evolve(0.37 + 1.3 * k as f64), x, y).unwrap();
                let n = v[0].hypot(v[1]);
                if n < 1e-12 {
                    continue;
                }
                let d = [v[0] / n, v[1] / n];
                match first {
                    None => first = Some(d),
                    Some(f) => {
                        let same = (d[0] - f[0]).abs().max((d[1] - f[1]).abs());
                        let flip = (d[0] + f[0]).abs().max((d[1] + f[1]).abs());
                        assert!(same.min(flip) < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn density_normalized_and_centered() {
        let p = propagator(true, 0.0);
        let region = Rect::new(-6.0, 6.0, -6.0, 6.0);
        let g = density_heatmap(&p.evolve(0.0), region, 400).unwrap();
        let total: f64 = g.values().iter().sum::<f64>() * g.cell_area();
        assert!((total - 1.0).abs() < 1e-3, "{total}");
        let (i, j) = g.argmax();
        let [cx, cy] = g.cell_center(i, j);
        let params = OscillatorParams::default();
        let ex = (2.0 * params.hbar / (params.mass_x * params.omega_x)).sqrt();
        let ey = (2.0 * params.hbar / (params.mass_y * params.omega_y)).sqrt();
        assert!((cx - ex).abs() <= g.dx() && (cy - ey).abs() <= g.dy(), "({cx},{cy}) vs ({ex},{ey})");
    }

    #[test]
    fn norm_by_quadrature_over_long_times() {
        let p = propagator(true, 0.09);
        let region = Rect::new(-8.0, 8.0, -8.0, 8.0);
        for t in [0.0, 100.0, 1000.0] {
            let g = density_heatmap(&p.evolve(t), region, 320).unwrap();
            let total: f64 = g.values().iter().sum::<f64>() * g.cell_area();
            assert!((total - 1.0).abs() < 1e-5, "t={t}: {total}");
        }
    }

    #[test]
    fn free_translation_is_not_deformation() {
        let p = propagator(true, 0.0);
        let region = Rect::new(-6.0, 6.0, -6.0, 6.0);
        let d = deformation(&p, 20.0, region, 120).unwrap();
        assert!(d < 0.02, "{d}");
        let q = propagator(true, 0.09);
        assert!(deformation(&q, 20.0, region, 120).unwrap() > 0.1);
    }
}
