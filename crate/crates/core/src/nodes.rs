//! Nodal points `Ψ_R = Ψ_I = 0` by grid scan and Newton refinement.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{eval_coefficients, psi_on_grid, Scratch};
use crate::grid::Rect;
use crate::state::StateVector;

pub const DEFAULT_REGION: Rect = Rect::square(6.0);
pub const DEFAULT_STEP: f64 = 0.05;
const MAX_NEWTON: usize = 50;
const RESIDUAL_FACTOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub x: f64,
    pub y: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSet {
    pub time: f64,
    pub nodes: Vec<Node>,
    /// Peak `|Ψ|` over the scan vertices.
    pub peak: f64,
    pub candidates: usize,
    /// Candidates whose Newton refinement failed.
    pub dropped: usize,
}

fn straddles(v: [f64; 4]) -> bool {
    let pos = v.iter().any(|&a| a >= 0.0);
    let neg = v.iter().any(|&a| a < 0.0);
    pos && neg
}

pub fn find_nodes(state: &StateVector, region: Rect, grid_step: f64) -> Result<NodeSet> {
    if !(grid_step > 0.0) {
        return Err(Error::InvalidParameter("grid step must be positive".into()));
    }
    region.validate()?;
    let nx = (region.width() / grid_step).round().max(1.0) as usize;
    let ny = (region.height() / grid_step).round().max(1.0) as usize;
    let grid = psi_on_grid(state, region, nx, ny);
    let peak = grid.values.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut scratch = Scratch::new(state.cutoff);
    let mut set = NodeSet {
        time: state.time,
        nodes: Vec::new(),
        peak,
        candidates: 0,
        dropped: 0,
    };
    let step = grid_step.min(region.width() / nx as f64);
    for j in 0..ny {
        for i in 0..nx {
            let c = [grid.get(i, j), grid.get(i + 1, j), grid.get(i, j + 1), grid.get(i + 1, j + 1)];
            if !straddles(c.map(|v| v.re)) || !straddles(c.map(|v| v.im)) {
                continue;
            }
            set.candidates += 1;
            let start = [
                0.5 * (grid.xs[i] + grid.xs[i + 1]),
                0.5 * (grid.ys[j] + grid.ys[j + 1]),
            ];
            match newton(state, start, peak, &mut scratch) {
                Some(node) if region.contains(node.x, node.y) => {
                    let dup = set
                        .nodes
                        .iter()
                        .any(|n| (n.x - node.x).hypot(n.y - node.y) < 0.5 * step);
                    if !dup {
                        set.nodes.push(node);
                    }
                }
                Some(_) => {}
                None => set.dropped += 1,
            }
        }
    }
    Ok(set)
}

fn newton(state: &StateVector, start: [f64; 2], peak: f64, scratch: &mut Scratch) -> Option<Node> {
    let [mut x, mut y] = start;
    let tol = RESIDUAL_FACTOR * peak;
    for _ in 0..MAX_NEWTON {
        let s = eval_coefficients(&state.coefficients, state.cutoff, &state.params, x, y, scratch);
        let residual = s.density.sqrt();
        let (a, b, c, d) = (s.grad_real[0], s.grad_real[1], s.grad_imag[0], s.grad_imag[1]);
        let det = a * d - b * c;
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let dx = -(d * s.psi_real - b * s.psi_imag) / det;
        let dy = -(-c * s.psi_real + a * s.psi_imag) / det;
        x += dx;
        y += dy;
        if residual == 0.0 || dx.hypot(dy) < 1e-13 * (1.0 + x.hypot(y)) {
            break;
        }
    }
    let s = eval_coefficients(&state.coefficients, state.cutoff, &state.params, x, y, scratch);
    let residual = s.density.sqrt();
    (residual < tol && x.is_finite() && y.is_finite()).then_some(Node { x, y, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::OscillatorParams;
    use crate::spectral::SpectralModel;
    use crate::state::{project_coherent, project_superposition, CoherentSpec, Propagator, SuperpositionSpec};
    use std::sync::Arc;

    fn prop(coherent: bool, eps: f64) -> Propagator {
        let k = if coherent { 12 } else { 8 };
        let m = Arc::new(SpectralModel::solve(k, &OscillatorParams::with_epsilon(eps)).unwrap());
        let q0 = if coherent {
            project_coherent(&CoherentSpec::default(), &m.basis()).unwrap()
        } else {
            project_superposition(&SuperpositionSpec::default(), &m.basis()).unwrap()
        };
        Propagator::new(m, q0).unwrap()
    }

    #[test]
    fn no_nodes_for_unperturbed_product_state() {
        let m = Arc::new(SpectralModel::solve(12, &OscillatorParams::default()).unwrap());
        let spec = CoherentSpec {
            level_cap: Some(6),
            ..CoherentSpec::default()
        };
        let p = Propagator::new(m.clone(), project_coherent(&spec, &m.basis()).unwrap()).unwrap();
        for t in [0.0, 3.3, 17.0, 123.4] {
            let set = find_nodes(&p.evolve(t), DEFAULT_REGION, DEFAULT_STEP).unwrap();
            assert!(set.nodes.is_empty(), "t={t}: {:?}", set.nodes);
        }
    }

    /// Closed-form node of `aΨ₀₀ + bΨ₁₀ + cΨ₁₁` at zero coupling.
    fn analytic_node(t: f64) -> [f64; 2] {
        let params = OscillatorParams::default();
        let (wx, wy) = (params.omega_x, params.omega_y);
        let (a, b, c) = (std::f64::consts::FRAC_1_SQRT_2, 0.5, 0.5);
        // a + b√(2αx) x e^{−iωx t} + 2c√(αxαy) x y e^{−i(ωx+ωy)t} = 0
        let bx = b * (2.0 * params.alpha_x()).sqrt();
        let cxy = 2.0 * c * (params.alpha_x() * params.alpha_y()).sqrt();
        let (s, w) = ((wx + wy) * t, wy * t);
        let x = -a * s.sin() / (bx * w.sin());
        let y = -(a * s.cos() + bx * x * w.cos()) / (cxy * x);
        [x, y]
    }

    #[test]
    fn single_node_for_unperturbed_superposition() {
        let p = prop(false, 0.0);
        let mut inside = 0;
        for k in 0..20 {
            let t = 0.4 + 1.37 * k as f64;
            let [ax, ay] = analytic_node(t);
            let set = find_nodes(&p.evolve(t), DEFAULT_REGION, DEFAULT_STEP).unwrap();
            if DEFAULT_REGION.contains(ax, ay) {
                inside += 1;
                assert_eq!(set.nodes.len(), 1, "t={t}: {:?} expected ({ax},{ay})", set.nodes);
                let n = set.nodes[0];
                assert!((n.x - ax).abs() < 1e-8 && (n.y - ay).abs() < 1e-8, "{n:?} vs ({ax},{ay})");
                assert!(n.residual < 1e-9 * set.peak);
            } else {
                assert!(set.nodes.is_empty(), "t={t}: {:?}", set.nodes);
            }
        }
        assert!(inside >= 5, "{inside}");
    }

    #[test]
    fn perturbed_nodes_satisfy_residual_bound() {
        let p = prop(true, 0.09);
        let set = find_nodes(&p.evolve(20.0), DEFAULT_REGION, DEFAULT_STEP).unwrap();
        assert!(!set.nodes.is_empty());
        for n in &set.nodes {
            assert!(n.residual < 1e-9 * set.peak);
        }
    }

    #[test]
    fn rejects_bad_step() {
        let p = prop(false, 0.0);
        assert!(find_nodes(&p.evolve(0.0), DEFAULT_REGION, 0.0).is_err());
    }
}
