//! Browser bindings: density frames with nodal points, click-launched
//! Bohmian trajectories, and classical Poincaré sections.

use std::sync::Arc;

use bohmchaos::bohm::{integrate_bohmian, IntegratorConfig};
use bohmchaos::classical::{poincare_section, section_half_width, ClassicalConfig, ClassicalState};
use bohmchaos::field::density_heatmap;
use bohmchaos::grid::Rect;
use bohmchaos::nodes::{find_nodes, DEFAULT_STEP};
use bohmchaos::spectral::SpectralModel;
use bohmchaos::state::{CoherentSpec, InitialState, Propagator, SuperpositionSpec};
use bohmchaos::{OscillatorParams, Result};
use wasm_bindgen::prelude::*;

/// Half-width of the square shown in the density view.
pub const VIEW_HALF: f64 = 5.0;

fn js(e: bohmchaos::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Quantum state at one perturbation, evolved on demand.
#[wasm_bindgen]
pub struct QuantumDemo {
    propagator: Propagator,
}

impl QuantumDemo {
    pub fn build(epsilon: f64, superposition: bool) -> Result<Self> {
        let params = OscillatorParams::with_epsilon(epsilon);
        let state = if superposition {
            InitialState::Superposition(SuperpositionSpec::default())
        } else {
            InitialState::Coherent(CoherentSpec::default())
        };
        let model = Arc::new(SpectralModel::solve(state.default_cutoff(), &params)?);
        Ok(Self {
            propagator: Propagator::from_state(model, &state)?,
        })
    }

    /// Row-major `|Ψ|²` on `resolution²` cells, bottom row first, scaled to a
    /// peak of 1.
    pub fn density_values(&self, t: f64, resolution: usize) -> Result<Vec<f32>> {
        let g = density_heatmap(&self.propagator.evolve(t), Rect::square(VIEW_HALF), resolution)?;
        let peak = g.max_value().max(f64::MIN_POSITIVE);
        Ok(g.values().iter().map(|v| (v / peak) as f32).collect())
    }

    /// Nodal points as flat `[x0, y0, x1, y1, …]`.
    pub fn node_positions(&self, t: f64) -> Result<Vec<f64>> {
        let set = find_nodes(&self.propagator.evolve(t), Rect::square(VIEW_HALF), DEFAULT_STEP)?;
        Ok(set.nodes.iter().flat_map(|n| [n.x, n.y]).collect())
    }

    /// Bohmian path from `(x, y)` at `t = 0`, flat `[t, x, y, …]` every 0.05.
    pub fn path(&self, x: f64, y: f64, t_end: f64) -> Result<Vec<f64>> {
        let r = integrate_bohmian(&self.propagator, [x, y], t_end, 0.05, &IntegratorConfig::default())?;
        Ok(r.samples.iter().flatten().copied().collect())
    }
}

#[wasm_bindgen]
impl QuantumDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(epsilon: f64, superposition: bool) -> std::result::Result<QuantumDemo, JsError> {
        Self::build(epsilon, superposition).map_err(js)
    }

    pub fn density(&self, t: f64, resolution: usize) -> std::result::Result<Vec<f32>, JsError> {
        self.density_values(t, resolution).map_err(js)
    }

    pub fn nodes(&self, t: f64) -> std::result::Result<Vec<f64>, JsError> {
        self.node_positions(t).map_err(js)
    }

    pub fn trajectory(&self, x: f64, y: f64, t_end: f64) -> std::result::Result<Vec<f64>, JsError> {
        self.path(x, y, t_end).map_err(js)
    }

    /// View half-width in position units.
    pub fn extent() -> f64 {
        VIEW_HALF
    }
}

/// Section crossings `(x, ẋ)` of the orbit started at `(x, ẋ)` on `y = 0`,
/// flat `[x0, px0, x1, px1, …]`; fewer pairs when the orbit escapes.
pub fn section_points(epsilon: f64, energy: f64, x: f64, px: f64, crossings: usize) -> Result<Vec<f64>> {
    let params = OscillatorParams::with_epsilon(epsilon);
    let start = ClassicalState::on_section(&params, energy, x, px)?;
    let t_max = 20.0 * std::f64::consts::TAU / params.omega_y * crossings as f64;
    let run = poincare_section(&params, start, crossings, t_max, &ClassicalConfig::default())?;
    Ok(run.points.iter().flat_map(|p| [p.x, p.px]).collect())
}

#[wasm_bindgen]
pub fn section(epsilon: f64, energy: f64, x: f64, px: f64, crossings: usize) -> std::result::Result<Vec<f64>, JsError> {
    section_points(epsilon, energy, x, px, crossings).map_err(js)
}

/// Half-width `√(2E)/ωx` of the allowed section interval.
#[wasm_bindgen]
pub fn section_extent(epsilon: f64, energy: f64) -> f64 {
    section_half_width(&OscillatorParams::with_epsilon(epsilon), energy)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_frame_is_normalized_to_peak() {
        let d = QuantumDemo::build(0.05, false).unwrap();
        let v = d.density_values(3.0, 32).unwrap();
        assert_eq!(v.len(), 32 * 32);
        let peak = v.iter().copied().fold(0.0f32, f32::max);
        assert!((peak - 1.0).abs() < 1e-6);
    }

    #[test]
    fn superposition_has_a_node() {
        let d = QuantumDemo::build(0.0, true).unwrap();
        let n = d.node_positions(1.0).unwrap();
        assert_eq!(n.len(), 2);
    }

    #[test]
    fn path_is_flat_triples() {
        let d = QuantumDemo::build(0.05, false).unwrap();
        let p = d.path(1.3, 1.5, 1.0).unwrap();
        assert_eq!(p.len(), 3 * 21);
        assert_eq!(&p[..3], &[0.0, 1.3, 1.5]);
    }

    #[test]
    fn uncoupled_section_is_a_circle() {
        let e = 1.5;
        let pts = section_points(0.0, e, 1.0, 0.5, 20).unwrap();
        assert_eq!(pts.len(), 40);
        for p in pts.chunks(2) {
            assert!((p[0] * p[0] + p[1] * p[1] - 1.25).abs() < 1e-8);
        }
        assert!(section_points(0.0, e, 3.0, 0.0, 5).is_err());
        assert!((section_extent(0.0, e) - 3f64.sqrt()).abs() < 1e-15);
    }
}
