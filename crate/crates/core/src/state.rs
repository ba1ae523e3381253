//! Initial states, spectral time evolution and energy observables.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::{BasisIndexMap, HamiltonianMatrix};
use crate::error::{Error, Result};
use crate::params::OscillatorParams;
use crate::spectral::SpectralModel;

/// Product of two 1D coherent states in the unperturbed basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoherentSpec {
    pub amplitude_x: f64,
    pub amplitude_y: f64,
    pub phase_x: f64,
    pub phase_y: f64,
    /// Highest level kept per axis; `None` means the basis cutoff.
    pub level_cap: Option<usize>,
}

impl Default for CoherentSpec {
    fn default() -> Self {
        Self {
            amplitude_x: 1.0,
            amplitude_y: 1.0,
            phase_x: 0.0,
            phase_y: 0.0,
            level_cap: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuperpositionTerm {
    pub nx: usize,
    pub ny: usize,
    pub coefficient: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuperpositionSpec {
    pub terms: Vec<SuperpositionTerm>,
}

impl Default for SuperpositionSpec {
    /// `Ψ = Ψ₀₀/√2 + Ψ₁₀/2 + Ψ₁₁/2`.
    fn default() -> Self {
        let term = |nx, ny, c: f64| SuperpositionTerm {
            nx,
            ny,
            coefficient: Complex64::new(c, 0.0),
        };
        Self {
            terms: vec![
                term(0, 0, std::f64::consts::FRAC_1_SQRT_2),
                term(1, 0, 0.5),
                term(1, 1, 0.5),
            ],
        }
    }
}

impl SuperpositionSpec {
    pub fn validate(&self) -> Result<()> {
        if self.terms.is_empty() {
            return Err(Error::InvalidParameter("superposition has no terms".into()));
        }
        let norm: f64 = self.terms.iter().map(|t| t.coefficient.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "superposition coefficients have squared norm {norm}, expected 1"
            )));
        }
        Ok(())
    }
}

/// Poisson weight `e^{−a²} a^{2n} / n!` of level `n` in a coherent state.
pub fn poisson_weight(amplitude: f64, n: usize) -> f64 {
    let a2 = amplitude * amplitude;
    let mut log = -a2;
    if n > 0 {
        log += n as f64 * a2.ln() - ln_factorial(n);
    }
    log.exp()
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// `⟨n|α⟩` for `α = a e^{iσ}` at levels `0..=cap`.
pub fn coherent_coefficients_1d(amplitude: f64, phase: f64, cap: usize) -> Vec<Complex64> {
    let alpha = Complex64::from_polar(amplitude, phase);
    let mut out = Vec::with_capacity(cap + 1);
    let mut c = Complex64::new((-0.5 * amplitude * amplitude).exp(), 0.0);
    out.push(c);
    for n in 1..=cap {
        c = c * alpha / (n as f64).sqrt();
        out.push(c);
    }
    out
}

pub fn project_coherent(spec: &CoherentSpec, basis: &BasisIndexMap) -> Result<Vec<Complex64>> {
    if !(spec.amplitude_x > 0.0 && spec.amplitude_y > 0.0) {
        return Err(Error::InvalidParameter("coherent amplitudes must be positive".into()));
    }
    let cap = spec.level_cap.unwrap_or(basis.cutoff());
    if cap > basis.cutoff() {
        return Err(Error::InvalidParameter(format!(
            "level cap {cap} exceeds basis cutoff {}",
            basis.cutoff()
        )));
    }
    let cx = coherent_coefficients_1d(spec.amplitude_x, spec.phase_x, cap);
    let cy = coherent_coefficients_1d(spec.amplitude_y, spec.phase_y, cap);
    let mut out: Vec<Complex64> = basis
        .pairs()
        .iter()
        .map(|d| {
            if d.nx <= cap && d.ny <= cap {
                cx[d.nx] * cy[d.ny]
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    let norm = out.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    for c in &mut out {
        *c /= norm;
    }
    Ok(out)
}

pub fn project_superposition(spec: &SuperpositionSpec, basis: &BasisIndexMap) -> Result<Vec<Complex64>> {
    spec.validate()?;
    let mut out = vec![Complex64::new(0.0, 0.0); basis.size()];
    for t in &spec.terms {
        let idx = basis.index_of(t.nx, t.ny).ok_or(Error::TermOutsideCutoff {
            nx: t.nx,
            ny: t.ny,
            cutoff: basis.cutoff(),
        })?;
        out[idx] += t.coefficient;
    }
    Ok(out)
}

/// Initial-state description, either family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InitialState {
    Coherent(CoherentSpec),
    Superposition(SuperpositionSpec),
}

impl InitialState {
    pub fn project(&self, basis: &BasisIndexMap) -> Result<Vec<Complex64>> {
        match self {
            InitialState::Coherent(s) => project_coherent(s, basis),
            InitialState::Superposition(s) => project_superposition(s, basis),
        }
    }

    /// Basis cutoff used for this family unless overridden.
    pub fn default_cutoff(&self) -> usize {
        match self {
            InitialState::Coherent(_) => 12,
            InitialState::Superposition(_) => 8,
        }
    }
}

/// Coefficient vector `q(t)` in the unperturbed basis.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub time: f64,
    pub coefficients: Vec<Complex64>,
    pub cutoff: usize,
    pub params: OscillatorParams,
}

impl StateVector {
    pub fn norm_sqr(&self) -> f64 {
        self.coefficients.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn basis(&self) -> BasisIndexMap {
        BasisIndexMap::new(self.cutoff)
    }

    /// `⟨Ψ|Ĥ|Ψ⟩` with the full matrix Hamiltonian.
    pub fn energy_expectation(&self, h: &HamiltonianMatrix) -> f64 {
        let q = &self.coefficients;
        let n = q.len();
        let mut acc = 0.0;
        for i in 0..n {
            let mut row = Complex64::new(0.0, 0.0);
            for j in 0..n {
                row += h.get(i, j) * q[j];
            }
            acc += (q[i].conj() * row).re;
        }
        acc
    }

    /// Occupation of shell `n_x + n_y = n`.
    pub fn shell_occupation(&self, n: usize) -> f64 {
        self.basis()
            .shell_indices(n)
            .map(|i| self.coefficients[i].norm_sqr())
            .sum()
    }
}

/// `E_av = Σ_m |q_m|² E_m` with unperturbed `E_m`, plus the `P_m` vector.
pub fn average_energy(state: &StateVector) -> (f64, Vec<f64>) {
    let basis = state.basis();
    let probs: Vec<f64> = state.coefficients.iter().map(|c| c.norm_sqr()).collect();
    let e: f64 = basis
        .pairs()
        .iter()
        .zip(&probs)
        .map(|(d, p)| p * crate::basis::unperturbed_energy(d.nx, d.ny, &state.params))
        .sum();
    (e, probs)
}

/// Running time average of a sampled observable (trapezoidal rule).
#[derive(Debug, Clone, Default)]
pub struct RunningMean {
    last: Option<(f64, f64)>,
    start: f64,
    integral: f64,
}

impl RunningMean {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, t: f64, value: f64) {
        match self.last {
            None => self.start = t,
            Some((t0, v0)) => self.integral += 0.5 * (t - t0) * (v0 + value),
        }
        self.last = Some((t, value));
    }

    /// Mean over the pushed span; the single value if only one sample.
    pub fn mean(&self) -> Option<f64> {
        let (t, v) = self.last?;
        let span = t - self.start;
        Some(if span > 0.0 { self.integral / span } else { v })
    }
}

const PRUNE: f64 = 1e-16;

#[derive(Debug, Clone)]
struct Column {
    energy: f64,
    entries: Vec<(usize, Complex64)>,
}

/// Closed-form evolution `q(t) = C e^{−iẼt/ħ} Cᵀ q(0)`; cheap to clone
/// and safe to share between threads.
#[derive(Debug, Clone)]
pub struct Propagator {
    model: Arc<SpectralModel>,
    initial: Arc<[Complex64]>,
    /// `d_n = Σ_m c_mn q_m(0)`.
    weights: Arc<[Complex64]>,
    columns: Arc<[Column]>,
}

impl Propagator {
    pub fn new(model: Arc<SpectralModel>, initial: Vec<Complex64>) -> Result<Self> {
        let dim = model.dim();
        if initial.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: initial.len(),
            });
        }
        let weights: Vec<Complex64> = (0..dim)
            .map(|n| (0..dim).map(|m| model.coefficient(m, n) * initial[m]).sum())
            .collect();
        let scale = weights.iter().map(|w| w.norm_sqr()).sum::<f64>().sqrt();
        let columns = (0..dim)
            .filter_map(|n| {
                let entries: Vec<(usize, Complex64)> = (0..dim)
                    .map(|m| (m, model.coefficient(m, n) * weights[n]))
                    .filter(|(_, v)| v.norm() >= PRUNE * scale)
                    .collect();
                (!entries.is_empty()).then_some(Column {
                    energy: model.eigenvalues[n],
                    entries,
                })
            })
            .collect::<Vec<_>>();
        Ok(Self {
            model,
            initial: initial.into(),
            weights: weights.into(),
            columns: columns.into(),
        })
    }

    pub fn from_state(model: Arc<SpectralModel>, state: &InitialState) -> Result<Self> {
        let initial = state.project(&model.basis())?;
        Self::new(model, initial)
    }

    pub fn model(&self) -> &SpectralModel {
        &self.model
    }

    pub fn model_arc(&self) -> &Arc<SpectralModel> {
        &self.model
    }

    pub fn params(&self) -> &OscillatorParams {
        &self.model.params
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn initial(&self) -> &[Complex64] {
        &self.initial
    }

    /// Overlaps `⟨Φ̃_n|Ψ₀⟩`.
    pub fn eigen_weights(&self) -> &[Complex64] {
        &self.weights
    }

    /// Writes `q(t)` into `out`, as `q(0) + C (e^{−iẼt/ħ} − 1) Cᵀ q(0)` so
    /// that `t = 0` reproduces the initial vector exactly.
    pub fn coefficients_at(&self, t: f64, out: &mut [Complex64]) {
        out.copy_from_slice(&self.initial);
        let hbar = self.model.params.hbar;
        for col in self.columns.iter() {
            let half = -0.5 * col.energy * t / hbar;
            // e^{2ih} − 1 = 2i sin(h) e^{ih}
            let delta = Complex64::new(0.0, 2.0 * half.sin()) * Complex64::from_polar(1.0, half);
            if delta == Complex64::new(0.0, 0.0) {
                continue;
            }
            for &(m, v) in &col.entries {
                out[m] += v * delta;
            }
        }
    }

    pub fn evolve(&self, t: f64) -> StateVector {
        let mut coefficients = vec![Complex64::new(0.0, 0.0); self.dim()];
        self.coefficients_at(t, &mut coefficients);
        StateVector {
            time: t,
            coefficients,
            cutoff: self.model.cutoff,
            params: self.model.params,
        }
    }

    /// Exact time average of `E_av(t)` over `[0, horizon]`.
    ///
    /// Uses `E_av(t) = Σ_{n,n'} d_n d*_{n'} e^{−i(Ẽ_n−Ẽ_{n'})t/ħ} G_{n'n}`
    /// with `G = Cᵀ diag(E⁰) C`.
    pub fn mean_average_energy(&self, horizon: f64) -> f64 {
        let dim = self.dim();
        let model = &self.model;
        let e0 = crate::basis::unperturbed_spectrum(&model.basis(), &model.params);
        let hbar = model.params.hbar;
        let d = &self.weights;
        let mut total = 0.0;
        for n in 0..dim {
            if d[n].norm() == 0.0 {
                continue;
            }
            for k in n..dim {
                if d[k].norm() == 0.0 {
                    continue;
                }
                let g: f64 = (0..dim)
                    .map(|m| model.coefficient(m, k) * e0[m] * model.coefficient(m, n))
                    .sum();
                let omega = (model.eigenvalues[n] - model.eigenvalues[k]) / hbar;
                let amp = d[n] * d[k].conj() * window_mean(omega, horizon) * g;
                total += if k == n { amp.re } else { 2.0 * amp.re };
            }
        }
        total
    }
}

/// Time average of `E_av` over `[0, horizon]` for `state` evolved with
/// `params` in the family's default basis.
pub fn window_average_energy(state: &InitialState, params: &OscillatorParams, horizon: f64) -> Result<f64> {
    let model = Arc::new(SpectralModel::solve(state.default_cutoff(), params)?);
    Ok(Propagator::from_state(model, state)?.mean_average_energy(horizon))
}

/// `(1/T) ∫₀ᵀ e^{−iωt} dt`.
fn window_mean(omega: f64, horizon: f64) -> Complex64 {
    let x = omega * horizon;
    if horizon <= 0.0 || x.abs() < 1e-12 {
        return Complex64::new(1.0, 0.0);
    }
    (Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, -x)) / Complex64::new(0.0, x)
}
