//! Truncated product basis of the unperturbed 2D oscillator and the
//! Hamiltonian matrix of the coupled problem in that basis.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::OscillatorParams;

/// Quantum-number doublet `(n_x, n_y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Doublet {
    pub nx: usize,
    pub ny: usize,
}

impl Doublet {
    pub const fn new(nx: usize, ny: usize) -> Self {
        Self { nx, ny }
    }

    pub const fn shell(&self) -> usize {
        self.nx + self.ny
    }
}

/// Bijection between a flat index and the doublets with `n_x + n_y ≤ K`.
///
/// Shells are listed by increasing `n = n_x + n_y`; inside a shell `n_y`
/// decreases, so the sequence starts `00, 01, 10, 02, 11, 20, …`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisIndexMap {
    cutoff: usize,
    pairs: Vec<Doublet>,
}

impl BasisIndexMap {
    pub fn new(cutoff: usize) -> Self {
        let pairs = (0..=cutoff)
            .flat_map(|n| (0..=n).map(move |nx| Doublet::new(nx, n - nx)))
            .collect();
        Self { cutoff, pairs }
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn size(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self) -> &[Doublet] {
        &self.pairs
    }

    pub fn doublet(&self, index: usize) -> Result<Doublet> {
        self.pairs.get(index).copied().ok_or(Error::IndexOutOfRange {
            index,
            size: self.size(),
        })
    }

    pub fn index_of(&self, nx: usize, ny: usize) -> Option<usize> {
        let n = nx + ny;
        (n <= self.cutoff).then(|| n * (n + 1) / 2 + nx)
    }

    /// Indices of every doublet in shell `n`.
    pub fn shell_indices(&self, n: usize) -> std::ops::Range<usize> {
        if n > self.cutoff {
            return 0..0;
        }
        let start = n * (n + 1) / 2;
        start..start + n + 1
    }
}

pub fn enumerate_basis(cutoff: usize) -> BasisIndexMap {
    BasisIndexMap::new(cutoff)
}

/// `E = (n_x + ½)ħω_x + (n_y + ½)ħω_y`.
pub fn unperturbed_energy(nx: usize, ny: usize, params: &OscillatorParams) -> f64 {
    (nx as f64 + 0.5) * params.hbar * params.omega_x + (ny as f64 + 0.5) * params.hbar * params.omega_y
}

/// `⟨a|x|b⟩` for a 1D oscillator with `α = mω/ħ`.
pub fn position_element(a: usize, b: usize, alpha: f64) -> f64 {
    let hi = a.max(b);
    if a.abs_diff(b) == 1 {
        (hi as f64 / (2.0 * alpha)).sqrt()
    } else {
        0.0
    }
}

/// `⟨a|x²|b⟩` for a 1D oscillator with `α = mω/ħ`.
pub fn position_squared_element(a: usize, b: usize, alpha: f64) -> f64 {
    match a.abs_diff(b) {
        0 => (2 * a + 1) as f64 / (2.0 * alpha),
        2 => {
            let hi = a.max(b) as f64;
            (hi * (hi - 1.0)).sqrt() / (2.0 * alpha)
        }
        _ => 0.0,
    }
}

fn element(dq: Doublet, dr: Doublet, params: &OscillatorParams) -> f64 {
    let coupling = params.epsilon
        * position_element(dq.nx, dr.nx, params.alpha_x())
        * position_squared_element(dq.ny, dr.ny, params.alpha_y());
    if dq == dr {
        unperturbed_energy(dq.nx, dq.ny, params) + coupling
    } else {
        coupling
    }
}

/// `⟨Φ_q|H₀ + εxy²|Φ_r⟩` from the closed-form ladder results.
pub fn coupling_matrix_element(
    basis: &BasisIndexMap,
    q: usize,
    r: usize,
    params: &OscillatorParams,
) -> Result<f64> {
    Ok(element(basis.doublet(q)?, basis.doublet(r)?, params))
}

/// Dense real symmetric matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl HamiltonianMatrix {
    pub fn from_row_major(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: entries.len(),
            });
        }
        Ok(Self { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }
}

/// Assembles the upper triangle and mirrors it, so the result is exactly
/// symmetric.
pub fn build_hamiltonian(basis: &BasisIndexMap, params: &OscillatorParams) -> HamiltonianMatrix {
    let n = basis.size();
    let pairs = basis.pairs();
    let mut entries = vec![0.0; n * n];
    for q in 0..n {
        for r in q..n {
            let v = element(pairs[q], pairs[r], params);
            entries[q * n + r] = v;
            entries[r * n + q] = v;
        }
    }
    HamiltonianMatrix { dim: n, entries }
}

/// Diagonal of `H₀` in basis order.
pub fn unperturbed_spectrum(basis: &BasisIndexMap, params: &OscillatorParams) -> Vec<f64> {
    basis
        .pairs()
        .iter()
        .map(|d| unperturbed_energy(d.nx, d.ny, params))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_sizes_and_order() {
        assert_eq!(enumerate_basis(12).size(), 91);
        assert_eq!(enumerate_basis(8).size(), 45);
        assert_eq!(enumerate_basis(0).pairs(), &[Doublet::new(0, 0)]);
        let k2: Vec<(usize, usize)> = enumerate_basis(2).pairs().iter().map(|d| (d.nx, d.ny)).collect();
        assert_eq!(k2, vec![(0, 0), (0, 1), (1, 0), (0, 2), (1, 1), (2, 0)]);
    }

    #[test]
    fn index_map_is_bijective() {
        for k in 0..15 {
            let b = enumerate_basis(k);
            assert_eq!(b.size(), (k + 1) * (k + 2) / 2);
            for (i, d) in b.pairs().iter().enumerate() {
                assert_eq!(b.index_of(d.nx, d.ny), Some(i));
            }
            assert_eq!(b.index_of(k + 1, 0), None);
            for n in 0..=k {
                assert!(b.shell_indices(n).all(|i| b.pairs()[i].shell() == n));
            }
        }
    }

    #[test]
    fn unperturbed_energies() {
        let p = OscillatorParams::default();
        assert!((unperturbed_energy(0, 0, &p) - (0.5 + 2f64.sqrt() / 4.0)).abs() < 1e-15);
        assert!((unperturbed_energy(1, 1, &p) - (1.5 + 3.0 * 2f64.sqrt() / 4.0)).abs() < 1e-15);
        let e = 0.5 * unperturbed_energy(0, 0, &p)
            + 0.25 * unperturbed_energy(1, 0, &p)
            + 0.25 * unperturbed_energy(1, 1, &p);
        assert!((e - 1.53).abs() < 0.005, "{e}");
    }

    #[test]
    fn selection_rules_and_out_of_range() {
        let b = enumerate_basis(2);
        let mut p = OscillatorParams::with_epsilon(1.0);
        let i00 = b.index_of(0, 0).unwrap();
        assert!((coupling_matrix_element(&b, i00, b.index_of(1, 0).unwrap(), &p).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(coupling_matrix_element(&b, i00, b.index_of(0, 1).unwrap(), &p).unwrap(), 0.0);
        p.epsilon = 0.05;
        let v = coupling_matrix_element(&b, b.index_of(1, 0).unwrap(), b.index_of(0, 2).unwrap(), &p).unwrap();
        assert!((v - 0.05 * std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(matches!(
            coupling_matrix_element(&b, 6, 0, &p),
            Err(Error::IndexOutOfRange { index: 6, size: 6 })
        ));
    }

    #[test]
    fn hamiltonian_structure() {
        let b = enumerate_basis(2);
        let p = OscillatorParams::default();
        let h = build_hamiltonian(&b, &p);
        for i in 0..6 {
            for j in 0..6 {
                if i == j {
                    let d = b.pairs()[i];
                    assert_eq!(h.get(i, i), unperturbed_energy(d.nx, d.ny, &p));
                } else {
                    assert_eq!(h.get(i, j), 0.0);
                }
            }
        }

        let b = enumerate_basis(12);
        let p = OscillatorParams::with_epsilon(0.07);
        let h = build_hamiltonian(&b, &p);
        for (i, di) in b.pairs().iter().enumerate() {
            for (j, dj) in b.pairs().iter().enumerate() {
                assert_eq!(h.get(i, j).to_bits(), h.get(j, i).to_bits());
                let allowed = di.nx.abs_diff(dj.nx) == 1 && matches!(di.ny.abs_diff(dj.ny), 0 | 2);
                if i != j && !allowed {
                    assert_eq!(h.get(i, j).to_bits(), 0);
                }
                if allowed {
                    assert!(h.get(i, j) != 0.0);
                }
            }
        }
    }
}
