//! Dense symmetric eigensolver (cyclic Jacobi) and the spectral model of the
//! perturbed Hamiltonian.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::basis::{build_hamiltonian, enumerate_basis, BasisIndexMap, HamiltonianMatrix};
use crate::error::{Error, Result};
use crate::params::OscillatorParams;

const MAX_SWEEPS: usize = 60;
const OFF_DIAGONAL_TOL: f64 = 1e-15;
const DEGENERACY_TOL: f64 = 1e-12;

/// Eigenvalues in ascending order and the matching orthonormal eigenvectors
/// as the columns of a row-major `dim × dim` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigensystem {
    pub values: Vec<f64>,
    pub vectors: Vec<f64>,
    pub sweeps: usize,
}

/// Cyclic Jacobi rotations until the off-diagonal Frobenius norm falls below
/// `1e-15·‖H‖_F`.
///
/// Each eigenvector is signed so that its largest-magnitude component is
/// positive; inside a cluster of degenerate eigenvalues, vectors are ordered
/// by the index of that component.
pub fn diagonalize(h: &HamiltonianMatrix) -> Result<Eigensystem> {
    let n = h.dim();
    let mut a = h.entries().to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let frob = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let target = OFF_DIAGONAL_TOL * frob.max(f64::MIN_POSITIVE);

    let off_norm = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                s += a[p * n + q] * a[p * n + q];
            }
        }
        (2.0 * s).sqrt()
    };

    let mut sweeps = 0;
    let mut off = off_norm(&a);
    while off > target {
        if sweeps == MAX_SWEEPS {
            return Err(Error::Convergence {
                what: "Jacobi eigensolver",
                iterations: sweeps,
                residual: off,
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                if sweeps > 4 && apq.abs() < 1e-18 * (app.abs() + aqq.abs()) {
                    a[p * n + q] = 0.0;
                    a[q * n + p] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    let new_p = c * akp - s * akq;
                    let new_q = s * akp + c * akq;
                    a[k * n + p] = new_p;
                    a[p * n + k] = new_p;
                    a[k * n + q] = new_q;
                    a[q * n + k] = new_q;
                }
                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
        off = off_norm(&a);
    }

    let lead = |col: usize| -> usize {
        (0..n)
            .max_by(|&i, &j| v[i * n + col].abs().total_cmp(&v[j * n + col].abs()).then(j.cmp(&i)))
            .unwrap_or(0)
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]));
    let scale = frob.max(1.0);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && a[order[end] * n + order[end]] - a[order[start] * n + order[start]] < DEGENERACY_TOL * scale {
            end += 1;
        }
        order[start..end].sort_by_key(|&c| lead(c));
        start = end;
    }

    let mut values = Vec::with_capacity(n);
    let mut vectors = vec![0.0; n * n];
    for (new_col, &old_col) in order.iter().enumerate() {
        values.push(a[old_col * n + old_col]);
        let sign = if v[lead(old_col) * n + old_col] < 0.0 { -1.0 } else { 1.0 };
        for m in 0..n {
            vectors[m * n + new_col] = sign * v[m * n + old_col];
        }
    }
    Ok(Eigensystem { values, vectors, sweeps })
}

/// Perturbed eigenvalues `Ẽ_n` and coefficients `c_mn` of
/// `|Φ̃_n⟩ = Σ_m c_mn |Φ_m⟩` over a truncated basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralModel {
    pub cutoff: usize,
    pub params: OscillatorParams,
    pub eigenvalues: Vec<f64>,
    /// Row-major: `eigenvectors[m * dim + n] = c_mn`.
    pub eigenvectors: Vec<f64>,
}

const MAGIC: &[u8; 4] = b"BQSM";
const FORMAT_VERSION: u32 = 1;

impl SpectralModel {
    pub fn solve(cutoff: usize, params: &OscillatorParams) -> Result<Self> {
        params.validate()?;
        let basis = enumerate_basis(cutoff);
        let h = build_hamiltonian(&basis, params);
        let eig = diagonalize(&h)?;
        Ok(Self {
            cutoff,
            params: *params,
            eigenvalues: eig.values,
            eigenvectors: eig.vectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn basis(&self) -> BasisIndexMap {
        enumerate_basis(self.cutoff)
    }

    pub fn coefficient(&self, m: usize, n: usize) -> f64 {
        self.eigenvectors[m * self.dim() + n]
    }

    /// `max |CᵀC − I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                let dot: f64 = (0..n).map(|m| self.coefficient(m, i) * self.coefficient(m, j)).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - expect).abs());
            }
        }
        worst
    }

    /// `max |C diag(Ẽ) Cᵀ − H|`.
    pub fn reconstruction_error(&self, h: &HamiltonianMatrix) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                let r: f64 = (0..n)
                    .map(|k| self.coefficient(i, k) * self.eigenvalues[k] * self.coefficient(j, k))
                    .sum();
                worst = worst.max((r - h.get(i, j)).abs());
            }
        }
        worst
    }

    /// Binary layout (all little-endian):
    /// magic `BQSM`, u32 version, u32 cutoff, u32 dim, six f64 header values
    /// (ε, ωx, ωy, ħ, mx, my), `dim` eigenvalues, then the `dim × dim`
    /// eigenvector matrix row-major.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.cutoff as u32).to_le_bytes())?;
        w.write_all(&(self.dim() as u32).to_le_bytes())?;
        let p = &self.params;
        for v in [p.epsilon, p.omega_x, p.omega_y, p.hbar, p.mass_x, p.mass_y]
            .iter()
            .chain(&self.eigenvalues)
            .chain(&self.eigenvectors)
        {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a spectral model file".into()));
        }
        let mut word = [0u8; 4];
        let mut read_u32 = |r: &mut R| -> Result<u32> {
            r.read_exact(&mut word)?;
            Ok(u32::from_le_bytes(word))
        };
        let version = read_u32(&mut r)?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported spectral model version {version}")));
        }
        let cutoff = read_u32(&mut r)? as usize;
        let dim = read_u32(&mut r)? as usize;
        if dim != (cutoff + 1) * (cutoff + 2) / 2 {
            return Err(Error::Format(format!("dimension {dim} inconsistent with cutoff {cutoff}")));
        }
        let mut read_f64s = |count: usize| -> Result<Vec<f64>> {
            let mut buf = vec![0u8; count * 8];
            r.read_exact(&mut buf)?;
            Ok(buf
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect())
        };
        let h = read_f64s(6)?;
        let params = OscillatorParams {
            epsilon: h[0],
            omega_x: h[1],
            omega_y: h[2],
            hbar: h[3],
            mass_x: h[4],
            mass_y: h[5],
        };
        let eigenvalues = read_f64s(dim)?;
        let eigenvectors = read_f64s(dim * dim)?;
        Ok(Self {
            cutoff,
            params,
            eigenvalues,
            eigenvectors,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::unperturbed_spectrum;

    #[test]
    fn diagonal_input_is_returned_sorted() {
        let p = OscillatorParams::default();
        let b = enumerate_basis(4);
        let model = SpectralModel::solve(4, &p).unwrap();
        let mut e0 = unperturbed_spectrum(&b, &p);
        e0.sort_by(f64::total_cmp);
        for (a, b) in model.eigenvalues.iter().zip(&e0) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(model.orthonormality_error() < 1e-15);
    }

    #[test]
    fn small_known_matrix() {
        // [[2,1],[1,2]] has eigenvalues 1, 3.
        let h = HamiltonianMatrix::from_row_major(2, vec![2.0, 1.0, 1.0, 2.0]).unwrap();
        let e = diagonalize(&h).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-15);
        assert!((e.values[1] - 3.0).abs() < 1e-15);
        // Largest component positive; ties resolved toward the lower index.
        assert!(e.vectors[0] > 0.0 && e.vectors[1] > 0.0);
    }

    #[test]
    fn degenerate_cluster_ordering_is_deterministic() {
        let h = HamiltonianMatrix::from_row_major(3, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.5]).unwrap();
        let e = diagonalize(&h).unwrap();
        assert_eq!(e.values, vec![0.5, 1.0, 1.0]);
        // Column 1 leads with component 0, column 2 with component 1.
        assert_eq!(e.vectors[0 * 3 + 1], 1.0);
        assert_eq!(e.vectors[1 * 3 + 2], 1.0);
    }

    #[test]
    fn perturbed_model_invariants() {
        let p = OscillatorParams::with_epsilon(0.09);
        let b = enumerate_basis(12);
        let h = build_hamiltonian(&b, &p);
        let m = SpectralModel::solve(12, &p).unwrap();
        assert!(m.orthonormality_error() < 1e-10);
        assert!(m.reconstruction_error(&h) < 1e-9 * h.max_abs());
        assert!(m.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn binary_round_trip_and_rejects_garbage() {
        let m = SpectralModel::solve(3, &OscillatorParams::with_epsilon(0.05)).unwrap();
        let mut buf = Vec::new();
        m.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 16 + 8 * (6 + 10 + 100));
        assert_eq!(SpectralModel::read_binary(buf.as_slice()).unwrap(), m);
        buf[0] = b'X';
        assert!(SpectralModel::read_binary(buf.as_slice()).is_err());
    }
}
