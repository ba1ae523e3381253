//! Physicists' Hermite polynomials and the normalized 1D oscillator
//! eigenfunctions built from them.

use crate::error::{Error, Result};

/// `H_n(k)` by the three-term recurrence `H_{n+1} = 2k H_n − 2n H_{n−1}`.
pub fn hermite_value(n: usize, k: f64) -> Result<f64> {
    let mut prev = 1.0;
    if n == 0 {
        return Ok(prev);
    }
    let mut cur = 2.0 * k;
    for j in 1..n {
        let next = 2.0 * k * cur - 2.0 * j as f64 * prev;
        prev = cur;
        cur = next;
        if !cur.is_finite() {
            return Err(Error::HermiteOverflow { n, k });
        }
    }
    if cur.is_finite() {
        Ok(cur)
    } else {
        Err(Error::HermiteOverflow { n, k })
    }
}

/// Values and first derivatives of the oscillator eigenfunctions
/// `ψ_n(x) = (2ⁿ n!)^{-½} (α/π)^{¼} e^{−αx²/2} H_n(√α x)` for `n = 0..=nmax`.
///
/// Uses the normalized recurrence, which never forms `H_n` or `n!`
/// explicitly, and `dψ_n/dξ = √(2n) ψ_{n−1} − ξ ψ_n` (from `H_n' = 2n H_{n−1}`).
pub fn eigenfunctions(alpha: f64, x: f64, values: &mut [f64], derivs: &mut [f64]) {
    let n = values.len();
    debug_assert_eq!(n, derivs.len());
    if n == 0 {
        return;
    }
    let sa = alpha.sqrt();
    let xi = sa * x;
    let norm = (alpha / std::f64::consts::PI).powf(0.25);
    values[0] = norm * (-0.5 * xi * xi).exp();
    if n > 1 {
        values[1] = std::f64::consts::SQRT_2 * xi * values[0];
    }
    for j in 1..n.saturating_sub(1) {
        let jf = j as f64;
        values[j + 1] = (2.0 / (jf + 1.0)).sqrt() * xi * values[j]
            - (jf / (jf + 1.0)).sqrt() * values[j - 1];
    }
    derivs[0] = -sa * xi * values[0];
    for j in 1..n {
        derivs[j] = sa * ((2.0 * j as f64).sqrt() * values[j - 1] - xi * values[j]);
    }
}

/// Single eigenfunction value, for tests and one-off evaluations.
pub fn eigenfunction(alpha: f64, n: usize, x: f64) -> f64 {
    let mut v = vec![0.0; n + 1];
    let mut d = vec![0.0; n + 1];
    eigenfunctions(alpha, x, &mut v, &mut d);
    v[n]
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Integer coefficients of `H_n` from repeated differentiation of
    /// `p(k)·e^{−k²}`: `d/dk (p e^{−k²}) = (p' − 2k p) e^{−k²}`, which is the
    /// Rodrigues formula applied once per degree.
    fn rodrigues_coefficients(n: usize) -> Vec<i64> {
        let mut p = vec![1i64];
        for _ in 0..n {
            let mut next = vec![0i64; p.len() + 1];
            for (i, &c) in p.iter().enumerate() {
                if i > 0 {
                    next[i - 1] += c * i as i64;
                }
                next[i + 1] -= 2 * c;
            }
            p = next;
        }
        // (−1)ⁿ sign from the Rodrigues prefactor.
        if n % 2 == 1 {
            p.iter_mut().for_each(|c| *c = -*c);
        }
        p
    }

    fn eval_poly(c: &[i64], k: f64) -> f64 {
        c.iter().rev().fold(0.0, |acc, &ci| acc * k + ci as f64)
    }

    #[test]
    fn base_and_closed_forms() {
        assert_eq!(hermite_value(0, 3.7).unwrap(), 1.0);
        assert_eq!(hermite_value(3, 1.0).unwrap(), -4.0);
        assert_eq!(rodrigues_coefficients(6), vec![-120, 0, 720, 0, -480, 0, 64]);
    }

    #[test]
    fn recurrence_matches_rodrigues_expansion() {
        let h6 = eval_poly(&rodrigues_coefficients(6), 0.5);
        assert_eq!(h6, 64.0 / 64.0 - 480.0 / 16.0 + 720.0 / 4.0 - 120.0);
        assert!((hermite_value(6, 0.5).unwrap() - h6).abs() < 1e-12);
        for n in 0..=24 {
            let c = rodrigues_coefficients(n);
            for &k in &[-2.3, -0.7, 0.0, 0.31, 1.9] {
                let exact = eval_poly(&c, k);
                let got = hermite_value(n, k).unwrap();
                assert!(
                    (got - exact).abs() <= 1e-11 * exact.abs().max(1.0),
                    "n={n} k={k}: {got} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn overflow_is_reported() {
        assert!(matches!(
            hermite_value(400, 1e150),
            Err(Error::HermiteOverflow { .. })
        ));
        assert!(hermite_value(24, 20.0).is_ok());
    }

    #[test]
    fn normalized_functions_agree_with_polynomial_form() {
        let alpha = std::f64::consts::FRAC_1_SQRT_2;
        let mut fact = 1.0;
        for n in 0..=12usize {
            if n > 0 {
                fact *= n as f64;
            }
            for &x in &[-3.1, -0.4, 0.0, 1.25, 2.8] {
                let xi = alpha.sqrt() * x;
                let direct = (alpha / std::f64::consts::PI).powf(0.25)
                    * (-0.5 * xi * xi).exp()
                    * hermite_value(n, xi).unwrap()
                    / (2f64.powi(n as i32) * fact).sqrt();
                assert!((eigenfunction(alpha, n, x) - direct).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let alpha = 1.0;
        let mut v = [0.0; 13];
        let mut d = [0.0; 13];
        let mut vp = [0.0; 13];
        let mut vm = [0.0; 13];
        let mut scratch = [0.0; 13];
        let h = 1e-5;
        for &x in &[-2.0, -0.3, 0.9, 2.2] {
            eigenfunctions(alpha, x, &mut v, &mut d);
            eigenfunctions(alpha, x + h, &mut vp, &mut scratch);
            eigenfunctions(alpha, x - h, &mut vm, &mut scratch);
            for n in 0..13 {
                let fd = (vp[n] - vm[n]) / (2.0 * h);
                assert!((fd - d[n]).abs() < 1e-8, "n={n} x={x}");
            }
        }
    }
}
