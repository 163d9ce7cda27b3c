//! Eigenvalues inside a small disk via shift-invert Arnoldi.
//!
//! For outlier experiments only the few eigenvalues near a target point are
//! needed. With `Op = (M - cI)^{-1}` those eigenvalues become the dominant
//! part of the spectrum of `Op`, and a short Arnoldi run resolves them at the
//! cost of one LU factorization. Whenever the Krylov result is not clearly
//! converged the routine falls back to the dense eigensolver, so the answer is
//! always the full set of eigenvalues in the disk.

use num_complex::Complex64;

use super::eigen::{eigenvalues, hessenberg_eigenvalues};
use super::lu::Lu;
use super::{ComplexMatrix, LinalgError};

const KRYLOV_DIM: usize = 48;
/// Ritz values with `|μ| ≥ SAFETY / radius` must be converged.
const SAFETY: f64 = 0.9;
const RESIDUAL_TOL: f64 = 1e-9;

/// How the eigenvalues were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalizedMethod {
    ShiftInvert,
    DenseFallback,
}

#[derive(Debug, Clone)]
pub struct LocalizedEigenvalues {
    pub eigenvalues: Vec<Complex64>,
    pub method: LocalizedMethod,
}

/// Eigenvalues of `m` in the closed disk `|λ - center| ≤ radius`.
pub fn eigenvalues_near(m: &ComplexMatrix, center: Complex64, radius: f64) -> Result<LocalizedEigenvalues, LinalgError> {
    let n = m.ensure_square()?;
    m.ensure_finite()?;
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(LinalgError::InvalidArgument(format!("radius must be positive, got {radius}")));
    }
    if n <= 2 * KRYLOV_DIM {
        return dense(m, center, radius);
    }
    let lu = match Lu::factor(&m.shifted(center)) {
        Ok(lu) => lu,
        Err(LinalgError::Singular) => return dense(m, center, radius),
        Err(e) => return Err(e),
    };
    match shift_invert(&lu, n, center, radius)? {
        Some(eigs) => Ok(LocalizedEigenvalues {
            eigenvalues: eigs,
            method: LocalizedMethod::ShiftInvert,
        }),
        None => dense(m, center, radius),
    }
}

fn dense(m: &ComplexMatrix, center: Complex64, radius: f64) -> Result<LocalizedEigenvalues, LinalgError> {
    let spectrum = eigenvalues(m)?;
    Ok(LocalizedEigenvalues {
        eigenvalues: spectrum
            .eigenvalues
            .iter()
            .copied()
            .filter(|z| (z - center).norm() <= radius)
            .collect(),
        method: LocalizedMethod::DenseFallback,
    })
}

fn start_vector(n: usize) -> Vec<Complex64> {
    let mut state: u64 = 0x9E37_79B9_7F4A_7C15;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    (0..n).map(|_| Complex64::new(next(), next())).collect()
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Returns `None` when the result cannot be trusted.
fn shift_invert(lu: &Lu, n: usize, center: Complex64, radius: f64) -> Result<Option<Vec<Complex64>>, LinalgError> {
    let k = KRYLOV_DIM;
    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(k + 1);
    let mut h = ComplexMatrix::zeros(k + 1, k);
    let mut v = start_vector(n);
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    basis.push(v);
    let mut dim = k;
    for j in 0..k {
        let mut w = lu.solve(&basis[j])?;
        if !w.iter().all(|x| x.re.is_finite() && x.im.is_finite()) {
            return Ok(None);
        }
        // Two passes of classical Gram–Schmidt.
        for _ in 0..2 {
            for (i, q) in basis.iter().enumerate() {
                let c = dot(q, &w);
                h[(i, j)] += c;
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= c * qi;
                }
            }
        }
        let beta = norm(&w);
        h[(j + 1, j)] = Complex64::new(beta, 0.0);
        let scale = h.as_slice().iter().map(|x| x.norm()).fold(0.0, f64::max);
        if beta <= 1e-14 * scale {
            // Invariant subspace found: Ritz values are exact.
            dim = j + 1;
            break;
        }
        w.iter_mut().for_each(|x| *x /= beta);
        basis.push(w);
    }
    let hk = h.submatrix(0..dim, 0..dim);
    let beta_last = h[(dim, dim - 1)].norm();
    let ritz = hessenberg_eigenvalues(&hk)?;
    let threshold = 1.0 / radius;
    let h_scale = hk.frobenius_norm().max(f64::MIN_POSITIVE);
    let mut found = Vec::new();
    for &mu in &ritz {
        if mu.norm() < SAFETY * threshold {
            continue;
        }
        let residual = beta_last * last_component_of_ritz_vector(&hk, mu)?;
        if !(residual <= RESIDUAL_TOL * h_scale) {
            return Ok(None);
        }
        if mu.norm() >= threshold {
            let lambda = center + Complex64::new(1.0, 0.0) / mu;
            if (lambda - center).norm() <= radius {
                found.push(lambda);
            }
        }
    }
    Ok(Some(found))
}

/// `|y_last|` for the unit eigenvector `y` of the small Hessenberg matrix at `mu`,
/// via two steps of inverse iteration.
fn last_component_of_ritz_vector(h: &ComplexMatrix, mu: Complex64) -> Result<f64, LinalgError> {
    let k = h.n_rows();
    let scale = h.frobenius_norm().max(1.0);
    let mut shifted = h.shifted(mu);
    // Nudge so the factorization is defined for an exact eigenvalue.
    for i in 0..k {
        shifted[(i, i)] -= Complex64::new(1e-13 * scale, 0.0);
    }
    let lu = match Lu::factor(&shifted) {
        Ok(lu) => lu,
        Err(LinalgError::Singular) => return Ok(0.0),
        Err(e) => return Err(e),
    };
    let mut y = vec![Complex64::new(1.0, 0.0); k];
    for _ in 0..3 {
        y = lu.solve(&y)?;
        let ny = norm(&y);
        if !(ny.is_finite() && ny > 0.0) {
            return Ok(f64::INFINITY);
        }
        y.iter_mut().for_each(|x| *x /= ny);
    }
    Ok(y[k - 1].norm())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn test_matrix(n: usize) -> ComplexMatrix {
        // Small random bulk plus two planted eigenvalues near 2 and 2+0.1i.
        let mut state: u64 = 12345;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let s = 0.5 / (n as f64).sqrt();
        let mut m = ComplexMatrix::from_fn(n, n, |_, _| c(next() * s, next() * s));
        m[(0, 0)] += c(2.0, 0.0);
        m[(1, 1)] += c(2.0, 0.1);
        m
    }

    #[test]
    fn agrees_with_dense_solver() {
        let m = test_matrix(160);
        let local = eigenvalues_near(&m, c(2.0, 0.05), 0.5).unwrap();
        assert_eq!(local.method, LocalizedMethod::ShiftInvert);
        let mut dense: Vec<Complex64> = eigenvalues(&m)
            .unwrap()
            .eigenvalues
            .iter()
            .copied()
            .filter(|z| (z - c(2.0, 0.05)).norm() <= 0.5)
            .collect();
        assert_eq!(local.eigenvalues.len(), 2);
        assert_eq!(dense.len(), 2);
        for z in &local.eigenvalues {
            let (i, d) = dense
                .iter()
                .enumerate()
                .map(|(i, w)| (i, (w - z).norm()))
                .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
            assert!(d < 1e-9, "{z} off by {d}");
            dense.remove(i);
        }
    }

    #[test]
    fn empty_disk() {
        let m = test_matrix(120);
        let local = eigenvalues_near(&m, c(-3.0, 0.0), 0.5).unwrap();
        assert!(local.eigenvalues.is_empty());
    }

    #[test]
    fn small_matrices_use_dense_path() {
        let m = ComplexMatrix::from_diagonal(&[c(1.0, 0.0), c(1.2, 0.0), c(5.0, 0.0)]);
        let local = eigenvalues_near(&m, c(1.0, 0.0), 0.3).unwrap();
        assert_eq!(local.method, LocalizedMethod::DenseFallback);
        assert_eq!(local.eigenvalues.len(), 2);
        assert!(eigenvalues_near(&m, c(0.0, 0.0), -1.0).is_err());
    }
}
