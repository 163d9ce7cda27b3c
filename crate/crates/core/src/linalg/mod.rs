//! Dense complex linear algebra.

mod eigen;
mod localized;
mod lu;
mod matrix;
mod svd;

use num_complex::Complex64;
use thiserror::Error;

pub use eigen::{eigenvalues, hessenberg_eigenvalues, Spectrum, MAX_DIM};
pub use localized::{eigenvalues_near, LocalizedEigenvalues, LocalizedMethod};
pub use lu::{determinant, Lu};
pub use matrix::ComplexMatrix;
pub use svd::{hermitian_eigenvalues, singular_values, smallest_singular_shifted};

/// Shifts closer than this (in smallest singular value) to the spectrum are refused.
pub const SINGULAR_GUARD: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix contains NaN or infinite entries")]
    NonFinite,
    #[error("matrix is singular")]
    Singular,
    #[error("dimension {n} exceeds the supported maximum {max}")]
    TooLarge { n: usize, max: usize },
    #[error("QR iteration did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("shift z = {z} is within {distance:e} of the spectrum")]
    NearSingularShift { z: Complex64, distance: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Operator whose resolvent is evaluated: either dense or given by its diagonal.
#[derive(Debug, Clone, Copy)]
pub enum Operator<'a> {
    Dense(&'a ComplexMatrix),
    Diagonal(&'a [Complex64]),
}

impl Operator<'_> {
    pub fn dim(&self) -> usize {
        match self {
            Operator::Dense(m) => m.n_rows(),
            Operator::Diagonal(d) => d.len(),
        }
    }
}

/// `u^* (zI - A')^{-1} v`.
pub fn resolvent_bilinear(u: &[Complex64], a: Operator<'_>, z: Complex64, v: &[Complex64]) -> Result<Complex64, LinalgError> {
    let n = a.dim();
    check_len(u, n)?;
    check_len(v, n)?;
    match a {
        Operator::Diagonal(d) => {
            let mut acc = Complex64::new(0.0, 0.0);
            for ((ui, di), vi) in u.iter().zip(d).zip(v) {
                let gap = z - di;
                if gap.norm() <= SINGULAR_GUARD {
                    return Err(LinalgError::NearSingularShift { z, distance: gap.norm() });
                }
                acc += ui.conj() * vi / gap;
            }
            Ok(acc)
        }
        Operator::Dense(m) => {
            m.ensure_square()?;
            let lu = guarded_lu(&m.shifted(z).scale_real(-1.0), z)?;
            let x = lu.solve(v)?;
            Ok(u.iter().zip(&x).map(|(a, b)| a.conj() * b).sum())
        }
    }
}

/// `det(A' + PQ - z) / det(A' - z) = det(I_r + Q (A' - z)^{-1} P)`.
pub fn det_ratio_rank_r(a_prime: &ComplexMatrix, p: &ComplexMatrix, q: &ComplexMatrix, z: Complex64) -> Result<Complex64, LinalgError> {
    let n = a_prime.ensure_square()?;
    let r = p.n_cols();
    if p.n_rows() != n {
        return Err(LinalgError::DimensionMismatch {
            expected: (n, r),
            found: p.shape(),
        });
    }
    if q.shape() != (r, n) {
        return Err(LinalgError::DimensionMismatch {
            expected: (r, n),
            found: q.shape(),
        });
    }
    p.ensure_finite()?;
    q.ensure_finite()?;
    if r == 0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let lu = guarded_lu(&a_prime.shifted(z), z)?;
    let mut small = ComplexMatrix::identity(r);
    let mut col = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..r {
        for (i, c) in col.iter_mut().enumerate() {
            *c = p[(i, j)];
        }
        let x = lu.solve(&col)?;
        for i in 0..r {
            small[(i, j)] += q.row_slice(i).iter().zip(&x).map(|(a, b)| a * b).sum::<Complex64>();
        }
    }
    determinant(&small)
}

fn check_len(x: &[Complex64], n: usize) -> Result<(), LinalgError> {
    if x.len() != n {
        return Err(LinalgError::DimensionMismatch {
            expected: (n, 1),
            found: (x.len(), 1),
        });
    }
    if x.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
        return Err(LinalgError::NonFinite);
    }
    Ok(())
}

/// LU of `shifted` that refuses near-singular shifts. The smallest singular
/// value is estimated from below by inverse iteration on `S^* S`.
fn guarded_lu(shifted: &ComplexMatrix, z: Complex64) -> Result<Lu, LinalgError> {
    let n = shifted.n_rows();
    let lu = match Lu::factor(shifted) {
        Ok(lu) => lu,
        Err(LinalgError::Singular) => return Err(LinalgError::NearSingularShift { z, distance: 0.0 }),
        Err(e) => return Err(e),
    };
    if n == 0 {
        return Ok(lu);
    }
    let mut x: Vec<Complex64> = (0..n)
        .map(|i| Complex64::new(1.0 + 0.37 * ((i * 7919) % 13) as f64, 0.21 * ((i * 104729) % 7) as f64))
        .collect();
    let mut gain = 0.0;
    for _ in 0..3 {
        let nx = x.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        x.iter_mut().for_each(|c| *c /= nx);
        let y = lu.solve(&x)?;
        gain = y.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let ny = gain;
        if !ny.is_finite() {
            return Err(LinalgError::NearSingularShift { z, distance: 0.0 });
        }
        x = lu.solve_adjoint(&y.iter().map(|c| c / ny).collect::<Vec<_>>())?;
    }
    // gain ≤ 1/s_min, so 1/gain is an upper estimate of s_min.
    let s_est = 1.0 / gain;
    if !(s_est > SINGULAR_GUARD) {
        return Err(LinalgError::NearSingularShift { z, distance: s_est });
    }
    Ok(lu)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn resolvent_trivial_case() {
        let e1 = vec![c(1.0, 0.0), c(0.0, 0.0)];
        let zero = ComplexMatrix::zeros(2, 2);
        let r = resolvent_bilinear(&e1, Operator::Dense(&zero), c(2.0, 0.0), &e1).unwrap();
        assert!((r - c(0.5, 0.0)).norm() < 1e-15);
        let d = [c(0.0, 0.0), c(0.0, 0.0)];
        let r = resolvent_bilinear(&e1, Operator::Diagonal(&d), c(2.0, 0.0), &e1).unwrap();
        assert!((r - c(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn near_singular_shift_refused() {
        let e1 = vec![c(1.0, 0.0), c(0.0, 0.0)];
        let d = [c(1.0, 0.0), c(3.0, 0.0)];
        assert!(matches!(
            resolvent_bilinear(&e1, Operator::Diagonal(&d), c(1.0, 0.0), &e1),
            Err(LinalgError::NearSingularShift { .. })
        ));
        let m = ComplexMatrix::from_diagonal(&d);
        assert!(matches!(
            resolvent_bilinear(&e1, Operator::Dense(&m), c(3.0, 0.0), &e1),
            Err(LinalgError::NearSingularShift { .. })
        ));
    }

    #[test]
    fn rank_ratio_with_zero_factor_is_one() {
        let a = ComplexMatrix::from_diagonal(&[c(1.0, 0.0), c(2.0, 1.0), c(0.0, -1.0)]);
        let p = ComplexMatrix::zeros(3, 2);
        let q = ComplexMatrix::zeros(2, 3);
        let r = det_ratio_rank_r(&a, &p, &q, c(0.3, 0.2)).unwrap();
        assert!((r - c(1.0, 0.0)).norm() < 1e-14);
    }
}
