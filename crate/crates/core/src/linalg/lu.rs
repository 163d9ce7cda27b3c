use num_complex::Complex64;

use super::{ComplexMatrix, LinalgError};

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    /// Packed factors: strict lower part holds L (unit diagonal), upper part holds U.
    lu: Vec<Complex64>,
    perm: Vec<usize>,
    swaps: usize,
}

impl Lu {
    /// Factors a square matrix. Exactly singular pivots are reported as an error.
    pub fn factor(a: &ComplexMatrix) -> Result<Self, LinalgError> {
        let n = a.ensure_square()?;
        a.ensure_finite()?;
        let mut lu = a.as_slice().to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut swaps = 0;
        for k in 0..n {
            let mut p = k;
            let mut best = lu[k * n + k].norm();
            for i in k + 1..n {
                let v = lu[i * n + k].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return Err(LinalgError::Singular);
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                swaps += 1;
            }
            let pivot = lu[k * n + k];
            let (upper, lower) = lu.split_at_mut((k + 1) * n);
            let pivot_row = &upper[k * n + k + 1..k * n + n];
            for i in 0..n - k - 1 {
                let row = &mut lower[i * n..(i + 1) * n];
                let l = row[k] / pivot;
                row[k] = l;
                if l == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for (x, &u) in row[k + 1..].iter_mut().zip(pivot_row) {
                    *x -= l * u;
                }
            }
        }
        Ok(Self { n, lu, perm, swaps })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn determinant(&self) -> Complex64 {
        let mut det = if self.swaps % 2 == 0 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(-1.0, 0.0)
        };
        for i in 0..self.n {
            det *= self.lu[i * self.n + i];
        }
        det
    }

    /// `(log|det|, arg det)` without overflow.
    pub fn log_determinant(&self) -> (f64, f64) {
        let mut log_abs = 0.0;
        let mut arg = if self.swaps % 2 == 0 { 0.0 } else { std::f64::consts::PI };
        for i in 0..self.n {
            let d = self.lu[i * self.n + i];
            log_abs += d.norm().ln();
            arg += d.arg();
        }
        (log_abs, arg.rem_euclid(2.0 * std::f64::consts::PI))
    }

    pub fn solve(&self, b: &[Complex64]) -> Result<Vec<Complex64>, LinalgError> {
        let n = self.n;
        if b.len() != n {
            return Err(LinalgError::DimensionMismatch {
                expected: (n, 1),
                found: (b.len(), 1),
            });
        }
        let mut x: Vec<Complex64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = &self.lu[i * n..i * n + i];
            let s: Complex64 = row.iter().zip(&x[..i]).map(|(l, y)| l * y).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n + i + 1..(i + 1) * n];
            let s: Complex64 = row.iter().zip(&x[i + 1..]).map(|(u, y)| u * y).sum();
            x[i] = (x[i] - s) / self.lu[i * n + i];
        }
        Ok(x)
    }

    /// Solves `A^* x = b`.
    pub fn solve_adjoint(&self, b: &[Complex64]) -> Result<Vec<Complex64>, LinalgError> {
        let n = self.n;
        if b.len() != n {
            return Err(LinalgError::DimensionMismatch {
                expected: (n, 1),
                found: (b.len(), 1),
            });
        }
        // A = P^T L U, so A^* = U^* L^* P.
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.lu[k * n + i].conj() * y[k];
            }
            y[i] = s / self.lu[i * n + i].conj();
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.lu[k * n + i].conj() * y[k];
            }
            y[i] = s;
        }
        let mut x = vec![Complex64::new(0.0, 0.0); n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = y[i];
        }
        Ok(x)
    }

    pub fn inverse(&self) -> ComplexMatrix {
        let n = self.n;
        let mut inv = ComplexMatrix::zeros(n, n);
        let mut e = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            e.iter_mut().for_each(|x| *x = Complex64::new(0.0, 0.0));
            e[j] = Complex64::new(1.0, 0.0);
            let col = self.solve(&e).expect("dimension checked");
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }
}

pub fn determinant(a: &ComplexMatrix) -> Result<Complex64, LinalgError> {
    match Lu::factor(a) {
        Ok(lu) => Ok(lu.determinant()),
        Err(LinalgError::Singular) => Ok(Complex64::new(0.0, 0.0)),
        Err(e) => Err(e),
    }
}
