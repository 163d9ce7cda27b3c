use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::LinalgError;

/// Dense complex matrix stored row-major.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            data: vec![Complex64::new(0.0, 0.0); n_rows * n_cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(n_rows: usize, n_cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for i in 0..n_rows {
            for j in 0..n_cols {
                data.push(f(i, j));
            }
        }
        Self { n_rows, n_cols, data }
    }

    /// Builds a matrix from row-major entries.
    pub fn from_row_major(n_rows: usize, n_cols: usize, data: Vec<Complex64>) -> Result<Self, LinalgError> {
        if data.len() != n_rows * n_cols {
            return Err(LinalgError::DimensionMismatch {
                expected: (n_rows, n_cols),
                found: (data.len(), 1),
            });
        }
        Ok(Self { n_rows, n_cols, data })
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self, LinalgError> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for row in rows {
            if row.len() != n_cols {
                return Err(LinalgError::DimensionMismatch {
                    expected: (n_rows, n_cols),
                    found: (n_rows, row.len()),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { n_rows, n_cols, data })
    }

    pub fn from_diagonal(values: &[Complex64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Column vector (n × 1).
    pub fn column(values: &[Complex64]) -> Self {
        Self {
            n_rows: values.len(),
            n_cols: 1,
            data: values.to_vec(),
        }
    }

    /// Row vector (1 × n).
    pub fn row(values: &[Complex64]) -> Self {
        Self {
            n_rows: 1,
            n_cols: values.len(),
            data: values.to_vec(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn row_slice(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.n_rows.min(self.n_cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn trace(&self) -> Complex64 {
        self.diagonal().into_iter().sum()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n_cols, self.n_rows, |i, j| self[(j, i)])
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.n_cols, self.n_rows, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            data: self.data.iter().map(|&x| x * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(Complex64::new(s, 0.0))
    }

    /// `self - z I`.
    pub fn shifted(&self, z: Complex64) -> Self {
        let mut m = self.clone();
        for i in 0..self.n_rows.min(self.n_cols) {
            m[(i, i)] -= z;
        }
        m
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    /// True when every entry has a zero imaginary part.
    pub fn is_real(&self) -> bool {
        self.data.iter().all(|x| x.im == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.re.is_finite() && x.im.is_finite())
    }

    pub fn ensure_finite(&self) -> Result<(), LinalgError> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(LinalgError::NonFinite)
        }
    }

    pub fn ensure_square(&self) -> Result<usize, LinalgError> {
        if self.is_square() {
            Ok(self.n_rows)
        } else {
            Err(LinalgError::NotSquare {
                rows: self.n_rows,
                cols: self.n_cols,
            })
        }
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self, LinalgError> {
        self.check_same_shape(other)?;
        Ok(Self {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self, LinalgError> {
        self.check_same_shape(other)?;
        Ok(Self {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn checked_mul(&self, other: &Self) -> Result<Self, LinalgError> {
        if self.n_cols != other.n_rows {
            return Err(LinalgError::DimensionMismatch {
                expected: (self.n_cols, other.n_cols),
                found: other.shape(),
            });
        }
        let (n, m, p) = (self.n_rows, self.n_cols, other.n_cols);
        let mut out = vec![Complex64::new(0.0, 0.0); n * p];
        for i in 0..n {
            let out_row = &mut out[i * p..(i + 1) * p];
            for k in 0..m {
                let a = self.data[i * m + k];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let b_row = &other.data[k * p..(k + 1) * p];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(Self {
            n_rows: n,
            n_cols: p,
            data: out,
        })
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Result<Vec<Complex64>, LinalgError> {
        if x.len() != self.n_cols {
            return Err(LinalgError::DimensionMismatch {
                expected: (self.n_cols, 1),
                found: (x.len(), 1),
            });
        }
        Ok((0..self.n_rows)
            .map(|i| self.row_slice(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Copy of the block `rows × cols`.
    pub fn submatrix(&self, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> Self {
        Self::from_fn(rows.len(), cols.len(), |i, j| self[(rows.start + i, cols.start + j)])
    }

    /// Writes `block` with its top-left corner at `(row, col)`.
    pub fn set_block(&mut self, row: usize, col: usize, block: &Self) {
        for i in 0..block.n_rows {
            for j in 0..block.n_cols {
                self[(row + i, col + j)] = block[(i, j)];
            }
        }
    }

    fn check_same_shape(&self, other: &Self) -> Result<(), LinalgError> {
        if self.shape() != other.shape() {
            return Err(LinalgError::DimensionMismatch {
                expected: self.shape(),
                found: other.shape(),
            });
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        debug_assert!(i < self.n_rows && j < self.n_cols);
        &self.data[i * self.n_cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        debug_assert!(i < self.n_rows && j < self.n_cols);
        &mut self.data[i * self.n_cols + j]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.checked_add(rhs).expect("matrix shapes differ")
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.checked_sub(rhs).expect("matrix shapes differ")
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.checked_mul(rhs).expect("inner dimensions differ")
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.n_rows, self.n_cols)?;
        for i in 0..self.n_rows.min(8) {
            write!(f, "  ")?;
            for j in 0..self.n_cols.min(8) {
                let z = self[(i, j)];
                write!(f, "{:>9.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn product_and_adjoint() {
        let a = ComplexMatrix::from_rows(&[vec![c(1.0, 1.0), c(0.0, 2.0)], vec![c(3.0, 0.0), c(1.0, -1.0)]]).unwrap();
        let b = ComplexMatrix::identity(2);
        assert_eq!(&a * &b, a);
        let aa = &a * &a.adjoint();
        // Hermitian product
        assert!((aa[(0, 1)] - aa[(1, 0)].conj()).norm() < 1e-15);
        assert!((aa.trace().re - a.frobenius_norm().powi(2)).abs() < 1e-12);
    }

    #[test]
    fn shape_errors() {
        let a = ComplexMatrix::zeros(2, 3);
        let b = ComplexMatrix::zeros(2, 3);
        assert!(a.checked_mul(&b).is_err());
        assert!(a.ensure_square().is_err());
        assert!(ComplexMatrix::from_rows(&[vec![c(1.0, 0.0)], vec![]]).is_err());
    }
}
