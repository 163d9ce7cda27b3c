//! Singular values and Hermitian eigenvalues.
//!
//! Singular values go through Golub–Kahan bidiagonalization. The bidiagonal
//! factor is made real by taking moduli (a diagonal unitary similarity), and
//! its singular values are read off as the non-negative eigenvalues of the
//! zero-diagonal `2n × 2n` tridiagonal matrix, computed by implicit QL.

use num_complex::Complex64;

use super::{ComplexMatrix, LinalgError};

const EPS: f64 = f64::EPSILON;

/// Singular values in decreasing order (`min(rows, cols)` of them).
pub fn singular_values(m: &ComplexMatrix) -> Result<Vec<f64>, LinalgError> {
    m.ensure_finite()?;
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Ok(Vec::new());
    }
    let work = if rows >= cols { m.clone() } else { m.adjoint() };
    let (d, e) = bidiagonalize(work);
    bidiagonal_singular_values(&d, &e)
}

/// Smallest singular value of `M - zI`.
pub fn smallest_singular_shifted(m: &ComplexMatrix, z: Complex64) -> Result<f64, LinalgError> {
    m.ensure_square()?;
    let s = singular_values(&m.shifted(z))?;
    Ok(s.last().copied().unwrap_or(0.0))
}

/// Reduces an `m × n` matrix (`m ≥ n`) to upper bidiagonal form and returns the
/// moduli of its diagonal and superdiagonal.
fn bidiagonalize(a: ComplexMatrix) -> (Vec<f64>, Vec<f64>) {
    let (m, n) = a.shape();
    let mut a = a.as_slice().to_vec();
    let zero = Complex64::new(0.0, 0.0);
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n.saturating_sub(1)];
    let mut v = vec![zero; m.max(n)];
    let mut w = vec![zero; m.max(n)];
    for k in 0..n {
        // Left reflector on column k, rows k..m.
        let len = m - k;
        for (t, i) in (k..m).enumerate() {
            v[t] = a[i * n + k];
        }
        if let Some((alpha, tau)) = reflector(&mut v[..len]) {
            w[k + 1..n].iter_mut().for_each(|x| *x = zero);
            for (t, i) in (k..m).enumerate() {
                let vc = v[t].conj();
                let row = &a[i * n + k + 1..(i + 1) * n];
                for (wj, &aij) in w[k + 1..n].iter_mut().zip(row) {
                    *wj += vc * aij;
                }
            }
            for (t, i) in (k..m).enumerate() {
                let f = v[t] * tau;
                let row = &mut a[i * n + k + 1..(i + 1) * n];
                for (aij, &wj) in row.iter_mut().zip(&w[k + 1..n]) {
                    *aij -= f * wj;
                }
            }
            d[k] = alpha.norm();
        } else {
            d[k] = a[k * n + k].norm();
        }
        if k + 1 >= n {
            break;
        }
        // Right reflector on row k, columns k+1..n (acting on conjugated row).
        let len = n - k - 1;
        for (t, j) in (k + 1..n).enumerate() {
            v[t] = a[k * n + j].conj();
        }
        if let Some((alpha, tau)) = reflector(&mut v[..len]) {
            // A[k+1.., k+1..] <- A (I - tau v v^*)^T-conj: rows get s = A v, A -= tau s v^*.
            for i in k + 1..m {
                let row = &mut a[i * n + k + 1..(i + 1) * n];
                let s: Complex64 = row.iter().zip(&v[..len]).map(|(x, y)| x * y).sum();
                if s == zero {
                    continue;
                }
                let f = s * tau;
                for (aij, vj) in row.iter_mut().zip(&v[..len]) {
                    *aij -= f * vj.conj();
                }
            }
            e[k] = alpha.norm();
        } else {
            e[k] = a[k * n + k + 1].norm();
        }
    }
    (d, e)
}

/// Householder vector for `x`: overwrites `x` with `v` and returns `(alpha, tau)`
/// such that `(I - tau v v^*) x = alpha e_1`. `None` when `x` is already zero
/// below its first entry.
fn reflector(x: &mut [Complex64]) -> Option<(Complex64, f64)> {
    let tail: f64 = x[1..].iter().map(|z| z.norm_sqr()).sum();
    if tail == 0.0 {
        return None;
    }
    let norm = (x[0].norm_sqr() + tail).sqrt();
    let phase = if x[0].norm() == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        x[0] / x[0].norm()
    };
    let alpha = -phase * norm;
    x[0] -= alpha;
    let vnorm_sq = x[0].norm_sqr() + tail;
    Some((alpha, 2.0 / vnorm_sq))
}

fn bidiagonal_singular_values(d: &[f64], e: &[f64]) -> Result<Vec<f64>, LinalgError> {
    let n = d.len();
    // Tridiagonal with zero diagonal and off-diagonal d0, e0, d1, e1, ...
    let mut diag = vec![0.0; 2 * n];
    let mut off = vec![0.0; 2 * n];
    for i in 0..n {
        off[2 * i] = d[i];
        if i + 1 < n {
            off[2 * i + 1] = e[i];
        }
    }
    tql_eigenvalues(&mut diag, &mut off)?;
    diag.sort_by(|a, b| b.partial_cmp(a).expect("finite eigenvalues"));
    Ok(diag.into_iter().take(n).map(|s| s.max(0.0)).collect())
}

/// Eigenvalues of a real symmetric tridiagonal matrix by implicit QL.
/// `e[i]` couples `i` and `i + 1`; the last entry is ignored. On return `d`
/// holds the eigenvalues (unordered).
pub(crate) fn tql_eigenvalues(d: &mut [f64], e: &mut [f64]) -> Result<(), LinalgError> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    e[n - 1] = 0.0;
    let tnorm = d.iter().chain(e.iter()).map(|x| x.abs()).fold(0.0, f64::max);
    if tnorm == 0.0 {
        return Ok(());
    }
    let max_iter = 30 * n;
    let mut total = 0usize;
    for l in 0..n {
        loop {
            let mut m = l;
            while m + 1 < n {
                let mut dd = d[m].abs() + d[m + 1].abs();
                if dd == 0.0 {
                    dd = tnorm;
                }
                if e[m].abs() <= EPS * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            total += 1;
            if total > max_iter {
                return Err(LinalgError::NoConvergence { iterations: total });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Eigenvalues of a Hermitian matrix in increasing order. Only the lower
/// triangle is read.
pub fn hermitian_eigenvalues(m: &ComplexMatrix) -> Result<Vec<f64>, LinalgError> {
    let n = m.ensure_square()?;
    m.ensure_finite()?;
    let zero = Complex64::new(0.0, 0.0);
    let mut a = ComplexMatrix::from_fn(n, n, |i, j| {
        if i == j {
            Complex64::new(m[(i, i)].re, 0.0)
        } else if i > j {
            m[(i, j)]
        } else {
            m[(j, i)].conj()
        }
    })
    .as_slice()
    .to_vec();
    let mut v = vec![zero; n];
    let mut p = vec![zero; n];
    for k in 0..n.saturating_sub(2) {
        let len = n - k - 1;
        for (t, i) in (k + 1..n).enumerate() {
            v[t] = a[i * n + k];
        }
        let Some((_, tau)) = reflector(&mut v[..len]) else {
            continue;
        };
        // Two-sided update of the trailing block: A <- H A H with H = I - tau v v^*.
        for (t, i) in (k + 1..n).enumerate() {
            let row = &a[i * n + k + 1..(i + 1) * n];
            p[t] = row.iter().zip(&v[..len]).map(|(x, y)| x * y).sum::<Complex64>() * tau;
        }
        let vp: Complex64 = v[..len].iter().zip(&p[..len]).map(|(x, y)| x.conj() * y).sum();
        let half = vp * (tau * 0.5);
        let q: Vec<Complex64> = (0..len).map(|t| p[t] - half * v[t]).collect();
        for (s, i) in (k + 1..n).enumerate() {
            for (t, j) in (k + 1..n).enumerate() {
                a[i * n + j] -= v[s] * q[t].conj() + q[s] * v[t].conj();
            }
        }
        // Column k below the subdiagonal becomes alpha e_1.
        let col_norm: f64 = (k + 1..n).map(|i| a[i * n + k].norm_sqr()).sum::<f64>().sqrt();
        a[(k + 1) * n + k] = Complex64::new(col_norm, 0.0);
        for i in k + 2..n {
            a[i * n + k] = zero;
        }
    }
    let mut d: Vec<f64> = (0..n).map(|i| a[i * n + i].re).collect();
    let mut e: Vec<f64> = (0..n).map(|i| if i + 1 < n { a[(i + 1) * n + i].norm() } else { 0.0 }).collect();
    tql_eigenvalues(&mut d, &mut e)?;
    d.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn diagonal_singular_values_are_moduli() {
        let m = ComplexMatrix::from_diagonal(&[c(3.0, 4.0), c(0.0, -1.0), c(0.5, 0.0)]);
        let s = singular_values(&m).unwrap();
        assert!((s[0] - 5.0).abs() < 1e-14);
        assert!((s[1] - 1.0).abs() < 1e-14);
        assert!((s[2] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn shift_matrix_has_one_zero_singular_value() {
        let n = 6;
        let m = ComplexMatrix::from_fn(n, n, |i, j| if j == i + 1 { c(1.0, 0.0) } else { c(0.0, 0.0) });
        let s = singular_values(&m).unwrap();
        assert!(s[..n - 1].iter().all(|x| (x - 1.0).abs() < 1e-14));
        assert!(s[n - 1].abs() < 1e-14);
        assert!(smallest_singular_shifted(&m, c(0.0, 0.0)).unwrap() < 1e-14);
    }

    #[test]
    fn frobenius_identity_rectangular() {
        let m = ComplexMatrix::from_fn(7, 4, |i, j| c((i * 3 + j) as f64 * 0.1, ((i + 2 * j) % 5) as f64 - 2.0));
        let s = singular_values(&m).unwrap();
        let fro: f64 = s.iter().map(|x| x * x).sum();
        assert!((fro - m.frobenius_norm().powi(2)).abs() < 1e-10 * fro);
        let st = singular_values(&m.adjoint()).unwrap();
        for (a, b) in s.iter().zip(&st) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn hermitian_matches_known_spectrum() {
        // [[2, i], [-i, 2]] has eigenvalues 1 and 3.
        let m = ComplexMatrix::from_rows(&[vec![c(2.0, 0.0), c(0.0, 1.0)], vec![c(0.0, -1.0), c(2.0, 0.0)]]).unwrap();
        let e = hermitian_eigenvalues(&m).unwrap();
        assert!((e[0] - 1.0).abs() < 1e-14 && (e[1] - 3.0).abs() < 1e-14);
        // A^* A eigenvalues are squared singular values.
        let a = ComplexMatrix::from_fn(5, 5, |i, j| c(((i * 7 + j * 3) % 11) as f64 - 5.0, (i as f64 - j as f64) * 0.3));
        let ata = &a.adjoint() * &a;
        let mut e = hermitian_eigenvalues(&ata).unwrap();
        e.reverse();
        let s = singular_values(&a).unwrap();
        for (ev, sv) in e.iter().zip(&s) {
            assert!((ev - sv * sv).abs() < 1e-9 * (1.0 + ev.abs()));
        }
    }
}
