//! Eigenvalues of dense non-Hermitian matrices.
//!
//! Pipeline: diagonal balancing, Householder reduction to upper Hessenberg
//! form, then shifted QR iterations on the Hessenberg matrix. Real input
//! goes through the Francis double-shift iteration in real arithmetic;
//! complex input uses the implicit single-shift iteration with Wilkinson
//! shifts. Only the active window is updated since no Schur vectors are
//! formed.

use num_complex::Complex64;

use super::{ComplexMatrix, LinalgError};
use crate::points::PointSet;

const EPS: f64 = f64::EPSILON;

/// Iterations between ad-hoc exceptional shifts when deflation stalls.
const EXCEPTIONAL_EVERY: usize = 10;

/// Largest dimension accepted by the dense solvers.
pub const MAX_DIM: usize = 4096;

/// All eigenvalues of a matrix together with an a-priori backward error scale.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: PointSet,
    /// `c · ε · N · ‖M‖_F`; the trace of the input matches the eigenvalue sum within it.
    pub backward_error_bound: f64,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn sum(&self) -> Complex64 {
        self.eigenvalues.iter().sum()
    }

    pub fn product(&self) -> Complex64 {
        self.eigenvalues.iter().product()
    }
}

/// Computes every eigenvalue of a square matrix.
pub fn eigenvalues(m: &ComplexMatrix) -> Result<Spectrum, LinalgError> {
    let n = m.ensure_square()?;
    m.ensure_finite()?;
    if n > MAX_DIM {
        return Err(LinalgError::TooLarge { n, max: MAX_DIM });
    }
    let bound = 64.0 * EPS * (n.max(1) as f64) * m.frobenius_norm();
    if n == 0 {
        return Ok(Spectrum {
            eigenvalues: PointSet::default(),
            backward_error_bound: 0.0,
        });
    }
    let eig = if m.is_real() {
        let mut a: Vec<f64> = m.as_slice().iter().map(|z| z.re).collect();
        balance_real(&mut a, n);
        hessenberg_real(&mut a, n);
        hqr(&mut a, n)?
    } else {
        let mut a = m.as_slice().to_vec();
        balance_complex(&mut a, n);
        hessenberg_complex(&mut a, n);
        complex_hessenberg_qr(&mut a, n)?
    };
    Ok(Spectrum {
        eigenvalues: PointSet::new(eig),
        backward_error_bound: bound,
    })
}

/// Eigenvalues of a matrix already in upper Hessenberg form (entries below the
/// first subdiagonal are ignored).
pub fn hessenberg_eigenvalues(h: &ComplexMatrix) -> Result<Vec<Complex64>, LinalgError> {
    let n = h.ensure_square()?;
    h.ensure_finite()?;
    let mut a = h.as_slice().to_vec();
    for i in 0..n {
        for j in 0..i.saturating_sub(1) {
            a[i * n + j] = Complex64::new(0.0, 0.0);
        }
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    complex_hessenberg_qr(&mut a, n)
}

fn balance_complex(a: &mut [Complex64], n: usize) {
    let radix = 2.0;
    let sqrdx = radix * radix;
    let l1 = |z: Complex64| z.re.abs() + z.im.abs();
    loop {
        let mut done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += l1(a[j * n + i]);
                    r += l1(a[i * n + j]);
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / radix;
            while c < g {
                f *= radix;
                c *= sqrdx;
            }
            g = r * radix;
            while c > g {
                f /= radix;
                c /= sqrdx;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                let g = 1.0 / f;
                for j in 0..n {
                    a[i * n + j] *= g;
                }
                for j in 0..n {
                    a[j * n + i] *= f;
                }
            }
        }
        if done {
            break;
        }
    }
}

fn balance_real(a: &mut [f64], n: usize) {
    let radix = 2.0;
    let sqrdx = radix * radix;
    loop {
        let mut done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[j * n + i].abs();
                    r += a[i * n + j].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / radix;
            while c < g {
                f *= radix;
                c *= sqrdx;
            }
            g = r * radix;
            while c > g {
                f /= radix;
                c /= sqrdx;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                let g = 1.0 / f;
                for j in 0..n {
                    a[i * n + j] *= g;
                }
                for j in 0..n {
                    a[j * n + i] *= f;
                }
            }
        }
        if done {
            break;
        }
    }
}

/// Householder reduction to upper Hessenberg form, in place.
pub(crate) fn hessenberg_complex(a: &mut [Complex64], n: usize) {
    let zero = Complex64::new(0.0, 0.0);
    let mut v = vec![zero; n];
    let mut w = vec![zero; n];
    for k in 0..n.saturating_sub(2) {
        let m = n - k - 1;
        let norm_sq: f64 = (k + 1..n).map(|i| a[i * n + k].norm_sqr()).sum();
        let norm = norm_sq.sqrt();
        if norm == 0.0 {
            continue;
        }
        let x0 = a[(k + 1) * n + k];
        let phase = if x0.norm() == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            x0 / x0.norm()
        };
        let alpha = -phase * norm;
        for (t, i) in (k + 1..n).enumerate() {
            v[t] = a[i * n + k];
        }
        v[0] -= alpha;
        let vnorm_sq: f64 = v[..m].iter().map(|x| x.norm_sqr()).sum();
        if vnorm_sq == 0.0 {
            continue;
        }
        let tau = 2.0 / vnorm_sq;
        // Left: rows k+1.., columns k+1.. (column k is set explicitly below).
        w[k + 1..n].iter_mut().for_each(|x| *x = zero);
        for (t, i) in (k + 1..n).enumerate() {
            let vc = v[t].conj();
            let row = &a[i * n + k + 1..(i + 1) * n];
            for (wj, &aij) in w[k + 1..n].iter_mut().zip(row) {
                *wj += vc * aij;
            }
        }
        for (t, i) in (k + 1..n).enumerate() {
            let f = v[t] * tau;
            let row = &mut a[i * n + k + 1..(i + 1) * n];
            for (aij, &wj) in row.iter_mut().zip(&w[k + 1..n]) {
                *aij -= f * wj;
            }
        }
        a[(k + 1) * n + k] = alpha;
        for i in k + 2..n {
            a[i * n + k] = zero;
        }
        // Right: all rows, columns k+1..
        for i in 0..n {
            let row = &mut a[i * n + k + 1..(i + 1) * n];
            let s: Complex64 = row.iter().zip(&v[..m]).map(|(x, y)| x * y).sum();
            if s == zero {
                continue;
            }
            let f = s * tau;
            for (aij, vj) in row.iter_mut().zip(&v[..m]) {
                *aij -= f * vj.conj();
            }
        }
    }
}

pub(crate) fn hessenberg_real(a: &mut [f64], n: usize) {
    let mut v = vec![0.0; n];
    let mut w = vec![0.0; n];
    for k in 0..n.saturating_sub(2) {
        let m = n - k - 1;
        let norm = (k + 1..n).map(|i| a[i * n + k].powi(2)).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let x0 = a[(k + 1) * n + k];
        let alpha = if x0 >= 0.0 { -norm } else { norm };
        for (t, i) in (k + 1..n).enumerate() {
            v[t] = a[i * n + k];
        }
        v[0] -= alpha;
        let vnorm_sq: f64 = v[..m].iter().map(|x| x * x).sum();
        if vnorm_sq == 0.0 {
            continue;
        }
        let tau = 2.0 / vnorm_sq;
        w[k + 1..n].iter_mut().for_each(|x| *x = 0.0);
        for (t, i) in (k + 1..n).enumerate() {
            let vt = v[t];
            let row = &a[i * n + k + 1..(i + 1) * n];
            for (wj, &aij) in w[k + 1..n].iter_mut().zip(row) {
                *wj += vt * aij;
            }
        }
        for (t, i) in (k + 1..n).enumerate() {
            let f = v[t] * tau;
            let row = &mut a[i * n + k + 1..(i + 1) * n];
            for (aij, &wj) in row.iter_mut().zip(&w[k + 1..n]) {
                *aij -= f * wj;
            }
        }
        a[(k + 1) * n + k] = alpha;
        for i in k + 2..n {
            a[i * n + k] = 0.0;
        }
        for i in 0..n {
            let row = &mut a[i * n + k + 1..(i + 1) * n];
            let s: f64 = row.iter().zip(&v[..m]).map(|(x, y)| x * y).sum();
            if s == 0.0 {
                continue;
            }
            let f = s * tau;
            for (aij, vj) in row.iter_mut().zip(&v[..m]) {
                *aij -= f * vj;
            }
        }
    }
}

/// Complex Givens rotation `[c s; -s̄ c]` mapping `(x, y)` to `(r, 0)`.
#[inline]
pub(crate) fn givens(x: Complex64, y: Complex64) -> (f64, Complex64, Complex64) {
    let ny = y.norm();
    if ny == 0.0 {
        return (1.0, Complex64::new(0.0, 0.0), x);
    }
    let nx = x.norm();
    if nx == 0.0 {
        return (0.0, Complex64::new(1.0, 0.0), y);
    }
    let norm = nx.hypot(ny);
    let alpha = x / nx;
    (nx / norm, alpha * y.conj() / norm, alpha * norm)
}

fn two_by_two_eigenvalues(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> (Complex64, Complex64) {
    let half_tr = (a + d) * 0.5;
    let p = (a - d) * 0.5;
    let disc = (p * p + b * c).sqrt();
    (half_tr + disc, half_tr - disc)
}

fn wilkinson_shift(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    let p = (a - d) * 0.5;
    let bc = b * c;
    let mut disc = (p * p + bc).sqrt();
    if (p.conj() * disc).re < 0.0 {
        disc = -disc;
    }
    let denom = p + disc;
    if denom.norm() == 0.0 {
        d
    } else {
        d - bc / denom
    }
}

/// Single-shift implicit QR on a complex upper Hessenberg matrix (row-major, n×n).
fn complex_hessenberg_qr(h: &mut [Complex64], n: usize) -> Result<Vec<Complex64>, LinalgError> {
    let zero = Complex64::new(0.0, 0.0);
    let mut eig = vec![zero; n];
    let norm = h.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    let max_iter = 30 * n.max(1);
    let mut total = 0usize;
    let mut its = 0usize;
    let mut hi = n - 1;
    loop {
        if hi == 0 {
            eig[0] = h[0];
            break;
        }
        let mut l = hi;
        while l > 0 {
            let mut s = h[(l - 1) * n + l - 1].norm() + h[l * n + l].norm();
            if s == 0.0 {
                s = norm;
            }
            if h[l * n + l - 1].norm() <= EPS * s {
                h[l * n + l - 1] = zero;
                break;
            }
            l -= 1;
        }
        if l == hi {
            eig[hi] = h[hi * n + hi];
            hi -= 1;
            its = 0;
            continue;
        }
        if l + 1 == hi {
            let (e1, e2) = two_by_two_eigenvalues(
                h[l * n + l],
                h[l * n + hi],
                h[hi * n + l],
                h[hi * n + hi],
            );
            eig[l] = e1;
            eig[hi] = e2;
            if l == 0 {
                break;
            }
            hi = l - 1;
            its = 0;
            continue;
        }
        total += 1;
        if total > max_iter {
            return Err(LinalgError::NoConvergence { iterations: total });
        }
        its += 1;
        let mu = if its % EXCEPTIONAL_EVERY == 0 {
            let s = h[hi * n + hi - 1].norm() + h[(hi - 1) * n + hi - 2].norm();
            h[hi * n + hi] + Complex64::new(0.75 * s, 0.4375 * s)
        } else {
            wilkinson_shift(
                h[(hi - 1) * n + hi - 1],
                h[(hi - 1) * n + hi],
                h[hi * n + hi - 1],
                h[hi * n + hi],
            )
        };
        let mut x = h[l * n + l] - mu;
        let mut y = h[(l + 1) * n + l];
        for k in l..hi {
            if k > l {
                x = h[k * n + k - 1];
                y = h[(k + 1) * n + k - 1];
            }
            let (c, s, r) = givens(x, y);
            if k > l {
                h[k * n + k - 1] = r;
                h[(k + 1) * n + k - 1] = zero;
            }
            let sc = s.conj();
            {
                let (top, bottom) = h.split_at_mut((k + 1) * n);
                let row_k = &mut top[k * n + k..k * n + hi + 1];
                let row_k1 = &mut bottom[k..hi + 1];
                for (p, q) in row_k.iter_mut().zip(row_k1.iter_mut()) {
                    let a = *p;
                    let b = *q;
                    *p = a * c + s * b;
                    *q = b * c - sc * a;
                }
            }
            let last = (k + 2).min(hi);
            for i in l..=last {
                let a = h[i * n + k];
                let b = h[i * n + k + 1];
                h[i * n + k] = a * c + sc * b;
                h[i * n + k + 1] = b * c - s * a;
            }
        }
    }
    Ok(eig)
}

/// Francis double-shift QR on a real upper Hessenberg matrix (row-major).
fn hqr(a: &mut [f64], n: usize) -> Result<Vec<Complex64>, LinalgError> {
    let idx = |i: usize, j: usize| i * n + j;
    let mut wr = vec![0.0; n];
    let mut wi = vec![0.0; n];
    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a[idx(i, j)].abs();
        }
    }
    let max_iter = 30 * n.max(1);
    let mut total = 0usize;
    let mut nn = n as isize - 1;
    let mut t = 0.0;
    while nn >= 0 {
        let mut its = 0usize;
        loop {
            let nu = nn as usize;
            let mut l = nu;
            while l > 0 {
                let mut s = a[idx(l - 1, l - 1)].abs() + a[idx(l, l)].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[idx(l, l - 1)].abs() <= EPS * s {
                    a[idx(l, l - 1)] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = a[idx(nu, nu)];
            if l == nu {
                wr[nu] = x + t;
                wi[nu] = 0.0;
                nn -= 1;
                break;
            }
            let mut y = a[idx(nu - 1, nu - 1)];
            let mut w = a[idx(nu, nu - 1)] * a[idx(nu - 1, nu)];
            if l == nu - 1 {
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let z = q.abs().sqrt();
                x += t;
                if q >= 0.0 {
                    let z = p + z.copysign(p);
                    wr[nu - 1] = x + z;
                    wr[nu] = if z != 0.0 { x - w / z } else { x + z };
                    wi[nu - 1] = 0.0;
                    wi[nu] = 0.0;
                } else {
                    wr[nu - 1] = x + p;
                    wr[nu] = x + p;
                    wi[nu - 1] = -z;
                    wi[nu] = z;
                }
                nn -= 2;
                break;
            }
            total += 1;
            if total > max_iter {
                return Err(LinalgError::NoConvergence { iterations: total });
            }
            if its > 0 && its % EXCEPTIONAL_EVERY == 0 {
                t += x;
                for i in 0..=nu {
                    a[idx(i, i)] -= x;
                }
                let s = a[idx(nu, nu - 1)].abs() + a[idx(nu - 1, nu - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            let mut m = nu - 2;
            let (mut p, mut q, mut r);
            loop {
                let z = a[idx(m, m)];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / a[idx(m + 1, m)] + a[idx(m, m + 1)];
                q = a[idx(m + 1, m + 1)] - z - rr - ss;
                r = a[idx(m + 2, m + 1)];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a[idx(m, m - 1)].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[idx(m - 1, m - 1)].abs() + z.abs() + a[idx(m + 1, m + 1)].abs());
                if u <= EPS * v {
                    break;
                }
                m -= 1;
            }
            for i in m..nu - 1 {
                a[idx(i + 2, i)] = 0.0;
                if i != m {
                    a[idx(i + 2, i - 1)] = 0.0;
                }
            }
            let mut k = m;
            while k < nu {
                if k != m {
                    p = a[idx(k, k - 1)];
                    q = a[idx(k + 1, k - 1)];
                    r = 0.0;
                    if k + 1 != nu {
                        r = a[idx(k + 2, k - 1)];
                    }
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = (p * p + q * q + r * r).sqrt().copysign(p);
                if s != 0.0 {
                    if k == m {
                        if l != m {
                            a[idx(k, k - 1)] = -a[idx(k, k - 1)];
                        }
                    } else {
                        a[idx(k, k - 1)] = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    let z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nu {
                        let mut pp = a[idx(k, j)] + q * a[idx(k + 1, j)];
                        if k + 1 != nu {
                            pp += r * a[idx(k + 2, j)];
                            a[idx(k + 2, j)] -= pp * z;
                        }
                        a[idx(k + 1, j)] -= pp * y;
                        a[idx(k, j)] -= pp * x;
                    }
                    let mmin = if nu < k + 3 { nu } else { k + 3 };
                    for i in l..=mmin {
                        let mut pp = x * a[idx(i, k)] + y * a[idx(i, k + 1)];
                        if k + 1 != nu {
                            pp += z * a[idx(i, k + 2)];
                            a[idx(i, k + 2)] -= pp * r;
                        }
                        a[idx(i, k + 1)] -= pp * q;
                        a[idx(i, k)] -= pp;
                    }
                }
                k += 1;
            }
            if (l as isize) + 1 >= nn {
                break;
            }
        }
    }
    Ok(wr.into_iter().zip(wi).map(|(re, im)| Complex64::new(re, im)).collect())
}
