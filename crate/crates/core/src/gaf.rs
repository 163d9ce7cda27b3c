//! Gaussian analytic functions: kernels, sampling, zero finding and zero
//! intensities.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::points::PointSet;
use crate::region::Region;
use crate::rng::{complex_normal, RngStream};

/// Largest grid accepted by [`sample_gaf_grid`].
pub const MAX_GRID: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GafError {
    #[error("point {0} is outside the kernel domain")]
    OutsideDomain(Complex64),
    #[error("kernel denominator vanishes at ({z}, {w})")]
    Pole { z: Complex64, w: Complex64 },
    #[error("covariance is not positive semidefinite (pivot {pivot:e} at index {index})")]
    NotPsd { index: usize, pivot: f64 },
    #[error("grid has {0} points, more than the supported {MAX_GRID}")]
    GridTooLarge(usize),
    #[error("zero search gave up near {near} (cell side {side:e})")]
    ZeroSearch { near: Complex64, side: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Covariance structure of a Gaussian process on the plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelKind {
    /// `φ² / (1 − σ² φ)` with `φ(z, w) = 1 / (1 − z w̄)`.
    KInner { sigma: f64 },
    /// `φ²`.
    K0,
    /// `φ² / (1 + σ² φ)`.
    HOuter { sigma: f64 },
    /// Finite-N covariance for `A = diag(a_prime) + v u^*`.
    GnFinite {
        a_prime: Vec<Complex64>,
        u: Vec<Complex64>,
        v: Vec<Complex64>,
        sigma: f64,
        second_moment: Complex64,
    },
    /// `Σ_{k≥0} γ_k z^{-k}` with `E γ_k² = (E X²)^{k+1}`.
    SeriesOuter { second_moment: Complex64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub domain: Region,
}

fn phi(z: Complex64, w: Complex64) -> Result<Complex64, GafError> {
    let d = Complex64::new(1.0, 0.0) - z * w.conj();
    if d.norm() < 1e-14 {
        return Err(GafError::Pole { z, w });
    }
    Ok(d.inv())
}

/// Returns `(E g(z) ḡ(w), E g(z) g(w))`.
pub fn kernel_eval(spec: &KernelSpec, z: Complex64, w: Complex64) -> Result<(Complex64, Complex64), GafError> {
    for p in [z, w] {
        if !spec.domain.contains(p) {
            return Err(GafError::OutsideDomain(p));
        }
    }
    kernel_unchecked(&spec.kind, z, w)
}

fn kernel_unchecked(kind: &KernelKind, z: Complex64, w: Complex64) -> Result<(Complex64, Complex64), GafError> {
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    match kind {
        KernelKind::K0 => {
            if (z * w.conj()).norm() >= 1.0 {
                return Err(GafError::Pole { z, w });
            }
            let p = phi(z, w)?;
            Ok((p * p, zero))
        }
        KernelKind::KInner { sigma } => {
            let s2 = sigma * sigma;
            // The series only converges while σ²φ(z, z) < 1 at both points.
            for p in [z, w] {
                if p.norm_sqr() >= 1.0 - s2 {
                    return Err(GafError::OutsideDomain(p));
                }
            }
            let p = phi(z, w)?;
            let den = one - p * s2;
            if den.norm() < 1e-14 {
                return Err(GafError::Pole { z, w });
            }
            Ok((p * p / den, zero))
        }
        KernelKind::HOuter { sigma } => {
            let p = phi(z, w)?;
            let den = one + p * (sigma * sigma);
            if den.norm() < 1e-14 {
                return Err(GafError::Pole { z, w });
            }
            Ok((p * p / den, zero))
        }
        KernelKind::SeriesOuter { second_moment } => {
            let x = (z * w.conj()).inv();
            let y = (z * w).inv();
            if !(x.norm() < 1.0) {
                return Err(GafError::Pole { z, w });
            }
            let m = *second_moment;
            Ok((one / (one - x), m / (one - m * y)))
        }
        KernelKind::GnFinite {
            a_prime,
            u,
            v,
            sigma,
            second_moment,
        } => {
            let n = a_prime.len();
            if u.len() != n || v.len() != n || n == 0 {
                return Err(GafError::InvalidArgument("u, v and a_prime must have equal nonzero length".into()));
            }
            let s2 = sigma * sigma;
            let mut uu = zero;
            let mut vv = zero;
            let mut uu_t = zero;
            let mut vv_t = zero;
            let mut phi_n = zero;
            let mut psi_n = zero;
            for k in 0..n {
                let dz = z - a_prime[k];
                let dw = w - a_prime[k];
                if dz.norm() < 1e-10 || dw.norm() < 1e-10 {
                    return Err(GafError::Pole { z, w });
                }
                let herm = (dz * dw.conj()).inv();
                let sym = (dz * dw).inv();
                uu += u[k].norm_sqr() * herm;
                vv += v[k].norm_sqr() * herm;
                uu_t += u[k].conj() * u[k].conj() * sym;
                vv_t += v[k] * v[k] * sym;
                phi_n += herm;
                psi_n += sym;
            }
            phi_n /= n as f64;
            psi_n /= n as f64;
            let m = *second_moment;
            let den_h = one - phi_n * s2;
            let den_p = one - m * psi_n * s2;
            if den_h.norm() < 1e-14 || den_p.norm() < 1e-14 {
                return Err(GafError::Pole { z, w });
            }
            Ok((uu * vv / den_h, uu_t * vv_t * m / den_p))
        }
    }
}

/// Joint draw of a Gaussian process on finitely many points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GafSampleGrid {
    pub grid_points: Vec<Complex64>,
    pub values: Vec<Complex64>,
    pub kernel: KernelSpec,
}

/// Real covariance of `(Re g(z_1), …, Re g(z_m), Im g(z_1), …, Im g(z_m))`.
pub fn real_covariance(spec: &KernelSpec, grid: &[Complex64]) -> Result<Vec<f64>, GafError> {
    let m = grid.len();
    let d = 2 * m;
    let mut c = vec![0.0; d * d];
    for i in 0..m {
        for j in i..m {
            let (k, p) = kernel_eval(spec, grid[i], grid[j])?;
            let aa = 0.5 * (k.re + p.re);
            let bb = 0.5 * (k.re - p.re);
            let ab = 0.5 * (p.im - k.im);
            let ba = 0.5 * (p.im + k.im);
            let mut set = |r: usize, s: usize, x: f64| {
                c[r * d + s] = x;
                c[s * d + r] = x;
            };
            set(i, j, aa);
            set(m + i, m + j, bb);
            set(i, m + j, ab);
            set(m + i, j, ba);
        }
    }
    Ok(c)
}

/// Lower-triangular factor `L` with `L L^T = C` for a symmetric positive
/// semidefinite `C`. Pivots within `±10⁻¹² · tr C` are treated as zero.
pub fn psd_cholesky(c: &[f64], d: usize) -> Result<Vec<f64>, GafError> {
    let trace: f64 = (0..d).map(|i| c[i * d + i]).sum();
    let tol = 1e-12 * trace.abs().max(f64::MIN_POSITIVE);
    let mut l = vec![0.0; d * d];
    for j in 0..d {
        let mut pivot = c[j * d + j];
        for k in 0..j {
            pivot -= l[j * d + k] * l[j * d + k];
        }
        if pivot < -tol {
            return Err(GafError::NotPsd { index: j, pivot });
        }
        if pivot <= tol {
            continue;
        }
        let ljj = pivot.sqrt();
        l[j * d + j] = ljj;
        for i in j + 1..d {
            let mut s = c[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            l[i * d + j] = s / ljj;
        }
    }
    Ok(l)
}

/// Samples the process on `grid` through the real `2m`-dimensional covariance,
/// which handles a nonzero pseudo-covariance.
pub fn sample_gaf_grid(spec: &KernelSpec, grid: &[Complex64], stream: RngStream) -> Result<GafSampleGrid, GafError> {
    let m = grid.len();
    if m > MAX_GRID {
        return Err(GafError::GridTooLarge(m));
    }
    let d = 2 * m;
    let c = real_covariance(spec, grid)?;
    let l = psd_cholesky(&c, d)?;
    let mut rng = stream.rng();
    let xi: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut y = vec![0.0; d];
    for i in 0..d {
        y[i] = (0..=i).map(|k| l[i * d + k] * xi[k]).sum();
    }
    let values = (0..m).map(|i| Complex64::new(y[i], y[m + i])).collect();
    Ok(GafSampleGrid {
        grid_points: grid.to_vec(),
        values,
        kernel: spec.clone(),
    })
}

/// Random power series with independent Gaussian coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SeriesKind {
    /// `Σ √(k+1) γ_k z^k`, kernel `K0`.
    K0Series,
    /// `Σ γ_k z^{-k}` with `E γ_k² = (E X²)^{k+1}`.
    OuterSeries { second_moment: Complex64 },
    /// `Σ √a_k γ_k z^k` with `a_k = ((1 − σ²)^{-k-1} − 1) / σ²`, kernel `K_inner`.
    InnerSeries { sigma: f64 },
}

impl SeriesKind {
    /// Variance of the `k`-th coefficient.
    pub fn coefficient_variance(&self, k: usize) -> f64 {
        match self {
            SeriesKind::K0Series => (k + 1) as f64,
            SeriesKind::OuterSeries { .. } => 1.0,
            SeriesKind::InnerSeries { sigma } => {
                let s2 = sigma * sigma;
                ((1.0 - s2).powi(-(k as i32) - 1) - 1.0) / s2
            }
        }
    }

    /// Whether the series is in powers of `1/z`.
    pub fn is_outer(&self) -> bool {
        matches!(self, SeriesKind::OuterSeries { .. })
    }

    /// Evaluates a truncated series.
    pub fn eval(&self, coeffs: &[Complex64], z: Complex64) -> Complex64 {
        let x = if self.is_outer() { z.inv() } else { z };
        coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * x + c)
    }

    /// Smallest truncation whose dropped variance `Σ_{k≥T} Var_k · ρ^{2k}` is
    /// below `tol`, where `ρ` is `radius` (inner kinds) or `1/radius` (outer).
    pub fn truncation_for(&self, radius: f64, tol: f64) -> Result<usize, GafError> {
        let rho = if self.is_outer() { 1.0 / radius } else { radius };
        let limit = match self {
            SeriesKind::InnerSeries { sigma } => (1.0 - sigma * sigma).sqrt(),
            _ => 1.0,
        };
        if !(rho < limit && rho >= 0.0) {
            return Err(GafError::InvalidArgument(format!("radius {radius} outside the convergence domain")));
        }
        let term = |k: usize| -> f64 {
            match self {
                SeriesKind::InnerSeries { sigma } => {
                    let s2 = sigma * sigma;
                    let c = 1.0 - s2;
                    ((rho * rho / c).powi(k as i32) / c - rho.powi(2 * k as i32)) / s2
                }
                _ => self.coefficient_variance(k) * rho.powi(2 * k as i32),
            }
        };
        // Terms decay geometrically; stop once they are far below `tol`.
        let mut terms = Vec::new();
        loop {
            let k = terms.len();
            let t = term(k);
            terms.push(t);
            if k > 2 && t < 1e-6 * tol {
                break;
            }
            if k > 1_000_000 {
                return Err(GafError::InvalidArgument("series converges too slowly".into()));
            }
        }
        let mut tail = 0.0;
        for t in (0..terms.len()).rev() {
            tail += terms[t];
            if tail >= tol {
                return Ok(t + 1);
            }
        }
        Ok(1)
    }
}

/// Draws the first `truncation` coefficients of the series.
pub fn sample_gaf_series(kind: SeriesKind, truncation: usize, stream: RngStream) -> Result<Vec<Complex64>, GafError> {
    if truncation == 0 {
        return Err(GafError::InvalidArgument("truncation must be at least 1".into()));
    }
    if let SeriesKind::OuterSeries { second_moment } = kind {
        if second_moment.norm() > 1.0 + 1e-12 {
            return Err(GafError::InvalidArgument(format!("|E X²| = {} exceeds 1", second_moment.norm())));
        }
    }
    if let SeriesKind::InnerSeries { sigma } = kind {
        if !(sigma > 0.0 && sigma < 1.0) {
            return Err(GafError::InvalidArgument(format!("inner series needs 0 < σ < 1, got {sigma}")));
        }
    }
    let mut rng = stream.rng();
    let mut pseudo = Complex64::new(0.0, 0.0);
    if let SeriesKind::OuterSeries { second_moment } = kind {
        pseudo = second_moment;
    }
    let mut out = Vec::with_capacity(truncation);
    for k in 0..truncation {
        let gamma = complex_normal(1.0, pseudo, &mut rng);
        out.push(gamma * kind.coefficient_variance(k).sqrt());
        if let SeriesKind::OuterSeries { second_moment } = kind {
            pseudo *= second_moment;
        }
    }
    Ok(out)
}

/// Axis-aligned rectangle used for winding numbers.
#[derive(Debug, Clone, Copy)]
struct Rect {
    x0: f64,
    y0: f64,
    wx: f64,
    wy: f64,
}

enum Winding {
    Count(i64),
    Ambiguous(Complex64),
}

const AMBIGUOUS_MODULUS: f64 = 1e-14;

fn winding_number<F: Fn(Complex64) -> Complex64>(f: &F, r: Rect) -> Winding {
    let corners = [
        Complex64::new(r.x0, r.y0),
        Complex64::new(r.x0 + r.wx, r.y0),
        Complex64::new(r.x0 + r.wx, r.y0 + r.wy),
        Complex64::new(r.x0, r.y0 + r.wy),
    ];
    let mut total = 0.0;
    for s in 0..4 {
        let (p, q) = (corners[s], corners[(s + 1) % 4]);
        let steps = 8;
        let mut prev_z = p;
        let mut prev_f = f(p);
        if prev_f.norm() < AMBIGUOUS_MODULUS {
            return Winding::Ambiguous(p);
        }
        for k in 1..=steps {
            let z = p + (q - p) * (k as f64 / steps as f64);
            let fz = f(z);
            match arg_increment(f, prev_z, prev_f, z, fz, 0) {
                Some(d) => total += d,
                None => return Winding::Ambiguous(z),
            }
            prev_z = z;
            prev_f = fz;
        }
    }
    let w = total / (2.0 * PI);
    let rounded = w.round();
    if (w - rounded).abs() > 0.2 {
        return Winding::Ambiguous(corners[0]);
    }
    Winding::Count(rounded as i64)
}

/// Change of `arg f` along the segment, refined until each step turns by less
/// than a quarter turn.
fn arg_increment<F: Fn(Complex64) -> Complex64>(f: &F, a: Complex64, fa: Complex64, b: Complex64, fb: Complex64, depth: u32) -> Option<f64> {
    if fb.norm() < AMBIGUOUS_MODULUS {
        return None;
    }
    let d = (fb / fa).arg();
    if d.abs() < PI / 4.0 {
        return Some(d);
    }
    if depth > 40 {
        return None;
    }
    let m = 0.5 * (a + b);
    let fm = f(m);
    if fm.norm() < AMBIGUOUS_MODULUS {
        return None;
    }
    Some(arg_increment(f, a, fa, m, fm, depth + 1)? + arg_increment(f, m, fm, b, fb, depth + 1)?)
}

fn derivative<F: Fn(Complex64) -> Complex64>(f: &F, z: Complex64, h: f64) -> Complex64 {
    let hr = Complex64::new(h, 0.0);
    let hi = Complex64::new(0.0, h);
    let dx = (f(z + hr) - f(z - hr)) / (2.0 * h);
    let dy = (f(z + hi) - f(z - hi)) / Complex64::new(0.0, 2.0 * h);
    0.5 * (dx + dy)
}

/// Newton iteration (multiplicity-aware) started at `z0`; returns the limit if
/// it converges within `cell` enlarged by `margin`.
fn polish<F: Fn(Complex64) -> Complex64>(f: &F, z0: Complex64, multiplicity: f64, cell: Rect, scale: f64) -> Option<Complex64> {
    let inside = |z: Complex64| {
        let m = 0.05 * cell.wx.max(cell.wy);
        z.re >= cell.x0 - m && z.re <= cell.x0 + cell.wx + m && z.im >= cell.y0 - m && z.im <= cell.y0 + cell.wy + m
    };
    let h = (1e-6 * cell.wx.max(cell.wy)).max(1e-9);
    let mut z = z0;
    for _ in 0..60 {
        let fz = f(z);
        if fz.norm() <= 1e-10 * scale && multiplicity == 1.0 {
            return inside(z).then_some(z);
        }
        let d = derivative(f, z, h);
        if d.norm() == 0.0 || !d.re.is_finite() {
            return None;
        }
        let step = fz / d * multiplicity;
        z -= step;
        if !inside(z) {
            return None;
        }
        if step.norm() <= 1e-13 * (1.0 + z.norm()) {
            return Some(z);
        }
    }
    let fz = f(z);
    (fz.norm() <= 1e-8 * scale && inside(z)).then_some(z)
}

fn boundary_scale<F: Fn(Complex64) -> Complex64>(f: &F, r: Rect) -> f64 {
    let mut s: f64 = 0.0;
    for k in 0..8 {
        let t = k as f64 / 8.0;
        for z in [
            Complex64::new(r.x0 + t * r.wx, r.y0),
            Complex64::new(r.x0 + r.wx, r.y0 + t * r.wy),
            Complex64::new(r.x0 + r.wx - t * r.wx, r.y0 + r.wy),
            Complex64::new(r.x0, r.y0 + r.wy - t * r.wy),
        ] {
            s = s.max(f(z).norm());
        }
    }
    s
}

/// Zeros of `f` in `region` (a bounded region), with multiplicity.
///
/// The bounding box is covered by square cells of side `resolution`; cells
/// with nonzero winding number are subdivided and then polished by Newton.
pub fn find_zeros<F: Fn(Complex64) -> Complex64>(f: F, region: &Region, resolution: f64) -> Result<PointSet, GafError> {
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(GafError::InvalidArgument(format!("resolution must be positive, got {resolution}")));
    }
    let (re_min, re_max, im_min, im_max) = region
        .bounding_box()
        .ok_or_else(|| GafError::InvalidArgument("zero search needs a bounded region".into()))?;
    // Shifting the grid origin is the remedy for a zero sitting on a grid line.
    let offsets = [0.0, 0.2137, 0.4391, 0.6673];
    let mut last_err = None;
    for off in offsets {
        match zeros_on_grid(&f, region, resolution, re_min - off * resolution, im_min - off * resolution, re_max, im_max) {
            Ok(z) => return Ok(z),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.expect("at least one attempt"))
}

fn zeros_on_grid<F: Fn(Complex64) -> Complex64>(
    f: &F,
    region: &Region,
    h: f64,
    x_start: f64,
    y_start: f64,
    re_max: f64,
    im_max: f64,
) -> Result<PointSet, GafError> {
    let nx = ((re_max - x_start) / h).ceil().max(1.0) as usize;
    let ny = ((im_max - y_start) / h).ceil().max(1.0) as usize;
    let reach = region.dilate(h * std::f64::consts::SQRT_2);
    let mut zeros = Vec::new();
    for iy in 0..ny {
        for ix in 0..nx {
            let rect = Rect {
                x0: x_start + ix as f64 * h,
                y0: y_start + iy as f64 * h,
                wx: h,
                wy: h,
            };
            let center = Complex64::new(rect.x0 + 0.5 * h, rect.y0 + 0.5 * h);
            if !reach.contains(center) {
                continue;
            }
            search_cell(f, rect, h, &mut zeros)?;
        }
    }
    Ok(zeros.into_iter().filter(|&z| region.contains(z)).collect())
}

fn search_cell<F: Fn(Complex64) -> Complex64>(f: &F, rect: Rect, resolution: f64, out: &mut Vec<Complex64>) -> Result<(), GafError> {
    let count = match winding_number(f, rect) {
        Winding::Count(c) => c,
        Winding::Ambiguous(near) => {
            return Err(GafError::ZeroSearch {
                near,
                side: rect.wx.max(rect.wy),
            })
        }
    };
    if count <= 0 {
        return Ok(());
    }
    let side = rect.wx.max(rect.wy);
    let center = Complex64::new(rect.x0 + 0.5 * rect.wx, rect.y0 + 0.5 * rect.wy);
    let scale = boundary_scale(f, rect);
    if count == 1 {
        if let Some(z) = polish(f, center, 1.0, rect, scale) {
            out.push(z);
            return Ok(());
        }
    } else if side < 1e-3 * resolution {
        // A cluster that does not separate under subdivision is a multiple zero.
        if let Some(z) = polish(f, center, count as f64, rect, scale) {
            out.extend(std::iter::repeat(z).take(count as usize));
            return Ok(());
        }
    }
    if side < 1e-6 {
        return Err(GafError::ZeroSearch { near: center, side });
    }
    const T: f64 = 0.5 + 0.0137;
    let ax = rect.wx * T;
    let ay = rect.wy * T;
    let before = out.len();
    for (x0, wx) in [(rect.x0, ax), (rect.x0 + ax, rect.wx - ax)] {
        for (y0, wy) in [(rect.y0, ay), (rect.y0 + ay, rect.wy - ay)] {
            let child = Rect { x0, y0, wx, wy };
            search_cell(f, child, resolution, out)?;
        }
    }
    if (out.len() - before) as i64 != count {
        return Err(GafError::ZeroSearch { near: center, side });
    }
    Ok(())
}

/// `(1/4π) Δ log K(z, z)` by the 5-point stencil with step `h`.
pub fn zero_intensity(spec: &KernelSpec, z: Complex64, h: f64) -> Result<f64, GafError> {
    if !(h > 0.0) {
        return Err(GafError::InvalidArgument(format!("step must be positive, got {h}")));
    }
    let log_k = |p: Complex64| -> Result<f64, GafError> {
        let (k, _) = kernel_eval(spec, p, p)?;
        if !(k.re > 0.0) {
            return Err(GafError::InvalidArgument(format!("K({p}, {p}) = {k} is not positive")));
        }
        Ok(k.re.ln())
    };
    let c = log_k(z)?;
    let mut s = -4.0 * c;
    for d in [Complex64::new(h, 0.0), Complex64::new(-h, 0.0), Complex64::new(0.0, h), Complex64::new(0.0, -h)] {
        s += log_k(z + d)?;
    }
    Ok(s / (h * h) / (4.0 * PI))
}

/// Expected number of zeros in the disk `B(center, radius)`: the integral of
/// [`zero_intensity`] by a polar Gauss–Legendre rule.
pub fn expected_zero_count(spec: &KernelSpec, center: Complex64, radius: f64, h: f64) -> Result<f64, GafError> {
    let radial = crate::quadrature::composite_rule(0.0, radius, 8, 16);
    let angular = 64;
    let mut total = 0.0;
    for (r, wr) in radial {
        let mut ring = 0.0;
        for k in 0..angular {
            let t = 2.0 * PI * (k as f64 + 0.5) / angular as f64;
            ring += zero_intensity(spec, center + Complex64::from_polar(r, t), h)?;
        }
        total += wr * r * ring * 2.0 * PI / angular as f64;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Role;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn spec(kind: KernelKind, radius: f64) -> KernelSpec {
        KernelSpec {
            kind,
            domain: Region::disk(c(0.0, 0.0), radius),
        }
    }

    #[test]
    fn kernel_values_at_origin() {
        let k0 = spec(KernelKind::K0, 0.9);
        assert_eq!(kernel_eval(&k0, c(0.0, 0.0), c(0.0, 0.0)).unwrap(), (c(1.0, 0.0), c(0.0, 0.0)));
        let inner = spec(KernelKind::KInner { sigma: 0.5f64.sqrt() }, 0.9);
        let (k, p) = kernel_eval(&inner, c(0.0, 0.0), c(0.0, 0.0)).unwrap();
        assert!((k - c(2.0, 0.0)).norm() < 1e-14 && p == c(0.0, 0.0));
        assert!(kernel_eval(&inner, c(0.69, 0.2), c(0.0, 0.0)).is_err());
        assert!(kernel_eval(&inner, c(1.0, 0.0), c(0.0, 0.0)).is_err());
    }

    #[test]
    fn inner_series_reproduces_kernel() {
        let sigma = 0.5f64.sqrt();
        let kind = SeriesKind::InnerSeries { sigma };
        let inner = spec(KernelKind::KInner { sigma }, 0.7);
        let (z, w) = (c(0.3, 0.2), c(-0.1, 0.4));
        let gram: Complex64 = (0..400).map(|k| kind.coefficient_variance(k) * (z * w.conj()).powu(k as u32)).sum();
        let (k, _) = kernel_eval(&inner, z, w).unwrap();
        assert!((gram - k).norm() < 1e-10);
    }

    #[test]
    fn k0_series_truncation_error() {
        let z = c(0.5, 0.0);
        let gram: f64 = (0..64).map(|k| (k + 1) as f64 * 0.25f64.powi(k)).sum();
        let (k, _) = kernel_eval(&spec(KernelKind::K0, 0.9), z, z).unwrap();
        assert!((gram - k.re).abs() < 1e-8);
        assert!(SeriesKind::K0Series.truncation_for(0.5, 1e-8).unwrap() <= 64);
    }

    #[test]
    fn zeros_of_polynomials() {
        let z = find_zeros(|z| z * z - 1.0, &Region::disk(c(0.0, 0.0), 2.0), 0.25).unwrap();
        assert_eq!(z.len(), 2);
        assert!(z.distance_to(c(1.0, 0.0)) < 1e-10 && z.distance_to(c(-1.0, 0.0)) < 1e-10);
        let triple = find_zeros(|z| (z - 0.3).powu(3), &Region::disk(c(0.0, 0.0), 1.0), 0.1).unwrap();
        assert_eq!(triple.len(), 3);
        assert!(triple.iter().all(|z| (z - 0.3).norm() < 1e-6), "{triple:?}");
        // Zero exactly on a grid line of the first attempt.
        let on_line = find_zeros(|z| z - c(0.0, 0.0), &Region::disk(c(0.0, 0.0), 1.0), 0.5).unwrap();
        assert_eq!(on_line.len(), 1);
        assert!(on_line.as_slice()[0].norm() < 1e-9, "{on_line:?}");
    }

    #[test]
    fn intensity_of_k0_at_origin() {
        let k0 = spec(KernelKind::K0, 0.9);
        let rho = zero_intensity(&k0, c(0.0, 0.0), 1e-3).unwrap();
        assert!((rho - 2.0 / PI).abs() < 1e-4);
    }

    #[test]
    fn expected_count_inner() {
        let s2: f64 = 0.5;
        let inner = spec(KernelKind::KInner { sigma: s2.sqrt() }, 0.7);
        let n = expected_zero_count(&inner, c(0.0, 0.0), 0.6, 1e-3).unwrap();
        let x = 0.36;
        let exact = x / (1.0 - x) + x / (1.0 - s2 - x);
        assert!((n - exact).abs() < 1e-3, "{n} vs {exact}");
    }

    #[test]
    fn grid_sampling_of_repeated_points() {
        let k0 = spec(KernelKind::K0, 0.9);
        let g = sample_gaf_grid(&k0, &[c(0.2, 0.1), c(0.2, 0.1)], RngStream::new(3, 0, Role::Gaf)).unwrap();
        assert!((g.values[0] - g.values[1]).norm() < 1e-8);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let c = vec![1.0, 2.0, 2.0, 1.0];
        assert!(matches!(psd_cholesky(&c, 2), Err(GafError::NotPsd { .. })));
    }
}
