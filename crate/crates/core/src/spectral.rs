//! Limit-measure machinery: the measures `ν_z`, Stieltjes transforms, the
//! Dozier–Silverstein fixed point for `μ_z`, the subordination maps `Φ`/`ω`,
//! the support indicator for the limiting eigenvalue law `β` and its density
//! when the deformation is normal.
//!
//! Stieltjes transforms follow `g_τ(w) = ∫ dτ(x) / (w − x)`, so `Im g ≤ 0`
//! whenever `Im w > 0`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ensembles::{roots_of_unity, DeformationKind};
use crate::linalg::{singular_values, ComplexMatrix, LinalgError};
use crate::quadrature::composite_rule;

/// Default number of atoms used to approximate analytic limit laws.
pub const DEFAULT_PROXY_ATOMS: usize = 2048;
/// Distance of `0` to `supp ν_z` below which `z` counts as inside.
pub const DELTA_S: f64 = 1e-3;
/// Relative margin on `∫ λ^{-1} dν_z` around `σ^{-2}`.
pub const DELTA_M: f64 = 1e-3;

const MAX_PICARD: usize = 10_000;
const CIRCLE_NODES: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("evaluation point {0} lies on an atom")]
    AtAtom(Complex64),
    #[error("fixed point iteration did not converge (residual {residual:e} after {iterations} iterations)")]
    NoConvergence { residual: f64, iterations: usize },
    #[error("point {x} lies in the support of the measure")]
    InSupport { x: f64 },
    #[error("quadrature did not reach the requested accuracy: {0}")]
    Quadrature(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Probability measure on `[0, ∞)` with finitely many atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralMeasure {
    atoms: Vec<(f64, f64)>,
}

impl SpectralMeasure {
    /// Validates locations (finite, non-negative) and weights (positive, summing to 1).
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self, SpectralError> {
        if atoms.is_empty() {
            return Err(SpectralError::InvalidMeasure("no atoms".into()));
        }
        let mut total = 0.0;
        for &(x, w) in &atoms {
            if !x.is_finite() || x < 0.0 {
                return Err(SpectralError::InvalidMeasure(format!("location {x} is not a finite non-negative number")));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(SpectralError::InvalidMeasure(format!("weight {w} is not positive")));
            }
            total += w;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(SpectralError::InvalidMeasure(format!("weights sum to {total}")));
        }
        Ok(Self { atoms })
    }

    /// Equal weights on the given locations.
    pub fn uniform(locations: &[f64]) -> Result<Self, SpectralError> {
        let w = 1.0 / locations.len().max(1) as f64;
        if locations.is_empty() {
            return Err(SpectralError::InvalidMeasure("no atoms".into()));
        }
        Self::new(locations.iter().map(|&x| (x.max(0.0), w)).collect())
    }

    pub fn dirac(x: f64) -> Self {
        Self { atoms: vec![(x, 1.0)] }
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn min_atom(&self) -> f64 {
        self.atoms.iter().map(|a| a.0).fold(f64::INFINITY, f64::min)
    }

    /// `∫ λ^{-1} dν`, infinite when `0` is an atom.
    pub fn inverse_moment(&self) -> f64 {
        self.atoms.iter().map(|&(x, w)| if x == 0.0 { f64::INFINITY } else { w / x }).sum()
    }

    pub fn distance_to_atoms(&self, x: f64) -> f64 {
        self.atoms.iter().map(|a| (a.0 - x).abs()).fold(f64::INFINITY, f64::min)
    }
}

/// `ν_z`: uniform atoms at the squared singular values of `A' − z`.
pub fn nu_z(a_prime: &ComplexMatrix, z: Complex64) -> Result<SpectralMeasure, SpectralError> {
    a_prime.ensure_square()?;
    let s = singular_values(&a_prime.shifted(z))?;
    let sq: Vec<f64> = s.iter().map(|x| x * x).collect();
    SpectralMeasure::uniform(&sq)
}

/// `g(w) = Σ w_i / (w − x_i)`.
pub fn stieltjes(m: &SpectralMeasure, w: Complex64) -> Result<Complex64, SpectralError> {
    let mut g = Complex64::new(0.0, 0.0);
    for &(x, weight) in m.atoms() {
        let d = w - x;
        if d.norm() <= 1e-12 {
            return Err(SpectralError::AtAtom(w));
        }
        g += weight / d;
    }
    Ok(g)
}

/// Right-hand side of the Dozier–Silverstein equation.
fn ds_map(nu: &SpectralMeasure, s2: f64, w: Complex64, g: Complex64) -> Option<Complex64> {
    let a = Complex64::new(1.0, 0.0) - g * s2;
    if a.norm() < 1e-300 {
        return None;
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for &(t, weight) in nu.atoms() {
        let den = a * w - t / a;
        if den.norm() == 0.0 {
            return None;
        }
        acc += weight / den;
    }
    Some(acc)
}

/// Damped Picard iteration at a fixed `w` from `g0`. Returns `(g, residual, iterations)`.
fn picard(nu: &SpectralMeasure, s2: f64, w: Complex64, g0: Complex64, tol: f64, budget: usize) -> (Complex64, f64, usize) {
    let mut g = g0;
    let mut damping: f64 = 1.0;
    let mut prev_res = f64::INFINITY;
    let mut res = f64::INFINITY;
    for it in 0..budget {
        let Some(fg) = ds_map(nu, s2, w, g) else {
            return (g, f64::INFINITY, it);
        };
        res = (fg - g).norm();
        if res < tol {
            return (fg, res, it + 1);
        }
        if res > prev_res {
            damping = (damping * 0.5).max(1.0 / 64.0);
        }
        prev_res = res;
        g += (fg - g) * damping;
    }
    (g, res, budget)
}

/// Solves `g = ∫ dν(t) / ((1 − σ²g)w − t/(1 − σ²g))` for `Im w > 0`, following
/// a continuation path `w + i·0.8^k` from offset 1 down to the target.
pub fn solve_dozier_silverstein(nu: &SpectralMeasure, sigma: f64, w: Complex64) -> Result<Complex64, SpectralError> {
    if !(w.im > 0.0) {
        return Err(SpectralError::InvalidArgument(format!("Im w must be positive, got {w}")));
    }
    continuation(nu, sigma, w.re, w.im)
}

/// Real-axis version for `x` outside the support of `μ_z`; errors when the
/// limit picks up an imaginary part (i.e. `x` is in the support).
pub fn solve_dozier_silverstein_real(nu: &SpectralMeasure, sigma: f64, x: f64) -> Result<f64, SpectralError> {
    let g = continuation(nu, sigma, x, 0.0)?;
    if g.im.abs() > 1e-6 * g.re.abs().max(1e-3) {
        return Err(SpectralError::InSupport { x });
    }
    Ok(g.re)
}

fn continuation(nu: &SpectralMeasure, sigma: f64, re: f64, im: f64) -> Result<Complex64, SpectralError> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(SpectralError::InvalidArgument(format!("sigma must be finite and non-negative, got {sigma}")));
    }
    let s2 = sigma * sigma;
    let start = Complex64::new(re, im + 1.0);
    let mut g = stieltjes(nu, start)?;
    let mut offset = 1.0;
    let mut used = 0usize;
    loop {
        let w = Complex64::new(re, im + offset);
        let tol = if offset == 0.0 { 1e-12 } else { 1e-9 };
        let (next, res, its) = picard(nu, s2, w, g, tol, MAX_PICARD);
        used += its;
        if !(res < 1e-10) || !next.re.is_finite() {
            if offset == 0.0 {
                return Err(SpectralError::NoConvergence { residual: res, iterations: used });
            }
            // Intermediate stages only need to be close enough to seed the next one.
            if !(res < 1e-6) {
                return Err(SpectralError::NoConvergence { residual: res, iterations: used });
            }
        }
        g = next;
        if offset == 0.0 {
            return Ok(g);
        }
        offset *= 0.8;
        if offset < 1e-9 {
            offset = 0.0;
        }
    }
}

/// `Φ_ν(x) = x (1 + σ² g_ν(x))²` for real `x` off the atoms of `ν`.
pub fn phi_map(nu: &SpectralMeasure, sigma: f64, x: f64) -> Result<f64, SpectralError> {
    if nu.distance_to_atoms(x) <= 1e-10 {
        return Err(SpectralError::AtAtom(Complex64::new(x, 0.0)));
    }
    let g: f64 = nu.atoms().iter().map(|&(t, w)| w / (x - t)).sum();
    let f = 1.0 + sigma * sigma * g;
    Ok(x * f * f)
}

/// `ω_ν(x) = x (1 − σ² g_μ(x))²` from the value of `g_μ` at `x`.
pub fn omega_map(g_mu_at_x: Complex64, sigma: f64, x: f64) -> f64 {
    let f = Complex64::new(1.0, 0.0) - g_mu_at_x * (sigma * sigma);
    (f * f * x).re
}

/// Classification of a point relative to `supp β`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportClass {
    Inside,
    Outside,
    BoundaryBand,
}

/// Source of the measures `ν_z`.
pub trait NuProvider: Send + Sync {
    fn nu(&self, z: Complex64) -> Result<SpectralMeasure, SpectralError>;

    /// `(min supp ν_z, ∫ λ^{-1} dν_z)`.
    fn support_statistics(&self, z: Complex64) -> Result<(f64, f64), SpectralError> {
        let m = self.nu(z)?;
        Ok((m.min_atom(), m.inverse_moment()))
    }
}

/// `ν_z` of a normal matrix given by its eigenvalues: atoms at `|λ_k − z|²`.
#[derive(Debug, Clone)]
pub struct NormalProvider {
    eigenvalues: Vec<Complex64>,
}

impl NormalProvider {
    pub fn new(eigenvalues: Vec<Complex64>) -> Self {
        Self { eigenvalues }
    }

    /// Roots of unity of order `n`: the proxy for a uniform law on the unit circle.
    pub fn circle(n: usize) -> Self {
        Self::new(roots_of_unity(n))
    }

    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }
}

impl NuProvider for NormalProvider {
    fn nu(&self, z: Complex64) -> Result<SpectralMeasure, SpectralError> {
        let sq: Vec<f64> = self.eigenvalues.iter().map(|l| (l - z).norm_sqr()).collect();
        SpectralMeasure::uniform(&sq)
    }

    fn support_statistics(&self, z: Complex64) -> Result<(f64, f64), SpectralError> {
        let n = self.eigenvalues.len() as f64;
        let mut min = f64::INFINITY;
        let mut inv = 0.0;
        for l in &self.eigenvalues {
            let d = (l - z).norm_sqr();
            min = min.min(d);
            inv += if d == 0.0 { f64::INFINITY } else { 1.0 / d };
        }
        Ok((min, inv / n))
    }
}

/// `ν_z` of an arbitrary dense matrix through its singular values.
#[derive(Debug, Clone)]
pub struct DenseProvider {
    a: ComplexMatrix,
}

impl DenseProvider {
    pub fn new(a: ComplexMatrix) -> Self {
        Self { a }
    }
}

impl NuProvider for DenseProvider {
    fn nu(&self, z: Complex64) -> Result<SpectralMeasure, SpectralError> {
        nu_z(&self.a, z)
    }
}

/// Adapter for closures.
pub struct FnProvider<F>(pub F);

impl<F> NuProvider for FnProvider<F>
where
    F: Fn(Complex64) -> Result<SpectralMeasure, SpectralError> + Send + Sync,
{
    fn nu(&self, z: Complex64) -> Result<SpectralMeasure, SpectralError> {
        (self.0)(z)
    }
}

/// Finite proxy for the limit of `ν_{N,z}` of a deformation family. Finite-rank
/// parts do not change the limit and are dropped; circle-like families use
/// `atoms` roots of unity.
pub fn nu_provider_for(kind: &DeformationKind, atoms: usize) -> Box<dyn NuProvider> {
    match kind {
        DeformationKind::Zero => Box::new(NormalProvider::new(vec![Complex64::new(0.0, 0.0)])),
        DeformationKind::NilpotentShift
        | DeformationKind::Cycle
        | DeformationKind::CycleMinusRankOne
        | DeformationKind::DftPair { .. }
        | DeformationKind::BlockEx1a { .. } => Box::new(NormalProvider::circle(atoms)),
        DeformationKind::ThetaDiag { hat, .. } | DeformationKind::JordanBlock { hat, .. } => nu_provider_for(hat, atoms),
        DeformationKind::Diagonal { values } => Box::new(NormalProvider::new(values.clone())),
    }
}

/// Indicator test for `z ∈ supp β` with explicit tolerance bands.
pub fn beta_support_test(provider: &dyn NuProvider, sigma: f64, z: Complex64) -> Result<SupportClass, SpectralError> {
    let (min_atom, m) = provider.support_statistics(z)?;
    let target = 1.0 / (sigma * sigma);
    if min_atom > DELTA_S && m < target * (1.0 - DELTA_M) {
        Ok(SupportClass::Outside)
    } else if min_atom <= DELTA_S || m >= target * (1.0 + DELTA_M) {
        Ok(SupportClass::Inside)
    } else {
        Ok(SupportClass::BoundaryBand)
    }
}

/// Law of `L` for normal deformations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlphaMeasure {
    Atoms { atoms: Vec<(Complex64, f64)> },
    UniformCircle { radius: f64 },
    UniformDisk { radius: f64 },
}

impl AlphaMeasure {
    pub fn validate(&self) -> Result<(), SpectralError> {
        match self {
            AlphaMeasure::Atoms { atoms } => {
                if atoms.is_empty() {
                    return Err(SpectralError::InvalidMeasure("no atoms".into()));
                }
                let total: f64 = atoms.iter().map(|a| a.1).sum();
                if atoms.iter().any(|a| !(a.1 > 0.0)) || (total - 1.0).abs() > 1e-12 {
                    return Err(SpectralError::InvalidMeasure(format!("weights must be positive and sum to 1 (sum {total})")));
                }
                Ok(())
            }
            AlphaMeasure::UniformCircle { radius } | AlphaMeasure::UniformDisk { radius } => {
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(SpectralError::InvalidMeasure(format!("radius {radius}")));
                }
                Ok(())
            }
        }
    }

    /// `E h(|L − z|²)` together with `E (L − z) k(|L − z|²)`, evaluated by the
    /// quadrature matched to the law.
    fn moments(&self, z: Complex64, h: &dyn Fn(f64) -> f64, k: &dyn Fn(f64) -> f64) -> Result<(f64, Complex64), SpectralError> {
        match self {
            AlphaMeasure::Atoms { atoms } => {
                let mut eh = 0.0;
                let mut ek = Complex64::new(0.0, 0.0);
                for &(l, w) in atoms {
                    let d = l - z;
                    let r2 = d.norm_sqr();
                    eh += w * h(r2);
                    ek += d * (w * k(r2));
                }
                Ok((eh, ek))
            }
            AlphaMeasure::UniformCircle { radius } => {
                let mut eh = 0.0;
                let mut ek = Complex64::new(0.0, 0.0);
                let w = 1.0 / CIRCLE_NODES as f64;
                for j in 0..CIRCLE_NODES {
                    let l = Complex64::from_polar(*radius, 2.0 * PI * j as f64 / CIRCLE_NODES as f64);
                    let d = l - z;
                    let r2 = d.norm_sqr();
                    eh += w * h(r2);
                    ek += d * (w * k(r2));
                }
                Ok((eh, ek))
            }
            AlphaMeasure::UniformDisk { radius } => disk_moments(*radius, z, h, k),
        }
    }

    /// `E |L − z|^{-2}` (infinite when `z` sits on the support of an absolutely
    /// continuous law where the integral diverges).
    pub fn inverse_square_distance(&self, z: Complex64) -> Result<f64, SpectralError> {
        match self {
            AlphaMeasure::UniformCircle { radius } => {
                // E|L − z|^{-2} = 1 / | |z|² − R² | in closed form.
                let d = (z.norm_sqr() - radius * radius).abs();
                Ok(if d == 0.0 { f64::INFINITY } else { 1.0 / d })
            }
            AlphaMeasure::UniformDisk { radius } => {
                if z.norm() <= *radius {
                    Ok(f64::INFINITY)
                } else {
                    // Mean of 1/|L − z|² over the disk, from the radial circle average.
                    let r2 = radius * radius;
                    let z2 = z.norm_sqr();
                    Ok((z2 / (z2 - r2)).ln() / r2)
                }
            }
            AlphaMeasure::Atoms { .. } => {
                let (eh, _) = self.moments(z, &|r2| if r2 == 0.0 { f64::INFINITY } else { 1.0 / r2 }, &|_| 0.0)?;
                Ok(eh)
            }
        }
    }
}

fn disk_moments(radius: f64, z: Complex64, h: &dyn Fn(f64) -> f64, k: &dyn Fn(f64) -> f64) -> Result<(f64, Complex64), SpectralError> {
    let eval = |panels: usize, angles: usize| -> (f64, Complex64) {
        // Split the radial range at |z| where the integrand has a kink.
        let rz = z.norm();
        let mut pieces = vec![(0.0, radius)];
        if rz > 0.0 && rz < radius {
            pieces = vec![(0.0, rz), (rz, radius)];
        }
        let norm = 1.0 / (PI * radius * radius);
        let dtheta = 2.0 * PI / angles as f64;
        let mut eh = 0.0;
        let mut ek = Complex64::new(0.0, 0.0);
        for (a, b) in pieces {
            for (r, wr) in composite_rule(a, b, panels, 8) {
                for j in 0..angles {
                    let l = Complex64::from_polar(r, dtheta * (j as f64 + 0.5));
                    let d = l - z;
                    let r2 = d.norm_sqr();
                    let wt = norm * wr * r * dtheta;
                    eh += wt * h(r2);
                    ek += d * (wt * k(r2));
                }
            }
        }
        (eh, ek)
    };
    let (mut panels, mut angles) = (4usize, 128usize);
    let mut prev = eval(panels, angles);
    for _ in 0..6 {
        panels *= 2;
        angles *= 2;
        let cur = eval(panels, angles);
        let scale = cur.0.abs() + cur.1.norm() + 1e-300;
        if (cur.0 - prev.0).abs() + (cur.1 - prev.1).norm() <= 1e-9 * scale {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(SpectralError::Quadrature(format!("disk quadrature at z = {z} did not settle")))
}

/// `f(z) ≥ 0` solving `E 1/(|L − z|² + f²) = σ^{-2}` on `Σ`, and `0` off `Σ`.
pub fn solve_f(alpha: &AlphaMeasure, sigma: f64, z: Complex64) -> Result<f64, SpectralError> {
    alpha.validate()?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(SpectralError::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    let target = 1.0 / (sigma * sigma);
    if alpha.inverse_square_distance(z)? <= target {
        return Ok(0.0);
    }
    let lhs = |s: f64| -> Result<f64, SpectralError> { Ok(alpha.moments(z, &|r2| 1.0 / (r2 + s), &|_| 0.0)?.0) };
    // lhs is decreasing in s = f² and lhs(σ²) ≤ σ^{-2}.
    let (mut lo, mut hi) = (0.0, sigma * sigma);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let v = lhs(mid)?;
        if v > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if (v - target).abs() < 1e-12 * target && hi - lo < 1e-15 * sigma * sigma {
            break;
        }
    }
    let s = 0.5 * (lo + hi);
    let res = (lhs(s)? - target).abs();
    if !(res < 1e-10 * target.max(1.0)) {
        return Err(SpectralError::NoConvergence { residual: res, iterations: 200 });
    }
    Ok(s.sqrt())
}

/// Density of `β` for a normal deformation with spectral law `α`:
/// `ρ = (1/π) f² E Φ + (1/π) |E (L − z) Φ|² / E Φ`, `Φ = (|L − z|² + f²)^{-2}`.
pub fn beta_density(alpha: &AlphaMeasure, sigma: f64, z: Complex64) -> Result<f64, SpectralError> {
    let f = solve_f(alpha, sigma, z)?;
    if f == 0.0 {
        return Ok(0.0);
    }
    let f2 = f * f;
    let phi = |r2: f64| 1.0 / ((r2 + f2) * (r2 + f2));
    let (e_phi, e_lphi) = alpha.moments(z, &phi, &phi)?;
    Ok((f2 * e_phi + e_lphi.norm_sqr() / e_phi) / PI)
}
