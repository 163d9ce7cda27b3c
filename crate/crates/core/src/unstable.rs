//! Rank-one perturbations of a diagonal matrix that produce unstable outliers,
//! and the deterministic quantities that decide stability.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ensembles::Split;
use crate::linalg::{resolvent_bilinear, LinalgError, Operator};
use crate::quadrature::integrate;

/// Tolerance on `∫ f d(law of |λ|) = 1`.
pub const NORMALIZATION_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UnstableError {
    #[error("weight function is not normalized: integral = {integral}")]
    Normalization { integral: f64 },
    #[error("invalid recipe: {0}")]
    InvalidRecipe(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Radial law of the diagonal of `A'`, supported on `a ≤ |λ| ≤ b` with `a > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RadialLaw {
    /// Uniform on the circle `|λ| = radius`.
    Circle { radius: f64 },
    /// Uniform (area measure) on `r_in ≤ |λ| ≤ r_out`.
    Annulus { r_in: f64, r_out: f64 },
}

impl RadialLaw {
    pub fn inner_radius(&self) -> f64 {
        match self {
            RadialLaw::Circle { radius } => *radius,
            RadialLaw::Annulus { r_in, .. } => *r_in,
        }
    }

    fn validate(&self) -> Result<(), UnstableError> {
        let ok = match self {
            RadialLaw::Circle { radius } => *radius > 0.0 && radius.is_finite(),
            RadialLaw::Annulus { r_in, r_out } => *r_in > 0.0 && r_in < r_out && r_out.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(UnstableError::InvalidRecipe(format!("radial law {self:?} needs 0 < a ≤ b < ∞")))
        }
    }

    /// `∫ g(|λ|) dα(λ)`.
    pub fn integrate_radial(&self, g: impl Fn(f64) -> f64) -> f64 {
        match self {
            RadialLaw::Circle { radius } => g(*radius),
            RadialLaw::Annulus { r_in, r_out } => {
                let norm = r_out * r_out - r_in * r_in;
                integrate(|r| g(r) * 2.0 * r / norm, *r_in, *r_out, 16, 16)
            }
        }
    }

    /// Radius at quantile `q ∈ (0, 1)` of the law of `|λ|`.
    fn radius_quantile(&self, q: f64) -> f64 {
        match self {
            RadialLaw::Circle { radius } => *radius,
            RadialLaw::Annulus { r_in, r_out } => (r_in * r_in + q * (r_out * r_out - r_in * r_in)).sqrt(),
        }
    }
}

/// Weight `f` in `ω(λ) = −λ f(|λ|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightFn {
    Constant { value: f64 },
    /// `coef · r^exponent`.
    Power { coef: f64, exponent: f64 },
}

impl WeightFn {
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            WeightFn::Constant { value } => *value,
            WeightFn::Power { coef, exponent } => coef * r.powf(*exponent),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecipeSpec {
    pub alpha: RadialLaw,
    pub weight: WeightFn,
    pub n: usize,
}

/// `A' = diag(a_prime)` and `A'' = v u^*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnstablePerturbation {
    pub a_prime: Vec<Complex64>,
    pub u: Vec<Complex64>,
    pub v: Vec<Complex64>,
}

impl UnstablePerturbation {
    /// `w_k = N ū_k v_k`.
    pub fn weights(&self) -> Vec<Complex64> {
        let n = self.a_prime.len() as f64;
        self.u.iter().zip(&self.v).map(|(u, v)| u.conj() * v * n).collect()
    }

    /// Dense `A = A' + v u^*`.
    pub fn matrix(&self) -> crate::linalg::ComplexMatrix {
        let n = self.a_prime.len();
        crate::linalg::ComplexMatrix::from_fn(n, n, |i, j| {
            let d = if i == j { self.a_prime[i] } else { Complex64::new(0.0, 0.0) };
            d + self.v[i] * self.u[j].conj()
        })
    }
}

/// `∫ f(|λ|) dα(λ)`, which must equal 1.
pub fn weight_normalization(recipe: &RecipeSpec) -> f64 {
    recipe.alpha.integrate_radial(|r| recipe.weight.eval(r))
}

/// Deterministic quantile placement of `A'` and the split `ū_k v_k = w_k / N`
/// with `w_k = −λ_k f(|λ_k|)`; `u` carries the modulus, `v` the phase.
pub fn build_unstable_perturbation(recipe: &RecipeSpec) -> Result<UnstablePerturbation, UnstableError> {
    recipe.alpha.validate()?;
    let n = recipe.n;
    if n == 0 {
        return Err(UnstableError::InvalidRecipe("n must be positive".into()));
    }
    let integral = weight_normalization(recipe);
    if !((integral - 1.0).abs() <= NORMALIZATION_TOL) {
        return Err(UnstableError::Normalization { integral });
    }
    let golden = (5f64.sqrt() - 1.0) / 2.0;
    let a_prime: Vec<Complex64> = (1..=n)
        .map(|k| match recipe.alpha {
            RadialLaw::Circle { radius } => Complex64::from_polar(radius, 2.0 * PI * k as f64 / n as f64),
            RadialLaw::Annulus { .. } => {
                let r = recipe.alpha.radius_quantile((k as f64 - 0.5) / n as f64);
                Complex64::from_polar(r, 2.0 * PI * (k as f64 * golden).fract())
            }
        })
        .collect();
    let nf = n as f64;
    let mut u = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    for lambda in &a_prime {
        let w = -lambda * recipe.weight.eval(lambda.norm());
        let m = (w.norm() / nf).sqrt();
        u.push(Complex64::new(m, 0.0));
        v.push(Complex64::from_polar(m, w.arg()));
    }
    Ok(UnstablePerturbation { a_prime, u, v })
}

/// `ε_N(z) = 1 − u^* R'(z) v` with `R'(z) = (z − A')^{-1}` and `A'` diagonal.
pub fn epsilon_n(a_prime: &[Complex64], u: &[Complex64], v: &[Complex64], z: Complex64) -> Result<Complex64, UnstableError> {
    Ok(Complex64::new(1.0, 0.0) - resolvent_bilinear(u, Operator::Diagonal(a_prime), z, v)?)
}

/// Deterministic part `1 − √N u^* R'(z) v` of the limit function when
/// `A'' = √N v u^*`.
pub fn largenorm_predictor(a_prime: &[Complex64], u: &[Complex64], v: &[Complex64], z: Complex64) -> Result<Complex64, UnstableError> {
    let n = a_prime.len() as f64;
    Ok(Complex64::new(1.0, 0.0) - resolvent_bilinear(u, Operator::Diagonal(a_prime), z, v)? * n.sqrt())
}

/// `(A' diagonal, u, v)` with `A'' = v u^*` for a rank-one split whose `A'` is
/// diagonal.
pub fn rank_one_vectors(split: &Split) -> Option<(Vec<Complex64>, Vec<Complex64>, Vec<Complex64>)> {
    if split.rank() != 1 {
        return None;
    }
    let n = split.a_prime.n_rows();
    for i in 0..n {
        for j in 0..n {
            if i != j && split.a_prime[(i, j)].norm() != 0.0 {
                return None;
            }
        }
    }
    let diag = split.a_prime.diagonal();
    let v = (0..n).map(|i| split.p[(i, 0)]).collect();
    let u = (0..n).map(|j| split.q[(0, j)].conj()).collect();
    Some((diag, u, v))
}
