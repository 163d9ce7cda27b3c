//! Entry laws for the i.i.d. matrix and the deterministic deformations `A_N`.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{singular_values, ComplexMatrix, LinalgError};
use crate::rng::RngStream;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnsembleError {
    #[error("invalid deformation: {0}")]
    InvalidDeformation(String),
    #[error("matrix P is not invertible (smallest singular value {smallest:e}, norm {norm:e})")]
    SingularP { smallest: f64, norm: f64 },
    #[error("sigma must be positive and finite, got {0}")]
    InvalidSigma(f64),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Distribution of the entries of `X_N`. All kinds are centered with unit variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryLaw {
    /// `(g1 + i g2)/√2` with independent standard normals.
    ComplexGaussian,
    RealGaussian,
    /// `±1` with equal probability.
    Rademacher,
    /// `(±1 ± i)/√2`.
    ComplexRademacher,
    /// Uniform on `[-√3, √3]`.
    UniformPm,
}

impl EntryLaw {
    pub const ALL: [EntryLaw; 5] = [
        EntryLaw::ComplexGaussian,
        EntryLaw::RealGaussian,
        EntryLaw::Rademacher,
        EntryLaw::ComplexRademacher,
        EntryLaw::UniformPm,
    ];

    /// `E X²`.
    pub fn second_moment_square(self) -> Complex64 {
        match self {
            EntryLaw::ComplexGaussian | EntryLaw::ComplexRademacher => Complex64::new(0.0, 0.0),
            _ => Complex64::new(1.0, 0.0),
        }
    }

    /// `E |X|⁴`.
    pub fn fourth_abs_moment(self) -> f64 {
        match self {
            EntryLaw::ComplexGaussian => 2.0,
            EntryLaw::RealGaussian => 3.0,
            EntryLaw::Rademacher | EntryLaw::ComplexRademacher => 1.0,
            EntryLaw::UniformPm => 9.0 / 5.0,
        }
    }

    pub fn is_real(self) -> bool {
        matches!(self, EntryLaw::RealGaussian | EntryLaw::Rademacher | EntryLaw::UniformPm)
    }

    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> Complex64 {
        match self {
            EntryLaw::ComplexGaussian => {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                Complex64::new(re / SQRT_2, im / SQRT_2)
            }
            EntryLaw::RealGaussian => Complex64::new(StandardNormal.sample(rng), 0.0),
            EntryLaw::Rademacher => Complex64::new(if rng.gen::<bool>() { 1.0 } else { -1.0 }, 0.0),
            EntryLaw::ComplexRademacher => {
                let re = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                let im = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                Complex64::new(re / SQRT_2, im / SQRT_2)
            }
            EntryLaw::UniformPm => {
                let s = 3f64.sqrt();
                Complex64::new(rng.gen_range(-s..=s), 0.0)
            }
        }
    }
}

/// `n × n` matrix of i.i.d. draws from `law` (unscaled).
pub fn sample_entry_matrix(law: EntryLaw, n: usize, stream: RngStream) -> ComplexMatrix {
    let mut rng = stream.rng();
    ComplexMatrix::from_fn(n, n, |_, _| law.sample(&mut rng))
}

/// `A + (σ/√N) X`.
pub fn assemble_model(a: &ComplexMatrix, sigma: f64, x: &ComplexMatrix) -> Result<ComplexMatrix, EnsembleError> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(EnsembleError::InvalidSigma(sigma));
    }
    let n = a.ensure_square()?;
    if x.shape() != a.shape() {
        return Err(LinalgError::DimensionMismatch {
            expected: a.shape(),
            found: x.shape(),
        }
        .into());
    }
    let scale = sigma / (n as f64).sqrt();
    let mut m = a.clone();
    for (mi, xi) in m.as_mut_slice().iter_mut().zip(x.as_slice()) {
        *mi += xi * scale;
    }
    Ok(m)
}

fn default_block_anchor() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

fn default_split_anchor() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// Shape of the deterministic deformation; the dimension is supplied separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DeformationKind {
    Zero,
    /// Ones on the superdiagonal.
    NilpotentShift,
    /// Cyclic permutation `Σ e_i e_{i+1}^* + e_N e_1^*`.
    Cycle,
    /// The nilpotent shift written as cycle plus the rank-one correction `-e_N e_1^*`.
    CycleMinusRankOne,
    /// `diag(B, C)` with `C` the cycle on the last `N - r` coordinates.
    /// The split uses `A' = diag(anchor·I_r, C)`.
    BlockEx1a {
        b: Vec<Vec<Complex64>>,
        r: usize,
        #[serde(default = "default_block_anchor")]
        anchor: Complex64,
    },
    /// `θ I_r ⊕ Â`.
    ThetaDiag {
        theta: Complex64,
        r: usize,
        hat: Box<DeformationKind>,
        #[serde(default = "default_split_anchor")]
        anchor: Complex64,
    },
    /// `P J_θ P^{-1} ⊕ Â` with `J_θ` the `r × r` Jordan block.
    JordanBlock {
        theta: Complex64,
        r: usize,
        p: Vec<Vec<Complex64>>,
        hat: Box<DeformationKind>,
        #[serde(default = "default_split_anchor")]
        anchor: Complex64,
    },
    Diagonal {
        values: Vec<Complex64>,
    },
    /// `diag(ω_1, …, ω_N) - scale · f_N f_1^T` with `(f_ℓ)_k = ω_ℓ^k / √N`.
    DftPair {
        scale: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeformationSpec {
    pub kind: DeformationKind,
    pub n: usize,
}

/// Low-rank split `A = A' + P Q`.
#[derive(Debug, Clone)]
pub struct Split {
    pub a_prime: ComplexMatrix,
    /// `N × r`.
    pub p: ComplexMatrix,
    /// `r × N`.
    pub q: ComplexMatrix,
}

impl Split {
    pub fn rank(&self) -> usize {
        self.p.n_cols()
    }

    pub fn reassemble(&self) -> ComplexMatrix {
        &self.a_prime + &(&self.p * &self.q)
    }
}

#[derive(Debug, Clone)]
pub struct Deformation {
    pub a: ComplexMatrix,
    pub split: Option<Split>,
}

/// `ω_ℓ = e^{2πiℓ/N}`, `ℓ = 1..N`.
pub fn roots_of_unity(n: usize) -> Vec<Complex64> {
    (1..=n).map(|l| Complex64::from_polar(1.0, 2.0 * PI * l as f64 / n as f64)).collect()
}

/// Fourier vector `(f_ℓ)_k = ω_ℓ^k / √N`, `k = 1..N`.
pub fn fourier_vector(n: usize, l: usize) -> Vec<Complex64> {
    let s = 1.0 / (n as f64).sqrt();
    (1..=n)
        .map(|k| Complex64::from_polar(s, 2.0 * PI * ((l * k) % n) as f64 / n as f64))
        .collect()
}

fn cycle_matrix(n: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, n, |i, j| {
        if (i + 1) % n == j {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

fn small_matrix(rows: &[Vec<Complex64>], r: usize, name: &str) -> Result<ComplexMatrix, EnsembleError> {
    let m = ComplexMatrix::from_rows(rows).map_err(|_| EnsembleError::InvalidDeformation(format!("{name} rows have unequal length")))?;
    if m.shape() != (r, r) {
        return Err(EnsembleError::InvalidDeformation(format!(
            "{name} must be {r}x{r}, got {}x{}",
            m.n_rows(),
            m.n_cols()
        )));
    }
    m.ensure_finite()?;
    Ok(m)
}

/// `Â_r = P J P^{-1}` after checking invertibility of `P`.
pub fn jordan_part(theta: Complex64, p: &ComplexMatrix) -> Result<ComplexMatrix, EnsembleError> {
    let r = p.ensure_square()?;
    let s = singular_values(p)?;
    let norm = s.first().copied().unwrap_or(0.0);
    let smallest = s.last().copied().unwrap_or(0.0);
    if !(smallest > 1e-10 * norm) {
        return Err(EnsembleError::SingularP { smallest, norm });
    }
    let j = ComplexMatrix::from_fn(r, r, |i, k| {
        if i == k {
            theta
        } else if k == i + 1 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let p_inv = crate::linalg::Lu::factor(p)?.inverse();
    Ok(&(p * &j) * &p_inv)
}

impl DeformationKind {
    /// Size of the finite-rank block, if any.
    pub fn rank(&self) -> Option<usize> {
        match self {
            DeformationKind::CycleMinusRankOne | DeformationKind::DftPair { .. } => Some(1),
            DeformationKind::BlockEx1a { r, .. } | DeformationKind::ThetaDiag { r, .. } | DeformationKind::JordanBlock { r, .. } => Some(*r),
            _ => None,
        }
    }

    /// The bulk part `Â` for kinds of the form `(r × r block) ⊕ Â`.
    pub fn hat(&self) -> Option<&DeformationKind> {
        match self {
            DeformationKind::ThetaDiag { hat, .. } | DeformationKind::JordanBlock { hat, .. } => Some(hat),
            _ => None,
        }
    }

    /// Declared operator-norm bound for the built matrix.
    pub fn norm_bound(&self) -> f64 {
        match self {
            DeformationKind::Zero => 0.0,
            DeformationKind::NilpotentShift | DeformationKind::Cycle | DeformationKind::CycleMinusRankOne => 1.0,
            DeformationKind::BlockEx1a { b, .. } => frobenius(b).max(1.0),
            DeformationKind::ThetaDiag { theta, hat, .. } => theta.norm().max(hat.norm_bound()),
            DeformationKind::JordanBlock { theta, p, hat, .. } => {
                // ‖P J P^{-1}‖ ≤ κ(P) (|θ| + 1); κ bounded through Frobenius norms.
                let pm = ComplexMatrix::from_rows(p).ok();
                let kappa = pm
                    .as_ref()
                    .and_then(|m| crate::linalg::Lu::factor(m).ok().map(|lu| m.frobenius_norm() * lu.inverse().frobenius_norm()))
                    .unwrap_or(f64::INFINITY);
                (kappa * (theta.norm() + 1.0)).max(hat.norm_bound())
            }
            DeformationKind::Diagonal { values } => values.iter().map(|v| v.norm()).fold(0.0, f64::max),
            DeformationKind::DftPair { scale } => 1.0 + scale.abs(),
        }
    }

    pub fn build(&self, n: usize) -> Result<Deformation, EnsembleError> {
        DeformationSpec { kind: self.clone(), n }.build()
    }
}

fn frobenius(rows: &[Vec<Complex64>]) -> f64 {
    rows.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

impl DeformationSpec {
    pub fn new(kind: DeformationKind, n: usize) -> Self {
        Self { kind, n }
    }

    /// Builds `A` and, for split kinds, the factors of `A = A' + PQ`.
    pub fn build(&self) -> Result<Deformation, EnsembleError> {
        let n = self.n;
        if n == 0 {
            return Err(EnsembleError::InvalidDeformation("dimension must be at least 1".into()));
        }
        let zero = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        match &self.kind {
            DeformationKind::Zero => Ok(Deformation {
                a: ComplexMatrix::zeros(n, n),
                split: None,
            }),
            DeformationKind::NilpotentShift => Ok(Deformation {
                a: ComplexMatrix::from_fn(n, n, |i, j| if j == i + 1 { one } else { zero }),
                split: None,
            }),
            DeformationKind::Cycle => Ok(Deformation {
                a: cycle_matrix(n),
                split: None,
            }),
            DeformationKind::CycleMinusRankOne => {
                let a_prime = cycle_matrix(n);
                let mut p = ComplexMatrix::zeros(n, 1);
                p[(n - 1, 0)] = -one;
                let mut q = ComplexMatrix::zeros(1, n);
                q[(0, 0)] = one;
                let split = Split { a_prime, p, q };
                Ok(Deformation {
                    a: split.reassemble(),
                    split: Some(split),
                })
            }
            DeformationKind::BlockEx1a { b, r, anchor } => {
                let r = *r;
                self.check_rank(r)?;
                let bm = small_matrix(b, r, "B")?;
                let c = cycle_matrix(n - r);
                let mut a = ComplexMatrix::zeros(n, n);
                a.set_block(0, 0, &bm);
                a.set_block(r, r, &c);
                let mut a_prime = ComplexMatrix::zeros(n, n);
                a_prime.set_block(0, 0, &ComplexMatrix::identity(r).scale(*anchor));
                a_prime.set_block(r, r, &c);
                let (p, q) = block_factors(n, &bm.shifted(*anchor));
                Ok(Deformation {
                    a,
                    split: Some(Split { a_prime, p, q }),
                })
            }
            DeformationKind::ThetaDiag { theta, r, hat, anchor } => {
                let r = *r;
                self.check_rank(r)?;
                let block = ComplexMatrix::identity(r).scale(*theta);
                self.block_plus_hat(&block, hat, *anchor)
            }
            DeformationKind::JordanBlock { theta, r, p, hat, anchor } => {
                let r = *r;
                self.check_rank(r)?;
                let pm = small_matrix(p, r, "P")?;
                let block = jordan_part(*theta, &pm)?;
                self.block_plus_hat(&block, hat, *anchor)
            }
            DeformationKind::Diagonal { values } => {
                if values.len() != n {
                    return Err(EnsembleError::InvalidDeformation(format!(
                        "diagonal has {} values for dimension {n}",
                        values.len()
                    )));
                }
                if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
                    return Err(LinalgError::NonFinite.into());
                }
                Ok(Deformation {
                    a: ComplexMatrix::from_diagonal(values),
                    split: None,
                })
            }
            DeformationKind::DftPair { scale } => {
                if !scale.is_finite() {
                    return Err(LinalgError::NonFinite.into());
                }
                let a_prime = ComplexMatrix::from_diagonal(&roots_of_unity(n));
                let f_n = fourier_vector(n, n);
                let f_1 = fourier_vector(n, 1);
                let p = ComplexMatrix::column(&f_n.iter().map(|x| x * -scale).collect::<Vec<_>>());
                let q = ComplexMatrix::row(&f_1);
                let split = Split { a_prime, p, q };
                Ok(Deformation {
                    a: split.reassemble(),
                    split: Some(split),
                })
            }
        }
    }

    /// The `(N - r) × (N - r)` bulk matrix `Â` for kinds that have one.
    pub fn build_hat(&self) -> Result<Option<ComplexMatrix>, EnsembleError> {
        match (&self.kind, self.kind.rank()) {
            (DeformationKind::ThetaDiag { hat, .. } | DeformationKind::JordanBlock { hat, .. }, Some(r)) => {
                self.check_rank(r)?;
                Ok(Some(hat.build(self.n - r)?.a))
            }
            _ => Ok(None),
        }
    }

    fn check_rank(&self, r: usize) -> Result<(), EnsembleError> {
        if r == 0 || 2 * r > self.n {
            return Err(EnsembleError::InvalidDeformation(format!(
                "block size r = {r} requires 1 ≤ r and 2r ≤ n = {}",
                self.n
            )));
        }
        Ok(())
    }

    fn block_plus_hat(&self, block: &ComplexMatrix, hat: &DeformationKind, anchor: Complex64) -> Result<Deformation, EnsembleError> {
        let n = self.n;
        let r = block.n_rows();
        let hat_m = hat.build(n - r)?.a;
        let mut a = ComplexMatrix::zeros(n, n);
        a.set_block(0, 0, block);
        a.set_block(r, r, &hat_m);
        let mut a_prime = ComplexMatrix::zeros(n, n);
        a_prime.set_block(0, 0, &ComplexMatrix::identity(r).scale(anchor));
        a_prime.set_block(r, r, &hat_m);
        let (p, q) = block_factors(n, &block.shifted(anchor));
        Ok(Deformation {
            a,
            split: Some(Split { a_prime, p, q }),
        })
    }
}

/// `P = [I_r; 0]`, `Q = [D, 0]`.
fn block_factors(n: usize, d: &ComplexMatrix) -> (ComplexMatrix, ComplexMatrix) {
    let r = d.n_rows();
    let mut p = ComplexMatrix::zeros(n, r);
    p.set_block(0, 0, &ComplexMatrix::identity(r));
    let mut q = ComplexMatrix::zeros(r, n);
    q.set_block(0, 0, d);
    (p, q)
}
