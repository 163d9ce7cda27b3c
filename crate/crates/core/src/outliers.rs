//! Outlier experiments: counting and matching eigenvalues, the limit law of
//! stable outlier fluctuations, and single-trial drivers.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ensembles::{assemble_model, sample_entry_matrix, DeformationKind, DeformationSpec, EnsembleError, EntryLaw};
use crate::linalg::{eigenvalues, eigenvalues_near, smallest_singular_shifted, ComplexMatrix, LinalgError, Lu, Spectrum};
use crate::points::PointSet;
use crate::region::Region;
use crate::rng::{complex_normal, RngStream, Role};
use crate::spectral::{beta_support_test, nu_provider_for, NuProvider, SpectralError, SupportClass, DEFAULT_PROXY_ATOMS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OutlierError {
    #[error("expected {expected} points in the region, found {found}")]
    CountMismatch { expected: usize, found: usize },
    #[error("θ = {0} is not outside the support of the limiting law")]
    ThetaInSupport(Complex64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("limit law is degenerate: {0}")]
    DegenerateLaw(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Multiplicity-weighted number of points in `region`.
pub fn count_in_region(points: &PointSet, region: &Region) -> usize {
    points.iter().filter(|&&z| region.contains(z)).count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matching {
    /// `(index into the eigenvalues inside the region, index into targets)`.
    pub pairs: Vec<(usize, usize)>,
    /// Matched eigenvalues, ordered like the targets.
    pub matched: Vec<Complex64>,
    pub max_dist: f64,
}

/// Minimum-cost assignment of the eigenvalues inside `region` to `targets`.
pub fn match_outliers(eigs: &PointSet, targets: &PointSet, region: &Region) -> Result<Matching, OutlierError> {
    let inside: Vec<Complex64> = eigs.iter().copied().filter(|&z| region.contains(z)).collect();
    if inside.len() != targets.len() {
        return Err(OutlierError::CountMismatch {
            expected: targets.len(),
            found: inside.len(),
        });
    }
    let n = inside.len();
    let cost: Vec<Vec<f64>> = inside.iter().map(|e| targets.iter().map(|t| (e - t).norm()).collect()).collect();
    let assignment = hungarian(&cost);
    let mut pairs = Vec::with_capacity(n);
    let mut matched = vec![Complex64::new(0.0, 0.0); n];
    let mut max_dist: f64 = 0.0;
    for (i, &j) in assignment.iter().enumerate() {
        pairs.push((i, j));
        matched[j] = inside[i];
        max_dist = max_dist.max(cost[i][j]);
    }
    pairs.sort_by_key(|p| p.1);
    Ok(Matching { pairs, matched, max_dist })
}

/// Hungarian algorithm (potentials form) for a square cost matrix; returns the
/// column assigned to each row.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    // 1-based arrays as in the classical formulation; index 0 is a sentinel.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

/// `φ = (1/n) Tr[R R^*]` and `ψ = (1/n) Tr[R R^T]` with `R = (θ − Â)^{-1}`.
pub fn compute_phi_psi(hat: &ComplexMatrix, theta: Complex64) -> Result<(f64, Complex64), OutlierError> {
    let n = hat.ensure_square()?;
    if n == 0 {
        return Err(OutlierError::InvalidConfig("empty matrix".into()));
    }
    let gap = smallest_singular_shifted(hat, theta)?;
    if !(gap > 1e-6) {
        return Err(LinalgError::NearSingularShift { z: theta, distance: gap }.into());
    }
    let r = Lu::factor(&hat.shifted(theta).scale_real(-1.0))?.inverse();
    let mut phi = 0.0;
    let mut psi = Complex64::new(0.0, 0.0);
    for x in r.as_slice() {
        phi += x.norm_sqr();
        psi += x * x;
    }
    Ok((phi / n as f64, psi / n as f64))
}

/// Parameters of the limit matrix `V = σ X_r + σ² G`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitLawV {
    pub r: usize,
    pub sigma: f64,
    pub phi: f64,
    pub psi: Complex64,
    pub entry_second_moment: Complex64,
}

impl LimitLawV {
    /// `E|Z|² = φ / (1 − σ² φ)`.
    pub fn z_variance(&self) -> f64 {
        self.phi / (1.0 - self.sigma * self.sigma * self.phi)
    }

    /// `E Z² = (E X²)² ψ / (1 − σ² E X² ψ)`.
    pub fn z_pseudo_variance(&self) -> Complex64 {
        let m = self.entry_second_moment;
        m * m * self.psi / (Complex64::new(1.0, 0.0) - m * self.psi * (self.sigma * self.sigma))
    }

    pub fn validate(&self) -> Result<(), OutlierError> {
        let s2 = self.sigma * self.sigma;
        if self.r == 0 || !(self.sigma > 0.0) {
            return Err(OutlierError::DegenerateLaw("need r ≥ 1 and σ > 0".into()));
        }
        if (1.0 - s2 * self.phi).abs() < 1e-12 {
            return Err(OutlierError::DegenerateLaw("1 − σ²φ vanishes".into()));
        }
        if (Complex64::new(1.0, 0.0) - self.entry_second_moment * self.psi * s2).norm() < 1e-12 {
            return Err(OutlierError::DegenerateLaw("1 − σ² E X² ψ vanishes".into()));
        }
        let v = self.z_variance();
        let p = self.z_pseudo_variance();
        if !(v >= 0.0) || p.norm() > v * (1.0 + 1e-12) + 1e-15 {
            return Err(OutlierError::DegenerateLaw(format!(
                "covariance of Z is not positive semidefinite (E|Z|² = {v}, E Z² = {p})"
            )));
        }
        Ok(())
    }

    /// Draws one `Z`.
    pub fn sample_z<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex64 {
        complex_normal(self.z_variance(), self.z_pseudo_variance(), rng)
    }
}

/// One draw of the `r × r` matrix `V`.
pub fn sample_limit_v(law: &LimitLawV, entry_law: EntryLaw, stream: RngStream) -> Result<ComplexMatrix, OutlierError> {
    law.validate()?;
    let mut rng = stream.rng();
    let r = law.r;
    let s = law.sigma;
    let x = ComplexMatrix::from_fn(r, r, |_, _| entry_law.sample(&mut rng));
    let g = ComplexMatrix::from_fn(r, r, |_, _| law.sample_z(&mut rng));
    Ok(&x.scale_real(s) + &g.scale_real(s * s))
}

/// The `r` roots of `z^r = e_r^* P^{-1} V P e_1`.
pub fn jordan_limit_points(v: &ComplexMatrix, p: &ComplexMatrix) -> Result<PointSet, OutlierError> {
    let r = v.ensure_square()?;
    if p.shape() != (r, r) {
        return Err(LinalgError::DimensionMismatch {
            expected: (r, r),
            found: p.shape(),
        }
        .into());
    }
    let p_inv = Lu::factor(p)?.inverse();
    let w = &(&p_inv * v) * p;
    let s = w[(r - 1, 0)];
    Ok(rth_roots(s, r))
}

/// All `r`-th roots of `s` (`0` repeated `r` times when `s = 0`).
pub fn rth_roots(s: Complex64, r: usize) -> PointSet {
    let modulus = s.norm().powf(1.0 / r as f64);
    let arg = s.arg();
    (0..r)
        .map(|k| Complex64::from_polar(modulus, (arg + 2.0 * std::f64::consts::PI * k as f64) / r as f64))
        .collect()
}

/// How fluctuation samples are rescaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    SqrtN,
    NPow1Over2r,
}

impl Scaling {
    pub fn factor(self, n: usize, r: usize) -> f64 {
        match self {
            Scaling::SqrtN => (n as f64).sqrt(),
            Scaling::NPow1Over2r => (n as f64).powf(1.0 / (2.0 * r as f64)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluctuationSample {
    pub trial_index: u64,
    /// Number of eigenvalues found in `B(θ, δ)`.
    pub found: usize,
    pub accepted: bool,
    /// Rescaled points (empty for rejected trials).
    pub scaled_points: PointSet,
    pub scaling: Scaling,
    pub theta: Complex64,
}

/// Eigensolver used by trial drivers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EigenMethod {
    /// Shift-invert Arnoldi around the target with dense fallback.
    #[default]
    Localized,
    Dense,
}

/// Distance from `z` to the support of `β`, estimated by scanning circles
/// around `z` with the support indicator. Errors when `z` itself is not outside.
pub fn distance_to_support(provider: &dyn NuProvider, sigma: f64, z: Complex64, max_radius: f64) -> Result<f64, OutlierError> {
    if beta_support_test(provider, sigma, z)? != SupportClass::Outside {
        return Err(OutlierError::ThetaInSupport(z));
    }
    let hits = |rho: f64, m: usize| -> Result<bool, OutlierError> {
        for k in 0..m {
            let w = z + Complex64::from_polar(rho, 2.0 * std::f64::consts::PI * k as f64 / m as f64);
            if beta_support_test(provider, sigma, w)? != SupportClass::Outside {
                return Ok(true);
            }
        }
        Ok(false)
    };
    let step = 0.02;
    let mut lo = 0.0;
    let mut hi = None;
    let mut rho = step;
    while rho <= max_radius {
        if hits(rho, 128)? {
            hi = Some(rho);
            break;
        }
        lo = rho;
        rho += step;
    }
    let Some(mut hi) = hi else {
        return Ok(max_radius);
    };
    for _ in 0..20 {
        let mid = 0.5 * (lo + hi);
        if hits(mid, 256)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(lo)
}

/// Fixed inputs of a fluctuation experiment.
#[derive(Debug, Clone)]
pub struct FluctuationSetup {
    pub a: ComplexMatrix,
    pub n: usize,
    pub r: usize,
    pub theta: Complex64,
    pub delta: f64,
    pub sigma: f64,
    pub law: EntryLaw,
    pub scaling: Scaling,
    pub method: EigenMethod,
    /// `P` for Jordan blocks, identity otherwise.
    pub p: ComplexMatrix,
    pub limit: LimitLawV,
}

impl FluctuationSetup {
    /// Prepares a `theta_diag` (√N scaling) or `jordan_block` (`N^{1/(2r)}` scaling)
    /// experiment. `delta = None` selects half the distance from θ to the support.
    pub fn new(spec: &DeformationSpec, law: EntryLaw, sigma: f64, delta: Option<f64>, method: EigenMethod) -> Result<Self, OutlierError> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(OutlierError::InvalidConfig(format!("sigma must be positive, got {sigma}")));
        }
        let (theta, r, scaling, p) = match &spec.kind {
            DeformationKind::ThetaDiag { theta, r, .. } => (*theta, *r, Scaling::SqrtN, ComplexMatrix::identity(*r)),
            DeformationKind::JordanBlock { theta, r, p, .. } => (
                *theta,
                *r,
                Scaling::NPow1Over2r,
                ComplexMatrix::from_rows(p).map_err(|e| OutlierError::InvalidConfig(e.to_string()))?,
            ),
            other => {
                return Err(OutlierError::InvalidConfig(format!(
                    "fluctuation experiments need theta_diag or jordan_block, got {other:?}"
                )))
            }
        };
        let a = spec.build()?.a;
        let provider = nu_provider_for(&spec.kind, DEFAULT_PROXY_ATOMS);
        let dist = distance_to_support(provider.as_ref(), sigma, theta, 10.0 + theta.norm())?;
        let delta = match delta {
            Some(d) if d > 0.0 && d < dist => d,
            Some(d) => {
                return Err(OutlierError::InvalidConfig(format!(
                    "delta = {d} must lie in (0, {dist:.4}), the distance from θ to the support"
                )))
            }
            None => 0.5 * dist,
        };
        let hat = spec.build_hat()?.expect("split kinds carry a bulk block");
        let (phi, psi) = compute_phi_psi(&hat, theta)?;
        let limit = LimitLawV {
            r,
            sigma,
            phi,
            psi,
            entry_second_moment: law.second_moment_square(),
        };
        Ok(Self {
            a,
            n: spec.n,
            r,
            theta,
            delta,
            sigma,
            law,
            scaling,
            method,
            p,
            limit,
        })
    }

    /// Samples `M_N` for one trial and collects the rescaled eigenvalues in `B(θ, δ)`.
    pub fn trial(&self, seed: u64, trial_index: u64) -> Result<FluctuationSample, OutlierError> {
        let x = sample_entry_matrix(self.law, self.n, RngStream::new(seed, trial_index, Role::Entries));
        let m = assemble_model(&self.a, self.sigma, &x)?;
        let near = match self.method {
            EigenMethod::Localized => eigenvalues_near(&m, self.theta, self.delta)?.eigenvalues,
            EigenMethod::Dense => eigenvalues(&m)?
                .eigenvalues
                .iter()
                .copied()
                .filter(|z| (z - self.theta).norm() <= self.delta)
                .collect(),
        };
        let found = near.len();
        let accepted = found == self.r;
        let factor = self.scaling.factor(self.n, self.r);
        let scaled_points = if accepted {
            near.iter().map(|&z| (z - self.theta) * factor).collect()
        } else {
            PointSet::default()
        };
        Ok(FluctuationSample {
            trial_index,
            found,
            accepted,
            scaled_points,
            scaling: self.scaling,
            theta: self.theta,
        })
    }

    /// One reference draw from the limit: eigenvalues of `V` (√N regime) or the
    /// roots of `z^r − e_r^* P^{-1} V P e_1` (Jordan regime).
    pub fn limit_sample(&self, seed: u64, trial_index: u64) -> Result<PointSet, OutlierError> {
        let v = sample_limit_v(&self.limit, self.law, RngStream::new(seed, trial_index, Role::Limit))?;
        match self.scaling {
            Scaling::SqrtN => Ok(eigenvalues(&v)?.eigenvalues),
            Scaling::NPow1Over2r => jordan_limit_points(&v, &self.p),
        }
    }
}

/// Eigenvalues of one sample of `M_N = A + σX/√N`.
pub fn sample_model_spectrum(a: &ComplexMatrix, law: EntryLaw, sigma: f64, stream: RngStream) -> Result<Spectrum, OutlierError> {
    let x = sample_entry_matrix(law, a.n_rows(), stream);
    let m = assemble_model(a, sigma, &x)?;
    Ok(eigenvalues(&m)?)
}

/// Per-trial spread of Jordan-regime outliers: `(max|x|/min|x| − 1,
/// max |gap − 2π/r|)` with gaps between consecutive sorted arguments.
pub fn jordan_shape_metrics(points: &PointSet) -> Option<(f64, f64)> {
    let r = points.len();
    if r < 2 {
        return None;
    }
    let moduli: Vec<f64> = points.iter().map(|z| z.norm()).collect();
    let min = moduli.iter().copied().fold(f64::INFINITY, f64::min);
    let max = moduli.iter().copied().fold(0.0, f64::max);
    if !(min > 0.0) {
        return None;
    }
    let mut args: Vec<f64> = points.iter().map(|z| z.arg()).collect();
    args.sort_by(f64::total_cmp);
    let ideal = 2.0 * std::f64::consts::PI / r as f64;
    let mut dev: f64 = 0.0;
    for k in 0..r {
        let gap = if k + 1 < r {
            args[k + 1] - args[k]
        } else {
            args[0] + 2.0 * std::f64::consts::PI - args[r - 1]
        };
        dev = dev.max((gap - ideal).abs());
    }
    Some((max / min - 1.0, dev))
}
