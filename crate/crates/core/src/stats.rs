//! Two-sample tests, point-process comparison and Monte Carlo checks of the
//! bilinear-form and trace limits behind the fluctuation analyses.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ensembles::{sample_entry_matrix, EntryLaw};
use crate::linalg::{ComplexMatrix, LinalgError, Operator};
use crate::points::PointSet;
use crate::region::Region;
use crate::rng::{RngStream, Role};

/// Asymptotic Kolmogorov critical value `c(α)` at `α = 0.01`.
pub const KS_CRITICAL_001: f64 = 1.6276;
/// Minimum sample size per side for [`ks_two_sample`].
pub const KS_MIN_SAMPLES: usize = 30;
/// Minimum number of trials per side for [`point_process_distance`].
pub const PP_MIN_TRIALS: usize = 100;

/// Constant of the moment bound `C k⁴ ((1/N) tr BB^*)^k`, calibrated on
/// `B = I`, `u = v = 𝟙/√N` and frozen.
pub const MOMENT_BOUND_C: f64 = 4.0;
/// Constant `M` in the moment-bound preconditions.
pub const MOMENT_BOUND_M: f64 = 8.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("need at least {min} samples, got {found}")]
    TooFewSamples { min: usize, found: usize },
    #[error("sample contains a non-finite value")]
    NonFinite,
    #[error("partition is empty")]
    EmptyPartition,
    #[error("malformed word: {0}")]
    MalformedWord(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl MeanEstimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                std_error: f64::NAN,
                samples: 0,
            };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            mean,
            std_error: (var / n as f64).sqrt(),
            samples: n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    /// Rejection threshold at level 0.01.
    pub threshold: f64,
    /// Asymptotic p-value.
    pub p_value: f64,
    pub accept: bool,
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    // The alternating series converges slowly near 0, where the value is 1 to
    // double precision anyway.
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Classical two-sample Kolmogorov–Smirnov test at level 0.01.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult, StatsError> {
    for s in [a, b] {
        if s.len() < KS_MIN_SAMPLES {
            return Err(StatsError::TooFewSamples {
                min: KS_MIN_SAMPLES,
                found: s.len(),
            });
        }
        if s.iter().any(|x| !x.is_finite()) {
            return Err(StatsError::NonFinite);
        }
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let scale = ((n * m) as f64 / (n + m) as f64).sqrt();
    let threshold = KS_CRITICAL_001 / scale;
    Ok(KsResult {
        statistic: d,
        threshold,
        p_value: kolmogorov_sf(d * scale),
        accept: d <= threshold,
    })
}

/// Counts of each trial's points in each cell of a partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountVectorSample {
    pub partition: Vec<Region>,
    pub counts: Vec<Vec<usize>>,
}

impl CountVectorSample {
    pub fn new(trials: &[PointSet], partition: &[Region]) -> Self {
        let counts = trials
            .iter()
            .map(|pts| partition.iter().map(|cell| pts.iter().filter(|&&z| cell.contains(z)).count()).collect())
            .collect();
        Self {
            partition: partition.to_vec(),
            counts,
        }
    }

    pub fn cell(&self, c: usize) -> Vec<usize> {
        self.counts.iter().map(|row| row[c]).collect()
    }

    pub fn totals(&self) -> Vec<usize> {
        self.counts.iter().map(|row| row.iter().sum()).collect()
    }

    /// Mean total count with its standard error.
    pub fn mean_total(&self) -> MeanEstimate {
        MeanEstimate::from_samples(&self.totals().iter().map(|&c| c as f64).collect::<Vec<_>>())
    }
}

fn count_cdf_gaps(a: &[usize], b: &[usize]) -> Vec<f64> {
    let top = a.iter().chain(b).copied().max().unwrap_or(0);
    let mut ha = vec![0usize; top + 1];
    let mut hb = vec![0usize; top + 1];
    for &x in a {
        ha[x] += 1;
    }
    for &x in b {
        hb[x] += 1;
    }
    let (mut fa, mut fb) = (0.0, 0.0);
    let mut gaps = Vec::with_capacity(top + 1);
    for k in 0..=top {
        fa += ha[k] as f64 / a.len() as f64;
        fb += hb[k] as f64 / b.len() as f64;
        gaps.push((fa - fb).abs());
    }
    gaps
}

/// 1-Wasserstein distance between two empirical distributions on ℕ.
pub fn wasserstein_counts(a: &[usize], b: &[usize]) -> f64 {
    count_cdf_gaps(a, b).iter().sum()
}

/// Kolmogorov distance between two empirical distributions on ℕ.
pub fn ks_counts(a: &[usize], b: &[usize]) -> f64 {
    count_cdf_gaps(a, b).into_iter().fold(0.0, f64::max)
}

/// Components of [`point_process_distance`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointProcessDistance {
    pub mean_cell_wasserstein: f64,
    pub total_count_ks: f64,
    pub distance: f64,
}

/// Count-vector surrogate for the distance between two point-process laws:
/// the larger of the mean over cells of the 1-Wasserstein distance between
/// count distributions and the Kolmogorov distance between total counts.
pub fn point_process_distance(a: &[PointSet], b: &[PointSet], partition: &[Region]) -> Result<PointProcessDistance, StatsError> {
    if partition.is_empty() {
        return Err(StatsError::EmptyPartition);
    }
    for s in [a, b] {
        if s.len() < PP_MIN_TRIALS {
            return Err(StatsError::TooFewSamples {
                min: PP_MIN_TRIALS,
                found: s.len(),
            });
        }
    }
    let ca = CountVectorSample::new(a, partition);
    let cb = CountVectorSample::new(b, partition);
    let mean_cell_wasserstein = (0..partition.len()).map(|c| wasserstein_counts(&ca.cell(c), &cb.cell(c))).sum::<f64>() / partition.len() as f64;
    let total_count_ks = ks_counts(&ca.totals(), &cb.totals());
    Ok(PointProcessDistance {
        mean_cell_wasserstein,
        total_count_ks,
        distance: mean_cell_wasserstein.max(total_count_ks),
    })
}

fn apply(op: &Operator<'_>, x: &[Complex64]) -> Result<Vec<Complex64>, StatsError> {
    match op {
        Operator::Dense(m) => Ok(m.mul_vec(x)?),
        Operator::Diagonal(d) => {
            if d.len() != x.len() {
                return Err(LinalgError::DimensionMismatch {
                    expected: (d.len(), 1),
                    found: (x.len(), 1),
                }
                .into());
            }
            Ok(d.iter().zip(x).map(|(a, b)| a * b).collect())
        }
    }
}

/// `(τ, ζ) = ((1/N) Tr BB^*, (1/N) Tr BB^T)`.
pub fn trace_moments(b: &Operator<'_>) -> (f64, Complex64) {
    let n = b.dim() as f64;
    match b {
        Operator::Diagonal(d) => (
            d.iter().map(|x| x.norm_sqr()).sum::<f64>() / n,
            d.iter().map(|x| x * x).sum::<Complex64>() / n,
        ),
        Operator::Dense(m) => {
            let k = m.n_rows();
            let mut tau = 0.0;
            let mut zeta = Complex64::new(0.0, 0.0);
            for i in 0..k {
                for j in 0..k {
                    tau += m[(i, j)].norm_sqr();
                    zeta += m[(i, j)] * m[(j, i)];
                }
            }
            (tau / n, zeta / n)
        }
    }
}

/// `(1/√N) x^T B y` for fresh vectors `x ~ law_x`, `y ~ law_y`.
pub fn bilinear_clt_trial(b: Operator<'_>, law_x: EntryLaw, law_y: EntryLaw, stream: RngStream) -> Result<Complex64, StatsError> {
    let n = b.dim();
    let mut rx = stream.with_role(Role::LeftVector).rng();
    let mut ry = stream.with_role(Role::RightVector).rng();
    let x: Vec<Complex64> = (0..n).map(|_| law_x.sample(&mut rx)).collect();
    let y: Vec<Complex64> = (0..n).map(|_| law_y.sample(&mut ry)).collect();
    let by = apply(&b, &y)?;
    let s: Complex64 = x.iter().zip(&by).map(|(a, c)| a * c).sum();
    Ok(s / (n as f64).sqrt())
}

/// Limit `(E|g|², E g²)` of the bilinear form: `(τ, E x² E y² ζ)`.
pub fn bilinear_clt_limit(b: &Operator<'_>, law_x: EntryLaw, law_y: EntryLaw) -> (f64, Complex64) {
    let (tau, zeta) = trace_moments(b);
    (tau, law_x.second_moment_square() * law_y.second_moment_square() * zeta)
}

/// Letter of a noncommutative monomial in matrices `B_i` and `Y = X/√n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Letter {
    B(usize),
    Y,
}

/// `u^* W v` for the word `W` with one shared sample of `Y`.
pub fn bilinear_vanishing_trial(
    word: &[Letter],
    bs: &[ComplexMatrix],
    u: &[Complex64],
    v: &[Complex64],
    law: EntryLaw,
    stream: RngStream,
) -> Result<Complex64, StatsError> {
    let n = u.len();
    if word.is_empty() {
        return Err(StatsError::MalformedWord("empty word".into()));
    }
    if v.len() != n || n == 0 {
        return Err(StatsError::MalformedWord("u and v must have the same nonzero length".into()));
    }
    for letter in word {
        if let Letter::B(i) = letter {
            let b = bs.get(*i).ok_or_else(|| StatsError::MalformedWord(format!("no matrix B{i}")))?;
            if b.shape() != (n, n) {
                return Err(StatsError::MalformedWord(format!("B{i} has shape {:?}, expected ({n}, {n})", b.shape())));
            }
        }
    }
    let y = word
        .contains(&Letter::Y)
        .then(|| sample_entry_matrix(law, n, stream.with_role(Role::Entries)).scale_real(1.0 / (n as f64).sqrt()));
    let mut x = v.to_vec();
    for letter in word.iter().rev() {
        x = match letter {
            Letter::B(i) => bs[*i].mul_vec(&x)?,
            Letter::Y => y.as_ref().expect("sampled when the word has Y").mul_vec(&x)?,
        };
    }
    Ok(u.iter().zip(&x).map(|(a, b)| a.conj() * b).sum())
}

/// Which adjoint closes the trace word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceVariant {
    Adjoint,
    Transpose,
}

/// `(1/n) Tr{B⁰ ∏_{ℓ≤k} (Y B^ℓ) ∏_{ℓ≤k'} (C^{k'−ℓ+1} Y')}` with `Y' = Y^*` or `Y^T`.
pub fn trace_limit_trial(
    b0: &ComplexMatrix,
    bs: &[ComplexMatrix],
    cs: &[ComplexMatrix],
    variant: TraceVariant,
    law: EntryLaw,
    stream: RngStream,
) -> Result<Complex64, StatsError> {
    let n = b0.ensure_square()?;
    for m in bs.iter().chain(cs) {
        if m.shape() != (n, n) {
            return Err(LinalgError::DimensionMismatch {
                expected: (n, n),
                found: m.shape(),
            }
            .into());
        }
    }
    let y = sample_entry_matrix(law, n, stream.with_role(Role::Entries)).scale_real(1.0 / (n as f64).sqrt());
    let y_close = match variant {
        TraceVariant::Adjoint => y.adjoint(),
        TraceVariant::Transpose => y.transpose(),
    };
    let mut acc = b0.clone();
    for b in bs {
        acc = &(&acc * &y) * b;
    }
    for c in cs.iter().rev() {
        acc = &(&acc * c) * &y_close;
    }
    Ok(acc.trace() / n as f64)
}

/// Result of [`moment_bound_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentBound {
    pub empirical: MeanEstimate,
    pub bound: f64,
}

/// `√N u^* (B X/√N)^k v` for one sample of `X`.
pub fn moment_statistic(b_diag: &[Complex64], u: &[Complex64], v: &[Complex64], k: usize, law: EntryLaw, stream: RngStream) -> Result<Complex64, StatsError> {
    let n = b_diag.len();
    let x = sample_entry_matrix(law, n, stream.with_role(Role::Entries));
    let s = 1.0 / (n as f64).sqrt();
    let mut w = v.to_vec();
    for _ in 0..k {
        w = x.mul_vec(&w)?;
        for (wi, bi) in w.iter_mut().zip(b_diag) {
            *wi *= bi * s;
        }
    }
    let dot: Complex64 = u.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
    Ok(dot * (n as f64).sqrt())
}

/// Empirical `E|√N u^* (B X/√N)^k v|²` over `trials` samples and the bound
/// `C k⁴ ((1/N) tr BB^*)^k` with the frozen [`MOMENT_BOUND_C`].
///
/// Preconditions: `N ‖B‖² ≤ M tr BB^*`, `‖u‖_∞, ‖v‖_∞ ≤ M/√N` and
/// `1 ≤ k ≤ N^{1/2}`.
pub fn moment_bound_check(
    b_diag: &[Complex64],
    u: &[Complex64],
    v: &[Complex64],
    k: usize,
    trials: usize,
    law: EntryLaw,
    seed: u64,
) -> Result<MomentBound, StatsError> {
    let n = b_diag.len();
    if n == 0 || u.len() != n || v.len() != n {
        return Err(StatsError::Precondition("B, u and v must share a nonzero dimension".into()));
    }
    if trials < 2 {
        return Err(StatsError::Precondition("need at least two trials".into()));
    }
    let nf = n as f64;
    let tr: f64 = b_diag.iter().map(|x| x.norm_sqr()).sum();
    let op_norm_sq = b_diag.iter().map(|x| x.norm_sqr()).fold(0.0, f64::max);
    if nf * op_norm_sq > MOMENT_BOUND_M * tr * (1.0 + 1e-12) {
        return Err(StatsError::Precondition("N‖B‖² exceeds M tr BB^*".into()));
    }
    let cap = MOMENT_BOUND_M / nf.sqrt() * (1.0 + 1e-12);
    if u.iter().chain(v).any(|x| x.norm() > cap) {
        return Err(StatsError::Precondition("‖u‖_∞ or ‖v‖_∞ exceeds M/√N".into()));
    }
    if k == 0 || (k as f64) > nf.sqrt() {
        return Err(StatsError::Precondition(format!("k = {k} must lie in [1, √N]")));
    }
    let samples = (0..trials)
        .map(|t| moment_statistic(b_diag, u, v, k, law, RngStream::new(seed, t as u64, Role::Entries)).map(|s| s.norm_sqr()))
        .collect::<Result<Vec<f64>, _>>()?;
    Ok(MomentBound {
        empirical: MeanEstimate::from_samples(&samples),
        bound: MOMENT_BOUND_C * (k as f64).powi(4) * (tr / nf).powi(k as i32),
    })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Median of a nonempty slice.
pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn uniform(seed: u64, n: usize, shift: f64) -> Vec<f64> {
        let mut rng = RngStream::new(seed, 0, Role::Aux(0)).rng();
        (0..n).map(|_| rng.gen::<f64>() + shift).collect()
    }

    #[test]
    fn ks_identical_and_shifted() {
        let a = uniform(1, 1000, 0.0);
        let same = ks_two_sample(&a, &a).unwrap();
        assert_eq!(same.statistic, 0.0);
        assert!(same.accept);
        let b = uniform(2, 1000, 0.5);
        let shifted = ks_two_sample(&a, &b).unwrap();
        assert!(!shifted.accept);
        assert!((shifted.statistic - 0.5).abs() < 0.06);
        assert!(ks_two_sample(&a[..10], &b).is_err());
    }

    #[test]
    fn kolmogorov_tail() {
        assert!((kolmogorov_sf(KS_CRITICAL_001) - 0.01).abs() < 1e-4);
        assert!((kolmogorov_sf(1.3581) - 0.05).abs() < 1e-4);
    }

    #[test]
    fn count_distances() {
        assert_eq!(wasserstein_counts(&[0, 1, 2], &[1, 2, 3]), 1.0);
        assert_eq!(ks_counts(&[0, 0], &[1, 1]), 1.0);
    }

    #[test]
    fn pp_distance_zero_on_identical() {
        let trials: Vec<PointSet> = (0..120).map(|k| PointSet::new(vec![c(0.01 * (k % 7) as f64, 0.0)])).collect();
        let cells = vec![Region::disk(c(0.0, 0.0), 0.03), Region::annulus(c(0.0, 0.0), 0.03, 1.0)];
        let d = point_process_distance(&trials, &trials, &cells).unwrap();
        assert_eq!(d.distance, 0.0);
        assert_eq!(point_process_distance(&trials, &trials, &[]).unwrap_err(), StatsError::EmptyPartition);
    }

    #[test]
    fn zero_matrix_bilinear() {
        let z = vec![c(0.0, 0.0); 16];
        let s = bilinear_clt_trial(Operator::Diagonal(&z), EntryLaw::RealGaussian, EntryLaw::RealGaussian, RngStream::new(0, 0, Role::Aux(0))).unwrap();
        assert_eq!(s, c(0.0, 0.0));
    }

    #[test]
    fn single_y_word() {
        let n = 9;
        let mut e1 = vec![c(0.0, 0.0); n];
        e1[0] = c(1.0, 0.0);
        let stream = RngStream::new(4, 2, Role::Entries);
        let val = bilinear_vanishing_trial(&[Letter::Y], &[], &e1, &e1, EntryLaw::ComplexGaussian, stream).unwrap();
        let x = sample_entry_matrix(EntryLaw::ComplexGaussian, n, stream);
        assert!((val - x[(0, 0)] / 3.0).norm() < 1e-15);
        assert!(bilinear_vanishing_trial(&[Letter::B(0)], &[], &e1, &e1, EntryLaw::ComplexGaussian, stream).is_err());
    }

    #[test]
    fn moment_bound_zero_b() {
        let n = 16;
        let z = vec![c(0.0, 0.0); n];
        let u = vec![c(0.25, 0.0); n];
        let res = moment_bound_check(&z, &u, &u, 1, 10, EntryLaw::RealGaussian, 0).unwrap();
        assert_eq!(res.empirical.mean, 0.0);
        assert_eq!(res.bound, 0.0);
    }

    #[test]
    fn slope_and_median() {
        let x = [1.0, 4.0, 16.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| v.powf(-0.5)).collect();
        assert!((log_log_slope(&x, &y) + 0.5).abs() < 1e-12);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
