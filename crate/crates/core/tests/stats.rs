mod common;

use common::{c, rng};
use num_complex::Complex64;
use outliers_core::linalg::Operator;
use outliers_core::region::Region;
use outliers_core::stats::{
    bilinear_clt_limit, bilinear_clt_trial, bilinear_vanishing_trial, kolmogorov_sf, ks_two_sample, log_log_slope, moment_bound_check,
    point_process_distance, trace_limit_trial, Letter, MeanEstimate, TraceVariant, KS_CRITICAL_001,
};
use outliers_core::{ComplexMatrix, EntryLaw, PointSet, RngStream, Role};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Poisson};

fn uniform(n: usize, lo: f64, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n).map(|_| lo + r.gen::<f64>()).collect()
}

/// Poisson(1) many points uniform in the unit disk, per trial.
fn poisson_sample(trials: usize, seed: u64) -> Vec<PointSet> {
    let mut r = rng(seed);
    let law = Poisson::new(1.0).unwrap();
    (0..trials)
        .map(|_| {
            let k = law.sample(&mut r) as usize;
            (0..k)
                .map(|_| Complex64::from_polar(r.gen::<f64>().sqrt(), 2.0 * std::f64::consts::PI * r.gen::<f64>()))
                .collect()
        })
        .collect()
}

fn halves() -> Vec<Region> {
    vec![Region::disk(c(0.0, 0.0), 0.5f64.sqrt()), Region::annulus(c(0.0, 0.0), 0.5f64.sqrt(), 1.0)]
}

#[test]
fn kolmogorov_tail_at_the_critical_value() {
    assert!((kolmogorov_sf(KS_CRITICAL_001) - 0.01).abs() < 1e-4);
    assert_eq!(kolmogorov_sf(0.0), 1.0);
}

#[test]
fn ks_separates_shifted_uniforms() {
    let a = uniform(300, 0.0, 1);
    let same = ks_two_sample(&a, &uniform(300, 0.0, 2)).unwrap();
    assert!(same.accept, "{same:?}");
    let shifted = ks_two_sample(&a, &uniform(300, 0.5, 3)).unwrap();
    assert!(!shifted.accept && (shifted.statistic - 0.5).abs() < 0.1, "{shifted:?}");
    assert!(ks_two_sample(&a[..10], &a).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ks_is_symmetric(n in 30usize..80, m in 30usize..80, seed in any::<u64>(), shift in -1.0f64..1.0) {
        let a = uniform(n, 0.0, seed);
        let b = uniform(m, shift, seed ^ 7);
        let ab = ks_two_sample(&a, &b).unwrap();
        let ba = ks_two_sample(&b, &a).unwrap();
        prop_assert!((ab.statistic - ba.statistic).abs() < 1e-15);
        prop_assert!((0.0..=1.0).contains(&ab.statistic));
    }
}

#[test]
fn point_process_distance_of_equal_laws_is_small() {
    let a = poisson_sample(10_000, 5);
    let b = poisson_sample(10_000, 6);
    let d = point_process_distance(&a, &b, &halves()).unwrap();
    assert!(d.distance < 0.05, "{d:?}");
    assert!(point_process_distance(&a[..50], &b, &halves()).is_err());
}

#[test]
fn point_process_distance_is_a_pseudometric() {
    let a = poisson_sample(400, 1);
    let b = poisson_sample(400, 2);
    let shifted: Vec<PointSet> = poisson_sample(400, 3).iter().map(|p| p.rescaled(c(0.0, 0.0), 0.5)).collect();
    let cells = halves();
    let d = |x: &[PointSet], y: &[PointSet]| point_process_distance(x, y, &cells).unwrap().distance;
    assert_eq!(d(&a, &a), 0.0);
    assert_eq!(d(&a, &b), d(&b, &a));
    assert!(d(&a, &shifted) <= d(&a, &b) + d(&b, &shifted) + 1e-12);
    assert!(d(&a, &shifted) > 0.1);
}

#[test]
fn bilinear_form_variance_matches_trace() {
    let n = 200;
    let diag: Vec<Complex64> = (0..n).map(|k| c(1.0 + (k % 3) as f64, 0.5)).collect();
    let op = Operator::Diagonal(&diag);
    let (tau, zeta) = bilinear_clt_limit(&op, EntryLaw::ComplexGaussian, EntryLaw::ComplexGaussian);
    assert_eq!(zeta, c(0.0, 0.0));
    let draws: Vec<f64> = (0..3000)
        .map(|t| {
            bilinear_clt_trial(Operator::Diagonal(&diag), EntryLaw::ComplexGaussian, EntryLaw::ComplexGaussian, RngStream::new(9, t, Role::Aux(0)))
                .unwrap()
                .norm_sqr()
        })
        .collect();
    let est = MeanEstimate::from_samples(&draws);
    assert!((est.mean - tau).abs() < 5.0 * est.std_error, "{est:?} vs τ = {tau}");
}

#[test]
fn words_with_a_y_letter_vanish_at_rate_sqrt_n() {
    let ns = [128usize, 256, 512];
    let word = [Letter::B(0), Letter::Y, Letter::B(0)];
    let rms: Vec<f64> = ns
        .iter()
        .map(|&n| {
            let b = ComplexMatrix::from_diagonal(&(0..n).map(|k| c(1.0 + 0.5 * (k % 2) as f64, 0.0)).collect::<Vec<_>>());
            let u = vec![c(1.0 / (n as f64).sqrt(), 0.0); n];
            let v: Vec<Complex64> = (0..n).map(|k| if k % 2 == 0 { c(0.0, 2f64.sqrt() / (n as f64).sqrt()) } else { c(0.0, 0.0) }).collect();
            let ms = (0..200)
                .map(|t| bilinear_vanishing_trial(&word, &[b.clone()], &u, &v, EntryLaw::RealGaussian, RngStream::new(3, t, Role::Aux(1))).unwrap().norm_sqr())
                .sum::<f64>()
                / 200.0;
            ms.sqrt()
        })
        .collect();
    let slope = log_log_slope(&ns.map(|n| n as f64), &rms);
    assert!((slope + 0.5).abs() < 0.15, "slope {slope}, rms {rms:?}");
    // Without Y the word is deterministic: u^* B² v.
    let n = 16;
    let b = ComplexMatrix::identity(n).scale_real(2.0);
    let u = vec![c(0.25, 0.0); n];
    let got = bilinear_vanishing_trial(&[Letter::B(0), Letter::B(0)], &[b], &u, &u, EntryLaw::RealGaussian, RngStream::new(0, 0, Role::Aux(1))).unwrap();
    assert!((got - c(4.0, 0.0)).norm() < 1e-12);
}

#[test]
fn trace_words_concentrate() {
    let n = 300;
    let id = ComplexMatrix::identity(n);
    let run = |variant, law| trace_limit_trial(&id, &[id.clone()], &[id.clone()], variant, law, RngStream::new(2, 0, Role::Aux(2))).unwrap();
    // (1/n) Tr Y Y^* → E|x|² = 1; (1/n) Tr Y Y^T → E x².
    assert!((run(TraceVariant::Adjoint, EntryLaw::ComplexGaussian) - 1.0).norm() < 0.05);
    assert!(run(TraceVariant::Transpose, EntryLaw::ComplexGaussian).norm() < 0.05);
    assert!((run(TraceVariant::Transpose, EntryLaw::RealGaussian) - 1.0).norm() < 0.05);
    // No Y at all: (1/n) Tr B⁰.
    let b0 = ComplexMatrix::identity(n).scale_real(3.0);
    let t = trace_limit_trial(&b0, &[], &[], TraceVariant::Adjoint, EntryLaw::RealGaussian, RngStream::new(2, 0, Role::Aux(2))).unwrap();
    assert!((t - 3.0).norm() < 1e-12);
}

#[test]
fn moment_bound_examples() {
    let n = 256;
    let flat = vec![c(1.0 / (n as f64).sqrt(), 0.0); n];
    let ones = vec![c(1.0, 0.0); n];
    // k = 1, B = I: the statistic is (1/N) Σ X_ij with unit variance.
    let m1 = moment_bound_check(&ones, &flat, &flat, 1, 400, EntryLaw::ComplexGaussian, 1).unwrap();
    assert!((m1.empirical.mean - 1.0).abs() < 5.0 * m1.empirical.std_error, "{m1:?}");
    assert_eq!(m1.bound, 4.0);

    // B = cI with c² = 1/2: decay like c^{2k}, under the bound at every k.
    let half = vec![c(0.5f64.sqrt(), 0.0); n];
    let mut prev = f64::INFINITY;
    for k in 1..=4 {
        let m = moment_bound_check(&half, &flat, &flat, k, 400, EntryLaw::ComplexGaussian, 10 + k as u64).unwrap();
        assert!(m.empirical.mean <= m.bound, "k={k}: {m:?}");
        assert!(m.empirical.mean < prev, "k={k}: no decay");
        let ratio = m.empirical.mean / 0.5f64.powi(k as i32);
        assert!((0.5..2.0).contains(&ratio), "k={k}: ratio {ratio}");
        prev = m.empirical.mean;
    }
}

#[test]
fn moment_bound_preconditions() {
    let n = 64;
    let flat = vec![c(1.0 / 8.0, 0.0); n];
    let ones = vec![c(1.0, 0.0); n];
    assert!(moment_bound_check(&ones, &flat, &flat, 9, 10, EntryLaw::RealGaussian, 0).is_err());
    assert!(moment_bound_check(&ones, &flat, &flat, 0, 10, EntryLaw::RealGaussian, 0).is_err());
    let mut spike = vec![c(0.0, 0.0); n];
    spike[0] = c(1.0, 0.0);
    assert!(moment_bound_check(&spike, &flat, &flat, 1, 10, EntryLaw::RealGaussian, 0).is_err());
    let mut peaked = flat.clone();
    peaked[0] = c(2.0, 0.0);
    assert!(moment_bound_check(&ones, &peaked, &flat, 1, 10, EntryLaw::RealGaussian, 0).is_err());
}
