//! Dispatch of a configuration to its pipeline, and aggregation of trial records.

use std::collections::BTreeMap;
use std::time::Instant;

use num_complex::Complex64;
use outliers_core::gaf::{expected_zero_count, find_zeros, sample_gaf_series, KernelSpec};
use outliers_core::linalg::{eigenvalues_near, Operator};
use outliers_core::outliers::{jordan_shape_metrics, match_outliers, sample_model_spectrum, EigenMethod, FluctuationSetup};
use outliers_core::region::Region;
use outliers_core::rng::complex_normal;
use outliers_core::spectral::{beta_support_test, nu_provider_for, SupportClass};
use outliers_core::stats::{bilinear_clt_limit, bilinear_clt_trial, ks_two_sample, median, point_process_distance, MeanEstimate};
use outliers_core::{ensembles, DeformationSpec, PointSet, RngStream, Role};
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{Analysis, ConfigError, ExperimentConfig};
use crate::report::{config_hash, RunReport, TrialOutcome, TrialRecord, SCHEMA_VERSION};

/// Finite-difference step for the expected zero count.
const INTENSITY_STEP: f64 = 1e-3;
/// Margin between the counting disk and the kernel's declared domain.
const KERNEL_DOMAIN_MARGIN: f64 = 0.05;
const BOUNDARY_SAMPLES: usize = 4096;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("cannot build worker pool: {0}")]
    Pool(String),
}

fn numerical(e: impl std::fmt::Display) -> RunError {
    RunError::Numerical(e.to_string())
}

/// Runs every trial of `config` and aggregates. `threads = None` uses the
/// global pool; the result does not depend on the thread count.
pub fn run(config: &ExperimentConfig, threads: Option<usize>) -> Result<RunReport, RunError> {
    config.validate()?;
    let start = Instant::now();
    let trials = match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| RunError::Pool(e.to_string()))?
            .install(|| run_trials(config))?,
        None => run_trials(config)?,
    };
    let aggregates = aggregate(config, &trials)?;
    Ok(RunReport {
        schema_version: SCHEMA_VERSION,
        config_hash: config_hash(config),
        config: config.clone(),
        seed: config.seed,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        trials,
        aggregates,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    })
}

fn fan_out<F>(count: usize, f: F) -> Vec<TrialRecord>
where
    F: Fn(u64) -> Result<TrialOutcome, String> + Sync,
{
    let mut records: Vec<TrialRecord> = (0..count as u64)
        .into_par_iter()
        .map(|index| TrialRecord {
            index,
            outcome: f(index).unwrap_or_else(|error| TrialOutcome::Failed { error }),
        })
        .collect();
    records.sort_by_key(|r| r.index);
    records
}

fn run_trials(config: &ExperimentConfig) -> Result<Vec<TrialRecord>, RunError> {
    let seed = config.seed;
    let law = config.entry_law;
    let sigma = config.sigma;
    let spec = DeformationSpec::new(config.deformation.clone(), config.n);
    match &config.analysis {
        Analysis::SpectrumScatter {
            targets,
            match_tol,
            absorbed,
            keep_spectra,
        } => {
            let a = spec.build().map_err(numerical)?.a;
            let targets = PointSet::new(targets.clone());
            Ok(fan_out(config.trials, |idx| {
                let spectrum = sample_model_spectrum(&a, law, sigma, RngStream::new(seed, idx, Role::Entries))
                    .map_err(|e| e.to_string())?
                    .eigenvalues;
                let in_region = spectrum.filter(|z| config.region.contains(z));
                let match_max_dist = if targets.is_empty() {
                    None
                } else {
                    match_outliers(&spectrum, &targets, &config.region).ok().map(|m| m.max_dist)
                };
                let absorbed_ok = absorbed.iter().all(|&p| in_region.distance_to(p) > *match_tol);
                Ok(TrialOutcome::Spectrum {
                    in_region,
                    match_max_dist,
                    absorbed_ok,
                    spectrum: (idx < *keep_spectra as u64).then_some(spectrum),
                })
            }))
        }
        Analysis::SupportTestGrid { grid, extent, atoms, .. } => {
            let provider = nu_provider_for(&config.deformation, *atoms);
            let axis = |k: usize| -extent + 2.0 * extent * k as f64 / (*grid - 1) as f64;
            Ok(fan_out(*grid, |row| {
                let y = axis(row as usize);
                let points: Vec<Complex64> = (0..*grid).map(|k| Complex64::new(axis(k), y)).collect();
                let classes = points
                    .iter()
                    .map(|&z| beta_support_test(provider.as_ref(), sigma, z))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| e.to_string())?;
                Ok(TrialOutcome::SupportRow {
                    points: PointSet::new(points),
                    classes,
                })
            }))
        }
        Analysis::StableFluct { delta, method } | Analysis::JordanFluct { delta, method } => {
            let setup = FluctuationSetup::new(&spec, law, sigma, *delta, *method).map_err(numerical)?;
            Ok(fan_out(config.trials, |idx| {
                let sample = setup.trial(seed, idx).map_err(|e| e.to_string())?;
                let limit = setup.limit_sample(seed, idx).map_err(|e| e.to_string())?;
                Ok(TrialOutcome::Fluctuation {
                    found: sample.found,
                    accepted: sample.accepted,
                    scaled: sample.scaled_points,
                    limit,
                })
            }))
        }
        Analysis::GafCompare {
            series,
            resolution,
            truncation_tol,
            method,
            ..
        } => {
            let (center, radius) = disk_of(&config.region);
            let a = spec.build().map_err(numerical)?.a;
            let truncation = series.truncation_for(radius, *truncation_tol).map_err(numerical)?;
            Ok(fan_out(config.trials, |idx| {
                let stream = RngStream::new(seed, idx, Role::Entries);
                let eigenvalues = match method {
                    EigenMethod::Dense => sample_model_spectrum(&a, law, sigma, stream)
                        .map_err(|e| e.to_string())?
                        .eigenvalues
                        .filter(|z| config.region.contains(z)),
                    EigenMethod::Localized => {
                        let x = ensembles::sample_entry_matrix(law, config.n, stream);
                        let m = ensembles::assemble_model(&a, sigma, &x).map_err(|e| e.to_string())?;
                        PointSet::new(eigenvalues_near(&m, center, radius).map_err(|e| e.to_string())?.eigenvalues)
                    }
                };
                let coeffs = sample_gaf_series(*series, truncation, RngStream::new(seed, idx, Role::Gaf)).map_err(|e| e.to_string())?;
                let zeros = find_zeros(|z| series.eval(&coeffs, z), &config.region, *resolution).map_err(|e| e.to_string())?;
                Ok(TrialOutcome::Gaf { eigenvalues, zeros })
            }))
        }
        Analysis::AppendixClt { law_y, operator } => {
            let diag = operator.diagonal(config.n);
            let (tau, pseudo) = bilinear_clt_limit(&Operator::Diagonal(&diag), law, *law_y);
            Ok(fan_out(config.trials, |idx| {
                let value = bilinear_clt_trial(Operator::Diagonal(&diag), law, *law_y, RngStream::new(seed, idx, Role::Entries))
                    .map_err(|e| e.to_string())?;
                let reference = complex_normal(tau, pseudo, &mut RngStream::new(seed, idx, Role::Limit).rng());
                Ok(TrialOutcome::Clt { value, reference })
            }))
        }
    }
}

fn disk_of(region: &Region) -> (Complex64, f64) {
    match region {
        Region::Disk { center, radius } => (*center, *radius),
        _ => unreachable!("validated as a disk"),
    }
}

/// Recomputes the aggregates of a run from its configuration and records.
pub fn aggregate(config: &ExperimentConfig, trials: &[TrialRecord]) -> Result<BTreeMap<String, f64>, RunError> {
    let mut agg = Aggregates::default();
    let failed = trials.iter().filter(|t| matches!(t.outcome, TrialOutcome::Failed { .. })).count();
    agg.put("trials_total", trials.len() as f64);
    agg.put("trials_failed", failed as f64);
    match &config.analysis {
        Analysis::SpectrumScatter {
            targets,
            match_tol,
            absorbed,
            ..
        } => {
            let mut counts = Vec::new();
            let mut matched = Vec::new();
            let mut absorbed_ok = Vec::new();
            for t in trials {
                if let TrialOutcome::Spectrum {
                    in_region,
                    match_max_dist,
                    absorbed_ok: ok,
                    ..
                } = &t.outcome
                {
                    counts.push(in_region.len());
                    matched.push(*match_max_dist);
                    absorbed_ok.push(*ok);
                }
            }
            let cf: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
            let est = MeanEstimate::from_samples(&cf);
            agg.put("mean_count", est.mean);
            agg.put("count_std_error", est.std_error);
            agg.put("mean_fraction_in_region", est.mean / config.n as f64);
            agg.put("frac_count_zero", fraction(counts.iter().map(|&c| c == 0)));
            agg.put("frac_count_ge1", fraction(counts.iter().map(|&c| c >= 1)));
            let mut hist: BTreeMap<usize, usize> = BTreeMap::new();
            for &c in &counts {
                *hist.entry(c).or_default() += 1;
            }
            for (c, k) in hist {
                agg.put(&format!("count_hist.{c}"), k as f64);
            }
            if !targets.is_empty() {
                agg.put("frac_count_match", fraction(counts.iter().map(|&c| c == targets.len())));
                agg.put("frac_matched", fraction(matched.iter().map(|m| m.is_some_and(|d| d <= *match_tol))));
                let dists: Vec<f64> = matched.iter().flatten().copied().collect();
                if !dists.is_empty() {
                    agg.put("median_match_max_dist", median(&dists));
                }
            }
            if !absorbed.is_empty() {
                agg.put("frac_absorbed", fraction(absorbed_ok.iter().copied()));
            }
        }
        Analysis::SupportTestGrid { band, .. } => {
            let (mut inside, mut outside, mut in_band, mut wrong, mut wrong_far) = (0usize, 0usize, 0usize, 0usize, 0usize);
            let mut total = 0usize;
            let mut worst: f64 = 0.0;
            let boundary = config.region.boundary_grid(BOUNDARY_SAMPLES);
            for t in trials {
                if let TrialOutcome::SupportRow { points, classes } = &t.outcome {
                    for (&z, class) in points.iter().zip(classes) {
                        total += 1;
                        let truth = config.region.contains(z);
                        let d = boundary_distance(&config.region, &boundary, z);
                        let mistaken = match class {
                            SupportClass::Inside => {
                                inside += 1;
                                !truth
                            }
                            SupportClass::Outside => {
                                outside += 1;
                                truth
                            }
                            SupportClass::BoundaryBand => {
                                in_band += 1;
                                worst = worst.max(d);
                                false
                            }
                        };
                        if mistaken {
                            wrong += 1;
                            worst = worst.max(d);
                            if d > *band {
                                wrong_far += 1;
                            }
                        }
                    }
                }
            }
            agg.put("grid_points", total as f64);
            agg.put("inside", inside as f64);
            agg.put("outside", outside as f64);
            agg.put("boundary_band", in_band as f64);
            agg.put("misclassified", wrong as f64);
            agg.put("misclassified_beyond_band", wrong_far as f64);
            agg.put("max_uncertain_distance", worst);
        }
        Analysis::StableFluct { .. } | Analysis::JordanFluct { .. } => {
            let mut accepted = 0usize;
            let mut found_total = 0usize;
            let mut scaled = Vec::new();
            let mut limit = Vec::new();
            let mut ratios = Vec::new();
            let mut angles = Vec::new();
            let mut limit_ratios = Vec::new();
            let mut limit_angles = Vec::new();
            let mut ok_trials = 0usize;
            for t in trials {
                if let TrialOutcome::Fluctuation {
                    found,
                    accepted: acc,
                    scaled: s,
                    limit: l,
                } = &t.outcome
                {
                    ok_trials += 1;
                    found_total += found;
                    limit.extend(l.iter().map(|z| z.norm()));
                    if let Some((r, a)) = jordan_shape_metrics(l) {
                        limit_ratios.push(r);
                        limit_angles.push(a);
                    }
                    if *acc {
                        accepted += 1;
                        scaled.extend(s.iter().map(|z| z.norm()));
                        if let Some((r, a)) = jordan_shape_metrics(s) {
                            ratios.push(r);
                            angles.push(a);
                        }
                    }
                }
            }
            if ok_trials > 0 {
                agg.put("accept_rate", accepted as f64 / ok_trials as f64);
                agg.put("mean_found", found_total as f64 / ok_trials as f64);
            }
            if let Ok(ks) = ks_two_sample(&scaled, &limit) {
                put_ks(&mut agg, "ks_modulus", &ks);
            }
            if matches!(config.analysis, Analysis::JordanFluct { .. }) {
                if !ratios.is_empty() {
                    agg.put("median_ratio_dev", median(&ratios));
                    agg.put("median_angle_dev", median(&angles));
                }
                if !limit_ratios.is_empty() {
                    agg.put("limit_median_ratio_dev", median(&limit_ratios));
                    agg.put("limit_median_angle_dev", median(&limit_angles));
                }
            }
        }
        Analysis::GafCompare { kernel, partition, .. } => {
            let mut eig = Vec::new();
            let mut zeros = Vec::new();
            for t in trials {
                if let TrialOutcome::Gaf { eigenvalues, zeros: z } = &t.outcome {
                    eig.push(eigenvalues.clone());
                    zeros.push(z.clone());
                }
            }
            let (center, radius) = disk_of(&config.region);
            let kernel = KernelSpec {
                kind: kernel.clone(),
                domain: Region::disk(center, radius + KERNEL_DOMAIN_MARGIN),
            };
            let expected = expected_zero_count(&kernel, center, radius, INTENSITY_STEP).map_err(numerical)?;
            agg.put("expected_count", expected);
            for (name, sets) in [("eigen", &eig), ("zeros", &zeros)] {
                let counts: Vec<f64> = sets.iter().map(|p| p.len() as f64).collect();
                let est = MeanEstimate::from_samples(&counts);
                agg.put(&format!("{name}_mean_count"), est.mean);
                agg.put(&format!("{name}_count_std_error"), est.std_error);
                if est.std_error > 0.0 {
                    agg.put(&format!("{name}_count_z"), (est.mean - expected) / est.std_error);
                }
            }
            if let Ok(d) = point_process_distance(&eig, &zeros, partition) {
                agg.put("pp_distance", d.distance);
                agg.put("pp_mean_cell_wasserstein", d.mean_cell_wasserstein);
                agg.put("pp_total_count_ks", d.total_count_ks);
            }
        }
        Analysis::AppendixClt { law_y, operator } => {
            let diag = operator.diagonal(config.n);
            let (tau, pseudo) = bilinear_clt_limit(&Operator::Diagonal(&diag), config.entry_law, *law_y);
            agg.put("limit_variance", tau);
            agg.put("limit_pseudo_re", pseudo.re);
            agg.put("limit_pseudo_im", pseudo.im);
            let mut values = Vec::new();
            let mut refs = Vec::new();
            for t in trials {
                if let TrialOutcome::Clt { value, reference } = &t.outcome {
                    values.push(*value);
                    refs.push(*reference);
                }
            }
            let abs2: Vec<f64> = values.iter().map(|z| z.norm_sqr()).collect();
            let est = MeanEstimate::from_samples(&abs2);
            agg.put("mean_abs2", est.mean);
            agg.put("mean_abs2_std_error", est.std_error);
            let re: Vec<f64> = values.iter().map(|z| z.re).collect();
            let im: Vec<f64> = values.iter().map(|z| z.im).collect();
            let ref_re: Vec<f64> = refs.iter().map(|z| z.re).collect();
            let ref_im: Vec<f64> = refs.iter().map(|z| z.im).collect();
            let ks_re = ks_two_sample(&re, &ref_re);
            let ks_im = ks_two_sample(&im, &ref_im);
            if let (Ok(a), Ok(b)) = (&ks_re, &ks_im) {
                put_ks(&mut agg, "ks_re", a);
                put_ks(&mut agg, "ks_im", b);
                agg.put("ks_accept", (a.accept && b.accept) as u8 as f64);
            }
        }
    }
    Ok(agg.0)
}

#[derive(Default)]
struct Aggregates(BTreeMap<String, f64>);

impl Aggregates {
    /// Non-finite values are dropped: the report format has no encoding for them.
    fn put(&mut self, key: &str, value: f64) {
        if value.is_finite() {
            self.0.insert(key.to_string(), value);
        }
    }
}

fn put_ks(agg: &mut Aggregates, prefix: &str, ks: &outliers_core::stats::KsResult) {
    agg.put(&format!("{prefix}.statistic"), ks.statistic);
    agg.put(&format!("{prefix}.threshold"), ks.threshold);
    agg.put(&format!("{prefix}.p_value"), ks.p_value);
    agg.put(&format!("{prefix}.accept"), ks.accept as u8 as f64);
}

fn fraction(flags: impl Iterator<Item = bool>) -> f64 {
    let (mut hit, mut total) = (0usize, 0usize);
    for f in flags {
        total += 1;
        hit += f as usize;
    }
    if total == 0 {
        f64::NAN
    } else {
        hit as f64 / total as f64
    }
}

/// Distance from `z` to the boundary of `region`; exact for disks and annuli.
fn boundary_distance(region: &Region, boundary: &[Complex64], z: Complex64) -> f64 {
    match region {
        Region::Disk { center, radius } | Region::ComplementDisk { center, radius } => ((z - center).norm() - radius).abs(),
        Region::Annulus { center, r_in, r_out } => {
            let d = (z - center).norm();
            (d - r_in).abs().min((d - r_out).abs())
        }
        _ => boundary.iter().map(|b| (b - z).norm()).fold(f64::INFINITY, f64::min),
    }
}
