use std::process::Command;

use num_complex::Complex64;
use outliers_cli::figures::figure_config;
use outliers_cli::report::TrialOutcome;
use outliers_cli::svg::{emit_scatter, render_scatter, Layer};
use outliers_cli::{aggregate, run, ExperimentConfig, ReportError, RunReport, TrialRecord};
use outliers_core::region::Region;
use outliers_core::PointSet;

fn small_config(analysis: &str, extra: &str) -> ExperimentConfig {
    let text = format!(
        r#"
deformation = {{ kind = "nilpotent_shift" }}
entry_law = "real_gaussian"
sigma = 0.7071067811865476
n = 60
trials = 3
seed = 11
region = {{ kind = "disk", center = [0.0, 0.0], radius = 0.55 }}
analysis = {{ kind = "{analysis}" {extra} }}
"#
    );
    ExperimentConfig::from_toml_str(&text).unwrap()
}

/// Minimal well-formedness check: every opened element is closed in order.
fn assert_well_formed_svg(s: &str) {
    assert!(s.starts_with("<?xml"));
    let mut stack: Vec<String> = Vec::new();
    let mut rest = s;
    while let Some(open) = rest.find('<') {
        let close = rest[open..].find('>').expect("unterminated tag") + open;
        let tag = &rest[open + 1..close];
        rest = &rest[close + 1..];
        if tag.starts_with('?') {
            continue;
        }
        if let Some(name) = tag.strip_prefix('/') {
            assert_eq!(stack.pop().as_deref(), Some(name.trim()), "mismatched closing tag");
        } else if !tag.ends_with('/') {
            stack.push(tag.split_whitespace().next().unwrap().to_string());
        }
    }
    assert!(stack.is_empty(), "unclosed elements {stack:?}");
}

#[test]
fn identical_config_gives_identical_records() {
    let mut c = small_config("spectrum_scatter", "");
    c.trials = 1;
    let a = run(&c, Some(1)).unwrap();
    let b = run(&c, Some(1)).unwrap();
    assert_eq!(a.trials, b.trials);
    assert_eq!(a.aggregates, b.aggregates);
    assert_eq!(a.config_hash, b.config_hash);
}

#[test]
fn records_do_not_depend_on_thread_count() {
    let c = small_config("spectrum_scatter", "");
    let one = run(&c, Some(1)).unwrap();
    let three = run(&c, Some(3)).unwrap();
    assert_eq!(one.trials, three.trials);
    assert_eq!(one.aggregates, three.aggregates);
}

#[test]
fn every_analysis_runs_on_small_inputs() {
    let configs = [
        small_config("spectrum_scatter", ", targets = [[0.0, 0.0]]"),
        small_config("support_test_grid", ", grid = 8, extent = 1.5, atoms = 64"),
        small_config("appendix_clt", r#", law_y = "real_gaussian", operator = { kind = "identity" }"#),
        small_config(
            "gaf_compare",
            r#", series = { kind = "inner_series", sigma = 0.7071067811865476 }, kernel = { kind = "k_inner", sigma = 0.7071067811865476 }, partition = [{ kind = "disk", center = [0.0, 0.0], radius = 0.55 }], method = "dense""#,
        ),
    ];
    for c in &configs {
        let r = run(c, Some(1)).unwrap();
        assert_eq!(r.trials.iter().filter(|t| matches!(t.outcome, TrialOutcome::Failed { .. })).count(), 0, "{:?}", c.analysis);
        assert!(r.aggregates.contains_key("trials_total"));
    }
}

#[test]
fn fluctuation_analyses_run() {
    let text = r#"
entry_law = "complex_gaussian"
sigma = 0.7071067811865476
n = 80
trials = 3
seed = 5
region = { kind = "disk", center = [2.0, 0.0], radius = 0.5 }
analysis = { kind = "stable_fluct" }
[deformation]
kind = "theta_diag"
theta = [2.0, 0.0]
r = 1
hat = { kind = "zero" }
"#;
    let c = ExperimentConfig::from_toml_str(text).unwrap();
    let r = run(&c, Some(1)).unwrap();
    assert_eq!(r.aggregates["trials_failed"], 0.0);
    assert!(r.aggregates["accept_rate"] > 0.0);
}

#[test]
fn failed_trials_are_recorded_and_skipped_by_aggregation() {
    let c = small_config("spectrum_scatter", "");
    let report = run(&c, Some(1)).unwrap();
    let mut trials = report.trials.clone();
    trials.push(TrialRecord {
        index: 3,
        outcome: TrialOutcome::Failed { error: "no convergence".into() },
    });
    let agg = aggregate(&c, &trials).unwrap();
    assert_eq!(agg["trials_failed"], 1.0);
    assert_eq!(agg["trials_total"], 4.0);
    assert_eq!(agg["mean_count"], report.aggregates["mean_count"]);
}

#[test]
fn save_load_save_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let report = run(&small_config("spectrum_scatter", ""), Some(1)).unwrap();
    let p1 = dir.path().join("a.json");
    let p2 = dir.path().join("b.json");
    report.save(&p1).unwrap();
    let loaded = RunReport::load(&p1).unwrap();
    assert_eq!(loaded, report);
    loaded.save(&p2).unwrap();
    assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    let again = aggregate(&loaded.config, &loaded.trials).unwrap();
    assert_eq!(again, loaded.aggregates);
}

#[test]
fn future_schema_is_refused() {
    let report = run(&small_config("spectrum_scatter", ""), Some(1)).unwrap();
    let text = report.to_json().replacen("\"schema_version\": 1", "\"schema_version\": 99", 1);
    assert!(matches!(RunReport::from_json(&text), Err(ReportError::FutureSchema { found: 99, .. })));
    let old = report.to_json().replacen("\"schema_version\": 1", "\"schema_version\": 0", 1);
    assert!(matches!(RunReport::from_json(&old), Err(ReportError::SchemaMismatch { .. })));
}

#[test]
fn scatter_files_are_well_formed_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let annulus = Region::annulus(Complex64::new(0.0, 0.0), 0.7071067811865476, 1.224744871391589);
    let empty = dir.path().join("empty.svg");
    emit_scatter(&PointSet::default(), &[annulus.clone()], &empty).unwrap();
    let s = std::fs::read_to_string(&empty).unwrap();
    assert_well_formed_svg(&s);
    assert_eq!(s.matches("<circle").count(), 2);

    let report = run(&small_config("spectrum_scatter", ""), Some(1)).unwrap();
    let TrialOutcome::Spectrum { spectrum: Some(eigs), .. } = &report.trials[0].outcome else {
        panic!("first trial keeps its spectrum");
    };
    let mut pts = eigs.to_vec();
    while pts.len() < 500 {
        pts.extend(eigs.iter().map(|z| z * 1.01));
    }
    pts.truncate(500);
    let pts = PointSet::new(pts);
    let full = dir.path().join("full.svg");
    emit_scatter(&pts, &[annulus.clone()], &full).unwrap();
    let text = std::fs::read_to_string(&full).unwrap();
    assert_well_formed_svg(&text);
    assert_eq!(text.matches("<circle").count(), 502);
    let layers = [Layer { label: "eigs", points: &pts }];
    assert_eq!(render_scatter(&layers, &[annulus.clone()]), render_scatter(&layers, &[annulus]));
}

#[test]
fn figure_two_concentrates_at_four_outliers() {
    let mut c = figure_config(2).unwrap();
    c.trials = 3;
    let r = run(&c, None).unwrap();
    assert_eq!(r.aggregates.get("count_hist.4").copied(), Some(3.0));
}

#[test]
fn figure_four_has_inner_disk_eigenvalues() {
    let mut c = figure_config(4).unwrap();
    c.trials = 5;
    let r = run(&c, None).unwrap();
    assert!(r.aggregates["mean_count"] > 0.0);
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_outliers"))
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.toml");
    let mut c = small_config("spectrum_scatter", "");
    c.trials = 1;
    std::fs::write(&good, c.to_toml_string()).unwrap();

    let ok = bin().arg("run").arg(&good).arg("--out-dir").arg(dir.path()).output().unwrap();
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    let report_path = dir.path().join("good.report.json");
    assert!(report_path.exists() && dir.path().join("good.svg").exists() && dir.path().join("good.points.csv").exists());

    let plot = dir.path().join("plot.svg");
    let st = bin().arg("plot").arg(&report_path).arg("--out").arg(&plot).status().unwrap();
    assert_eq!(st.code(), Some(0));
    assert_well_formed_svg(&std::fs::read_to_string(&plot).unwrap());

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, format!("{}\nsigmaa = 1.0\n", c.to_toml_string())).unwrap();
    let st = bin().arg("run").arg(&bad).arg("--out-dir").arg(dir.path()).status().unwrap();
    assert_eq!(st.code(), Some(2));

    let mut strict = c.clone();
    strict.checks.push(outliers_cli::Check {
        metric: "mean_count".into(),
        min: Some(1e9),
        max: None,
    });
    let strict_path = dir.path().join("strict.toml");
    std::fs::write(&strict_path, strict.to_toml_string()).unwrap();
    let st = bin().arg("run").arg(&strict_path).arg("--out-dir").arg(dir.path()).arg("--assert").status().unwrap();
    assert_eq!(st.code(), Some(4));
    let st = bin().arg("run").arg(&strict_path).arg("--out-dir").arg(dir.path()).status().unwrap();
    assert_eq!(st.code(), Some(0));

    let future = dir.path().join("future.json");
    let text = std::fs::read_to_string(&report_path).unwrap().replacen("\"schema_version\": 1", "\"schema_version\": 7", 1);
    std::fs::write(&future, text).unwrap();
    let st = bin().arg("plot").arg(&future).arg("--out").arg(&plot).status().unwrap();
    assert_eq!(st.code(), Some(2));

    let st = bin().args(["reproduce-figure", "9"]).status().unwrap();
    assert_eq!(st.code(), Some(2));
}

#[test]
fn support_grid_subcommand_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cycle.toml");
    let mut c = small_config("spectrum_scatter", "");
    c.deformation = outliers_core::DeformationKind::Cycle;
    std::fs::write(&cfg, c.to_toml_string()).unwrap();
    let st = bin()
        .arg("support-grid")
        .arg(&cfg)
        .args(["--grid", "12", "--extent", "1.5", "--out-dir"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));
    let r = RunReport::load(&dir.path().join("cycle.support.report.json")).unwrap();
    assert_eq!(r.aggregates["grid_points"], 144.0);
}

#[test]
fn reproduce_figure_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["reproduce-figure", "4", "--trials", "1", "--seed", "9", "--out-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let r = RunReport::load(&dir.path().join("fig4.report.json")).unwrap();
    assert_eq!((r.seed, r.trials.len()), (9, 1));
}
