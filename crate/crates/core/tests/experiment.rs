use std::fs;
use std::path::Path;
use std::time::Instant;

use tubalkit::experiment::{
    run_experiment, ExperimentConfig, ModeKind, ProblemKind, SolverKind, CSV_HEADER, SUMMARY_COLUMNS,
};
use tubalkit::{ProjectionMode, StepSize, TubalError};

fn ov(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

fn field_of(e: TubalError) -> (Option<usize>, String) {
    match e {
        TubalError::Config { line, field, .. } => (line, field),
        other => panic!("expected a config error, got {other}"),
    }
}

#[test]
fn completion_defaults() {
    let c = ExperimentConfig::from_sources(None, &[]).unwrap();
    assert_eq!(c, ExperimentConfig::completion());
    assert_eq!(c.problem, ProblemKind::Completion);
    assert_eq!(c.step, StepSize::Fixed(1.0));
    assert_eq!(c.iterations, 800);
    assert_eq!(c.tau_fraction, 0.7);
    assert_eq!(c.solver, SolverKind::Fista);
    assert_eq!((c.dims.clone(), c.r, c.rho), (vec![50, 50, 50], 2, 0.6));
    assert_eq!(c.projection_mode(), ProjectionMode::TruncatedCertified(2));
}

#[test]
fn rpca_defaults() {
    let c = ExperimentConfig::from_sources(Some("problem = rpca"), &[]).unwrap();
    assert_eq!(c.step, StepSize::Fixed(1.0));
    assert_eq!(c.iterations, 10_000);
    assert_eq!(c.tau_fraction, 0.75);
    assert_eq!(c.solver, SolverKind::Eg);
    assert_eq!((c.dims.clone(), c.r, c.m), (vec![100, 100, 100], 5, 0.05));
}

#[test]
fn file_then_overrides() {
    let text = "# comment\nproblem = completion\n\ndims = 6x5x4  # trailing\nr = 1\nseeds = 1..3, 7\neta = auto\nmode = full\n";
    let c = ExperimentConfig::from_sources(Some(text), &ov(&[("r", "2"), ("iterations", "12")])).unwrap();
    assert_eq!(c.dims, vec![6, 5, 4]);
    assert_eq!(c.r, 2);
    assert_eq!(c.iterations, 12);
    assert_eq!(c.seeds, vec![1, 2, 3, 7]);
    assert_eq!(c.step, StepSize::Auto);
    assert_eq!(c.mode, ModeKind::Full);
    let back = ExperimentConfig::from_sources(Some(&c.to_text()), &[]).unwrap();
    assert_eq!(back, c);
}

#[test]
fn problem_override_picks_defaults() {
    let c = ExperimentConfig::from_sources(Some("problem = completion\nr = 3\n"), &ov(&[("problem", "rpca")])).unwrap();
    assert_eq!(c.problem, ProblemKind::Rpca);
    assert_eq!(c.r, 3);
    assert_eq!(c.iterations, 10_000);
}

#[test]
fn errors_name_line_and_field() {
    let e = ExperimentConfig::from_sources(Some("dims = 4x4x4\nr = two\n"), &[]).unwrap_err();
    assert_eq!(field_of(e), (Some(2), "r".to_string()));
    let e = ExperimentConfig::from_sources(Some("dims = 4x4x4\nnot a pair\n"), &[]).unwrap_err();
    assert_eq!(field_of(e).0, Some(2));
    let e = ExperimentConfig::from_sources(Some("colour = red\n"), &[]).unwrap_err();
    assert_eq!(field_of(e), (Some(1), "colour".to_string()));
    let e = ExperimentConfig::from_sources(None, &ov(&[("solver", "newton")])).unwrap_err();
    assert_eq!(field_of(e), (None, "solver".to_string()));
    assert!(e_msg("seeds = 5..2").contains("seeds"));
}

fn e_msg(text: &str) -> String {
    ExperimentConfig::from_sources(Some(text), &[]).unwrap_err().to_string()
}

#[test]
fn validation_rules() {
    let bad = [
        ("seeds = ", "seeds"),
        ("rho = 0", "rho"),
        ("rho = 1.5", "rho"),
        ("r = 0", "r"),
        ("r = 60", "r"),
        ("tau_fraction = -1", "tau_fraction"),
        ("eta = 0", "eta"),
        ("iterations = 0", "iterations"),
        ("solver = eg", "solver"),
        ("dims = 4x4", "dims"),
        ("proj_rank = 50", "proj_rank"),
        ("problem = rpca\nsolver = fista", "solver"),
        ("problem = rpca\nr = 2\ndims = 4x5x4", "dims"),
        ("problem = rpca\nm = 0", "m"),
    ];
    for (text, field) in bad {
        let e = ExperimentConfig::from_sources(Some(text), &[]).unwrap_err();
        assert!(e.is_config());
        assert_eq!(field_of(e).1, field, "{text}");
    }
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

fn without_wall_time(summary: &str) -> String {
    summary
        .lines()
        .map(|l| {
            let mut f: Vec<&str> = l.split(',').collect();
            if f.len() == SUMMARY_COLUMNS.len() {
                f[6] = "";
            }
            f.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn smoke_run_emits_all_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a");
    let cfg = ExperimentConfig::from_sources(
        Some("dims = 4x4x4\nr = 1\nseeds = 1\n"),
        &ov(&[("output", out.to_str().unwrap())]),
    )
    .unwrap();
    let start = Instant::now();
    let res = run_experiment(&cfg).unwrap();
    assert!(start.elapsed().as_secs_f64() < 1.0);
    assert_eq!(res.runs.len(), 1);
    let summary = read(&out, "summary.csv");
    let mut lines = summary.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    assert_eq!(lines.next().unwrap(), SUMMARY_COLUMNS.join(","));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row.len(), SUMMARY_COLUMNS.len());
    assert_eq!(row[0], "1");
    assert!(lines.next().unwrap().starts_with("mean,"));
    let trace = read(&out, "trace_seed1.csv");
    assert!(trace.starts_with(CSV_HEADER));
    assert_eq!(trace.lines().count(), 2 + 801);
    let cfg_back = ExperimentConfig::from_file(out.join("config.txt"), &[]).unwrap();
    assert_eq!(cfg_back, cfg);
}

#[test]
fn reruns_are_byte_identical_and_means_exact() {
    let dir = tempfile::tempdir().unwrap();
    let text = "dims = 6x6x3\nr = 2\niterations = 60\nseeds = 3,4,5\nsolver = rfgm\nrestart_every = 10\n";
    let mut summaries = Vec::new();
    for name in ["x", "y"] {
        let out = dir.path().join(name);
        let cfg = ExperimentConfig::from_sources(Some(text), &ov(&[("output", out.to_str().unwrap())])).unwrap();
        let res = run_experiment(&cfg).unwrap();
        let n = res.runs.len() as f64;
        let mean_rec = res.runs.iter().map(|r| r.recovery_error).sum::<f64>() / n;
        assert!((res.mean.recovery_error - mean_rec).abs() <= 1e-12);
        let mean_gap = res.runs.iter().map(|r| r.dual_gap).sum::<f64>() / n;
        assert!((res.mean.dual_gap - mean_gap).abs() <= 1e-12);
        summaries.push((read(&out, "summary.csv"), read(&out, "trace_seed4.csv")));
    }
    assert_eq!(without_wall_time(&summaries[0].0), without_wall_time(&summaries[1].0));
    assert_eq!(summaries[0].1, summaries[1].1);

    // mean row recomputed from the written per-seed rows
    let rows: Vec<Vec<f64>> = summaries[0]
        .0
        .lines()
        .skip(2)
        .map(|l| l.split(',').skip(1).map(|v| v.parse().unwrap_or(f64::NAN)).collect())
        .collect();
    let (seed_rows, mean_row) = rows.split_at(3);
    for col in [0, 1, 2, 3, 6] {
        let m = seed_rows.iter().map(|r| r[col]).sum::<f64>() / 3.0;
        assert!((m - mean_row[0][col]).abs() <= 1e-12 * m.abs().max(1.0), "column {col}");
    }
}

#[test]
fn small_rpca_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_sources(
        Some("problem = rpca\nn = 8\nr = 2\nm = 0.05\niterations = 40\ngap_every = 10\nseeds = 1\n"),
        &ov(&[("output", dir.path().to_str().unwrap())]),
    )
    .unwrap();
    let res = run_experiment(&cfg).unwrap();
    let r = &res.runs[0];
    assert!(r.recovery_error.is_finite() && r.dual_gap.is_finite());
    assert_eq!(r.trace.len(), 41);
    assert!(read(dir.path(), "trace_seed1.csv").lines().count() == 43);
}
