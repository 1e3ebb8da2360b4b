use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use addsel::selection::partition;
use addsel::simgen::derive_seed;
use addsel_cli::data::load_csv;
use addsel_cli::report::{CvReport, FitReport, PathReport, ScreenReport, SimulationReport};
use addsel_cli::CliError;
use tempfile::TempDir;

fn addsel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_addsel"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = addsel(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn read<T: serde::de::DeserializeOwned>(path: &Path) -> T {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Example 2 data written by the simulate subcommand.
fn simulated(dir: &TempDir, n: usize, p: usize, seed: u64) -> PathBuf {
    let path = dir.path().join(format!("sim_{n}_{p}_{seed}.csv"));
    ok(&[
        "simulate",
        "--example",
        "2",
        "--n",
        &n.to_string(),
        "--p",
        &p.to_string(),
        "--reps",
        "1",
        "--methods",
        "gl",
        "--seed",
        &seed.to_string(),
        "--write-data",
        s(&path),
    ]);
    path
}

#[test]
fn load_small_file() {
    let dir = TempDir::new().unwrap();
    let path = write(&dir, "a.csv", "y,x1,x2\n1.0,0.1,3\n2.0,0.5,1\n0.5,0.9,2\n");
    let loaded = load_csv(&path, "y").unwrap();
    assert_eq!((loaded.dataset.n(), loaded.dataset.p()), (3, 2));
    assert_eq!(loaded.dataset.name(1), "x2");
    assert_eq!(loaded.dataset.y[1], 2.0);
    assert!(loaded.excluded.is_empty());
}

#[test]
fn load_errors_name_their_location() {
    let dir = TempDir::new().unwrap();
    let path = write(&dir, "a.csv", "y,x1,x2\n1,2,3\n4,5,6\n");
    assert!(matches!(load_csv(&path, "resp"), Err(CliError::MissingColumn(c)) if c == "resp"));

    let rows = "y,x1,x2\n1,2,3\n2,3,4\n3,4,5\n4,5,6\n5,6,abc\n";
    let path = write(&dir, "b.csv", rows);
    match load_csv(&path, "y") {
        Err(CliError::NonNumeric { row, column, .. }) => {
            assert_eq!((row, column.as_str()), (5, "x2"))
        }
        other => panic!("unexpected {other:?}"),
    }
    let err = load_csv(&path, "y").unwrap_err().to_string();
    assert!(err.contains("row 5") && err.contains("x2"), "{err}");

    let path = write(&dir, "c.csv", "y,x1\n1,2\n2,\n");
    assert!(matches!(
        load_csv(&path, "y"),
        Err(CliError::MissingValue { row: 2, .. })
    ));

    let path = write(&dir, "d.csv", "y,x1,k\n1,2,7\n2,1,7\n3,5,7\n");
    let loaded = load_csv(&path, "y").unwrap();
    assert_eq!(loaded.excluded, vec!["k".to_string()]);
    assert_eq!(loaded.dataset.p(), 1);
}

#[test]
fn fit_recovers_simulated_components_and_round_trips() {
    let dir = TempDir::new().unwrap();
    let data = simulated(&dir, 200, 10, 5);
    let out = dir.path().join("fit.json");
    let stdout = ok(&["fit", "--input", s(&data), "--out", s(&out)]);
    let report: FitReport = read(&out);
    assert_eq!(report.selected, vec![0, 1, 2, 3]);
    assert_eq!(report.selected_names, vec!["x1", "x2", "x3", "x4"]);
    assert!(
        stdout.contains("selected 4 component(s): x1, x2, x3, x4"),
        "{stdout}"
    );
    for c in &report.components {
        assert_eq!(c.curve.is_some(), c.selected);
        if let Some(curve) = &c.curve {
            assert_eq!(curve.x.len(), 100);
            assert_eq!(curve.y.len(), 100);
        }
    }
    assert_eq!(report.df, 36.0);

    let args = addsel_cli::args::FitArgs {
        input: addsel_cli::args::InputArgs {
            input: data.clone(),
            response: "y".into(),
        },
        tune: addsel_cli::args::TuneArgs {
            degree: 3,
            knots: 6,
            nu: 0.5,
            grid_size: 100,
            grid_ratio: 1e-3,
            max_fit: 0.999,
        },
        criterion: addsel::Criterion::Bic,
        method: addsel::Method::AdaptiveGroupLasso,
        screen_top_k: None,
        out: None,
    };
    let direct = addsel_cli::commands::run_fit(&args, &mut std::io::sink()).unwrap();
    assert_eq!(direct, report);
    let again: FitReport = serde_json::from_str(&serde_json::to_string(&direct).unwrap()).unwrap();
    assert_eq!(again, direct);
}

#[test]
fn fit_with_screening_reports_input_indices() {
    let dir = TempDir::new().unwrap();
    let data = simulated(&dir, 200, 30, 6);
    let out = dir.path().join("fit.json");
    ok(&[
        "fit",
        "--input",
        s(&data),
        "--screen-top-k",
        "8",
        "--out",
        s(&out),
    ]);
    let report: FitReport = read(&out);
    assert_eq!(report.p, 30);
    assert_eq!(report.screened.as_ref().unwrap().len(), 8);
    assert_eq!(report.components.len(), 8);
    for (j, name) in report.selected.iter().zip(&report.selected_names) {
        assert_eq!(format!("x{}", j + 1), *name);
    }
}

#[test]
fn pure_noise_gives_a_well_formed_report() {
    let dir = TempDir::new().unwrap();
    let mut text = String::from("y,a,b,c\n");
    let mut state: u64 = 12345;
    let mut next = || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    for _ in 0..80 {
        text.push_str(&format!("{},{},{},{}\n", next(), next(), next(), next()));
    }
    let data = write(&dir, "noise.csv", &text);
    let out = dir.path().join("fit.json");
    ok(&[
        "fit",
        "--input",
        s(&data),
        "--criterion",
        "ebic",
        "--out",
        s(&out),
    ]);
    let report: FitReport = read(&out);
    assert!(report.selected.len() <= 1, "{:?}", report.selected);
    assert_eq!(report.components.len(), 3);
    assert_eq!(report.criterion, "EBIC");
}

#[test]
fn failures_exit_nonzero() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "a.csv", "y,x1\n1,2\n2,zz\n");
    let out = addsel(&["fit", "--input", s(&data)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 2"));
    let missing = addsel(&["fit", "--input", s(&dir.path().join("nope.csv"))]);
    assert!(!missing.status.success());
    let usage = addsel(&["fit", "--input", s(&data), "--criterion", "aic"]);
    assert_eq!(usage.status.code(), Some(2));
    let bad_nu = addsel(&["fit", "--input", s(&data), "--nu", "2"]);
    assert!(!bad_nu.status.success());
}

#[test]
fn simulate_is_deterministic_and_complete() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let args = |out: &Path| {
        vec![
            "simulate".to_string(),
            "--example".into(),
            "1".into(),
            "--n".into(),
            "100".into(),
            "--p".into(),
            "8".into(),
            "--reps".into(),
            "2".into(),
            "--seed".into(),
            "9".into(),
            "--criterion".into(),
            "bic,ebic".into(),
            "--out".into(),
            s(out).to_string(),
        ]
    };
    let stdout = ok(&args(&a).iter().map(String::as_str).collect::<Vec<_>>());
    ok(&args(&b).iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let report: SimulationReport = read(&a);
    assert_eq!(report.tables.len(), 2);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&a).unwrap()).unwrap();
    for row in json["tables"][0]["rows"].as_array().unwrap() {
        for key in ["nv", "me", "inc", "cs"] {
            assert!(row[key]["se"].is_number(), "{key}");
        }
    }
    for label in ["AGL", "GL", "OLasso", "LinearLasso"] {
        assert!(report.tables[0]
            .rows
            .iter()
            .any(|r| r.method.label() == label));
        assert!(stdout.contains(label));
    }
    assert!(stdout.contains("NV (se)") && stdout.contains("CS% (se)"));
}

#[test]
fn screen_ranks_planted_columns_first() {
    let dir = TempDir::new().unwrap();
    let mut text = String::from("y,n1,p1,n2,p2,n3,p3\n");
    for i in 0..60 {
        let t = i as f64 / 59.0;
        let wobble = |k: u32| ((i * (7 + k as usize) % 13) as f64) / 13.0;
        let y = 3.0 * t + 0.1 * wobble(1);
        text.push_str(&format!(
            "{y},{},{},{},{},{},{}\n",
            wobble(2),
            t,
            wobble(3),
            t * t,
            wobble(4),
            (t * 3.0).sin()
        ));
    }
    let data = write(&dir, "planted.csv", &text);
    let out = dir.path().join("screen.json");
    ok(&[
        "screen",
        "--input",
        s(&data),
        "--screen-top-k",
        "3",
        "--out",
        s(&out),
    ]);
    let r: ScreenReport = read(&out);
    let mut top: Vec<&str> = r.ranking.iter().map(|e| e.name.as_str()).collect();
    top.sort_unstable();
    assert_eq!(top, vec!["p1", "p2", "p3"]);

    let full = dir.path().join("full.json");
    ok(&["screen", "--input", s(&data), "--out", s(&full)]);
    let again = dir.path().join("again.json");
    ok(&["screen", "--input", s(&data), "--out", s(&again)]);
    let r: ScreenReport = read(&full);
    assert_eq!(r.ranking.len(), 6);
    assert_eq!(
        std::fs::read(&full).unwrap(),
        std::fs::read(&again).unwrap()
    );
}

#[test]
fn cross_validation_report() {
    let dir = TempDir::new().unwrap();
    let data = simulated(&dir, 120, 6, 8);
    let out = dir.path().join("cv.json");
    let args = [
        "cv",
        "--input",
        s(&data),
        "--folds",
        "6",
        "--reps",
        "2",
        "--seed",
        "3",
        "--out",
        s(&out),
    ];
    ok(&args);
    let first = std::fs::read(&out).unwrap();
    ok(&args);
    assert_eq!(first, std::fs::read(&out).unwrap());
    let r: CvReport = read(&out);
    assert_eq!(r.repetitions.len(), 2);
    for (k, rep) in r.repetitions.iter().enumerate() {
        assert_eq!(rep.per_fold_pe.len(), 6);
        let folds = partition(120, 6, derive_seed(3, k as u64)).unwrap();
        assert!(folds.iter().all(|f| f.len() == 20));
        let mean = rep.per_fold_pe.iter().sum::<f64>() / 6.0;
        assert!((mean - rep.mean_pe).abs() <= 1e-12 * mean);
    }
    let mean = r.repetitions.iter().map(|c| c.mean_pe).sum::<f64>() / 2.0;
    assert!((mean - r.mean_pe).abs() <= 1e-12 * mean);
}

#[test]
fn path_report_marks_criterion_choices() {
    let dir = TempDir::new().unwrap();
    let data = simulated(&dir, 150, 8, 4);
    let out = dir.path().join("path.json");
    let stdout = ok(&[
        "path",
        "--input",
        s(&data),
        "--grid-size",
        "40",
        "--out",
        s(&out),
    ]);
    let r: PathReport = read(&out);
    assert!(!r.points.is_empty() && r.points.len() <= 40);
    assert!(r.points[0].selected.is_empty());
    assert!(r.points[r.ebic_index].point.df <= r.points[r.bic_index].point.df);
    assert!(stdout.contains("<- BIC"));
    assert_eq!(r.names.len(), 8);
}
