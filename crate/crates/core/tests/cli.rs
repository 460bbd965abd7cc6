use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pointmatch::cli::MatchDocument;
use pointmatch::energy::ConcaveEnergy;
use pointmatch::matcher::build_energy;
use pointmatch::{MatchOptions, Mode, PairCount, PointSet};

fn workdir(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn pointmatch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pointmatch")).args(args).output().expect("binary runs")
}

fn model() -> PointSet {
    PointSet::from_points(&[
        [0.0, 0.0],
        [1.0, 0.1],
        [0.3, 0.9],
        [-0.7, 0.4],
        [-0.2, -0.8],
        [0.8, -0.6],
        [0.5, 0.45],
        [-0.5, -0.3],
    ])
    .unwrap()
}

const ANGLE: f64 = 0.6;

/// The model scaled by 1.2, rotated by `ANGLE`, shifted and listed in
/// reverse order, plus two extra points.
fn scene() -> PointSet {
    let (c, s) = (ANGLE.cos(), ANGLE.sin());
    let model = model();
    let mut pts: Vec<[f64; 2]> = (0..model.len())
        .rev()
        .map(|i| model.point(i))
        .map(|p| [1.2 * (c * p[0] - s * p[1]) + 0.4, 1.2 * (s * p[0] + c * p[1]) - 0.1])
        .collect();
    pts.push([3.0, 3.0]);
    pts.push([-3.0, 2.5]);
    PointSet::from_points(&pts).unwrap()
}

fn write_sets(dir: &Path) -> (String, String) {
    let (m, s) = (dir.join("model.txt"), dir.join("scene.txt"));
    model().write(&m).unwrap();
    scene().write(&s).unwrap();
    (m.to_string_lossy().into_owned(), s.to_string_lossy().into_owned())
}

#[test]
fn match_writes_a_consistent_document() {
    let dir = workdir("match");
    let (m, s) = write_sets(&dir);
    let json = dir.join("out.json");
    let svg = dir.join("out.svg");
    let out = pointmatch(&[
        "match",
        &m,
        &s,
        "--mode",
        "sim2d",
        "--np",
        "8",
        "--bound",
        "fast",
        "--max-iterations",
        "300",
        "--workers",
        "1",
        "--out-json",
        json.to_str().unwrap(),
        "--out-svg",
        svg.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: MatchDocument = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(doc.mode, Mode::Sim2d);
    assert_eq!(doc.n_p, 8);
    assert_eq!(doc.pairs, (0..8).map(|i| (i, 7 - i)).collect::<Vec<_>>());
    assert_eq!(doc.bounds_history.len(), doc.iterations + 1);

    // the reported energy is the energy of the reported pairs
    let options = MatchOptions::new(Mode::Sim2d, PairCount::Absolute(8));
    let energy = build_energy(&model(), &scene(), &options).unwrap();
    let p = energy.feasible().from_pairs(&doc.pairs).unwrap();
    assert!((energy.eval_e(&p).unwrap() - doc.energy).abs() < 1e-9);

    let l = &doc.transform.linear;
    assert!((l[1][0].atan2(l[0][0]) - ANGLE).abs() < 1e-4);
    assert!((doc.transform.scale.unwrap() - 1.2).abs() < 1e-6);
    let moved = doc.transform.apply(&[0.0, 0.0]);
    assert!((moved[0] - 0.4).abs() < 1e-6 && (moved[1] + 0.1).abs() < 1e-6);

    let svg = std::fs::read_to_string(&svg).unwrap();
    assert!(svg.starts_with("<svg") && svg.matches("<line").count() == 8);
}

#[test]
fn match_prints_json_without_out_file() {
    let dir = workdir("stdout");
    let (m, s) = write_sets(&dir);
    let out = pointmatch(&["match", &m, &s, "--np-frac", "0.5", "--bound", "fast", "--max-iterations", "20"]);
    assert!(out.status.success());
    let doc: MatchDocument = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc.n_p, 4);
}

#[test]
fn input_errors_exit_with_code_two() {
    let dir = workdir("errors");
    let (m, s) = write_sets(&dir);
    let cube = dir.join("cube.txt");
    std::fs::write(&cube, "0 0 0\n1 0 0\n0 1 0\n").unwrap();
    let garbage = dir.join("garbage.txt");
    std::fs::write(&garbage, "0 0\n1 x\n").unwrap();
    let cube = cube.to_str().unwrap();
    let garbage = garbage.to_str().unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["match", &m, &s, "--np", "9"],
        vec!["match", &m, &s, "--np", "3", "--mode", "nonsense"],
        vec!["match", &m, &s, "--np", "3", "--bound", "simplex"],
        vec!["match", &m, cube, "--np", "3"],
        vec!["match", &m, garbage, "--np", "3"],
        vec!["match", &m, "/nonexistent/scene.txt", "--np", "3"],
        vec!["match", &m, &s, "--np", "3", "--scale-range", "2:1"],
        vec!["match", &m, &s, "--np", "3", "--theta0", "1,0"],
        vec!["frobnicate"],
    ];
    for args in cases {
        let out = pointmatch(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn help_and_version_succeed() {
    for flag in ["--help", "--version"] {
        let out = pointmatch(&[flag]);
        assert_eq!(out.status.code(), Some(0));
        assert!(!out.stdout.is_empty());
    }
}

#[test]
fn bench_writes_reproducible_csv() {
    let dir = workdir("bench");
    let suite = dir.join("suite.json");
    std::fs::write(
        &suite,
        r#"{"base": {"count": 12, "max_iterations": 10, "seed": 3}, "trials": 2, "outlier_ratios": [0.0, 0.5]}"#,
    )
    .unwrap();
    let run = |name: &str| {
        let csv = dir.join(name);
        let svg = dir.join(format!("{name}.svg"));
        let out = pointmatch(&[
            "bench",
            suite.to_str().unwrap(),
            "--workers",
            "1",
            "--out-csv",
            csv.to_str().unwrap(),
            "--out-svg",
            svg.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(std::fs::read_to_string(svg).unwrap().contains("<polyline"));
        std::fs::read_to_string(csv).unwrap()
    };
    let first = run("a.csv");
    assert_eq!(first, run("b.csv"));
    let lines: Vec<&str> = first.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[0].starts_with("seed,shape"));
    assert!(lines[1].starts_with("3,fish,2,12,12,"));
    assert!(lines[3].starts_with("3,fish,2,18,18,"));

    std::fs::write(&suite, r#"{"trials": 1, "unknown_field": 3}"#).unwrap();
    let out = pointmatch(&["bench", suite.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bounds_compare_traces_both_schemes() {
    let dir = workdir("compare");
    let instance = dir.join("instance.json");
    std::fs::write(&instance, r#"{"count": 10, "outlier_ratio": 0.2, "seed": 1}"#).unwrap();
    let csv = dir.join("bounds.csv");
    let svg = dir.join("bounds.svg");
    let out = pointmatch(&[
        "bounds-compare",
        instance.to_str().unwrap(),
        "--iterations",
        "4",
        "--workers",
        "1",
        "--out-csv",
        csv.to_str().unwrap(),
        "--out-svg",
        svg.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("runtime ratio"));
    let text = std::fs::read_to_string(csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "iteration,lp_lower,lp_upper,fast_lower,fast_upper");
    assert_eq!(lines.len(), 6);
    for line in &lines[1..] {
        let v: Vec<f64> = line.split(',').skip(1).map(|x| x.parse().unwrap()).collect();
        assert!(v[0] <= v[1] + 1e-9 && v[2] <= v[3] + 1e-9, "{line}");
        // the lp relaxation is at least as tight as the fast one
    }
    let last: Vec<f64> = lines[5].split(',').skip(1).map(|x| x.parse().unwrap()).collect();
    assert!(last[0] >= last[2] - 1e-6, "{last:?}");
    assert_eq!(std::fs::read_to_string(svg).unwrap().matches("<polyline").count(), 4);
}
