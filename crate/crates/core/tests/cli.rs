use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sparsica::io::{load_matrix, save_matrix, Format};
use sparsica::Matrix;

fn sparsica(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sparsica"))
        .args(args)
        .env("SPARSICA_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Every file in `a` except the manifest has a byte-identical twin in `b`.
fn assert_same_outputs(a: &Path, b: &Path) {
    let mut names: Vec<_> = fs::read_dir(a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() > 1);
    for name in names {
        if name == "manifest.json" {
            continue;
        }
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{name:?} differs");
    }
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(sparsica(&["--help"]).status.code(), Some(0));
    assert_eq!(sparsica(&["--version"]).status.code(), Some(0));
    assert_eq!(sparsica(&[]).status.code(), Some(2));
}

#[test]
fn simulate_writes_dataset_and_rejects_bad_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    let o = sparsica(&["simulate", "--out", s(&out), "--seed", "4", "--frames", "30"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let observed = load_matrix(out.join("observed.bin"), Format::Binary).unwrap();
    assert_eq!(observed.shape(), (30, 1089));
    assert_eq!(load_matrix(out.join("sources.bin"), Format::Binary).unwrap().shape(), (3, 1089));
    assert_eq!(load_matrix(out.join("timecourses.bin"), Format::Binary).unwrap().shape(), (30, 3));
    let mask = load_matrix(out.join("mask_1.csv"), Format::Csv).unwrap();
    assert_eq!(mask.shape(), (33, 33));
    assert!(out.join("params.json").is_file() && out.join("manifest.json").is_file());

    for (flag, value) in [("--snr", "-1"), ("--snr", "0"), ("--ar", "1.5"), ("--fwhm", "-2"), ("--frames", "1")] {
        let o = sparsica(&["simulate", "--out", s(&out), "--seed", "1", flag, value]);
        assert_eq!(o.status.code(), Some(2), "{flag} {value}");
        assert!(stderr(&o).contains(flag), "{flag}: {}", stderr(&o));
    }
}

#[test]
fn fit_every_algorithm_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    assert_eq!(sparsica(&["simulate", "--out", s(&sim), "--seed", "8"]).status.code(), Some(0));
    let input = sim.join("observed.bin");
    for algo in ["sparse-ica", "fastica", "infomax", "amuse"] {
        let out = dir.path().join(algo);
        let o = sparsica(&["fit", "--input", s(&input), "--algo", algo, "--out", s(&out), "--seed", "3"]);
        assert_eq!(o.status.code(), Some(0), "{algo}: {}", stderr(&o));
        assert_eq!(stderr(&o).contains("deterministic"), algo == "amuse");
        let maps = load_matrix(out.join("components.bin"), Format::Binary).unwrap();
        assert_eq!(maps.shape(), (1089, 3));
        let tc = load_matrix(out.join("timecourses.bin"), Format::Binary).unwrap();
        assert_eq!(tc.shape(), (50, 3));
        let model: serde_json::Value = serde_json::from_slice(&fs::read(out.join("model.json")).unwrap()).unwrap();
        assert_eq!(model["algorithm"], algo);

        let again = dir.path().join(format!("{algo}-replay"));
        let o = sparsica(&["replay", "--manifest", s(&out.join("manifest.json")), "--out", s(&again)]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert_same_outputs(&out, &again);
    }
}

#[test]
fn fit_with_fixed_nu_and_grid() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    sparsica(&["simulate", "--out", s(&sim), "--seed", "2"]);
    let input = sim.join("observed.bin");
    let fixed = dir.path().join("fixed");
    let o = sparsica(&["fit", "--input", s(&input), "--algo", "sparse-ica", "--nu", "0.5", "--out", s(&fixed)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let model: serde_json::Value = serde_json::from_slice(&fs::read(fixed.join("model.json")).unwrap()).unwrap();
    assert_eq!(model["nu"], 0.5);
    let grid = dir.path().join("grid");
    let o = sparsica(&["fit", "--input", s(&input), "--algo", "sparse-ica", "--nu-grid", "0.1,1", "--out", s(&grid)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let model: serde_json::Value = serde_json::from_slice(&fs::read(grid.join("model.json")).unwrap()).unwrap();
    assert_eq!(model["nu_selection"].as_array().unwrap().len(), 2);
    let o = sparsica(&["fit", "--input", s(&input), "--algo", "sparse-ica", "--nu", "1", "--nu-grid", "1", "--out", s(&grid)]);
    assert_eq!(o.status.code(), Some(2));
    let o = sparsica(&["fit", "--input", s(&input), "--algo", "fastica", "--nu", "1", "--out", s(&grid)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn fit_usage_and_runtime_errors() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = sparsica::io::RngStream::new(1);
    let base = rng.normal_matrix(4, 40);
    // frames alternate between two patterns, so the 40 x 5 spatial data has rank two
    let rank_deficient = Matrix::from_fn(5, 40, |i, j| base[(i % 2, j)]);
    let path = dir.path().join("x.csv");
    save_matrix(&rank_deficient, &path, Format::Csv).unwrap();
    let out = dir.path().join("out");

    let o = sparsica(&["fit", "--input", s(&path), "--algo", "fastica", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2), "missing --q");
    assert!(stderr(&o).contains("--q"));
    let o = sparsica(&["fit", "--input", s(&path), "--algo", "fastica", "--q", "4", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1), "rank deficient: {}", stderr(&o));
    assert!(stderr(&o).contains("rank"), "{}", stderr(&o));
    let o = sparsica(&["fit", "--input", s(&path), "--algo", "fastica", "--q", "9", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    let o = sparsica(&["fit", "--input", s(&dir.path().join("none.bin")), "--algo", "amuse", "--q", "2", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
    let o = sparsica(&["fit", "--input", s(&path), "--algo", "jade", "--q", "2", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn export_maps_writes_pgm_and_checks_shape() {
    let dir = tempfile::tempdir().unwrap();
    let comps = Matrix::from_fn(12, 2, |i, j| if j == 0 { i as f64 } else { 1.0 });
    let path = dir.path().join("c.bin");
    save_matrix(&comps, &path, Format::Binary).unwrap();
    let out = dir.path().join("maps");
    let o = sparsica(&["export-maps", "--components", s(&path), "--shape", "3x4", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let img = fs::read(out.join("component_0.pgm")).unwrap();
    let header = b"P5\n4 3\n255\n";
    assert_eq!(&img[..header.len()], header);
    assert_eq!(img.len(), header.len() + 12);
    assert_eq!(img[header.len()], 0);
    assert_eq!(*img.last().unwrap(), 255);
    let flat = fs::read(out.join("component_1.pgm")).unwrap();
    assert!(flat[header.len()..].iter().all(|&b| b == 128));

    let o = sparsica(&["export-maps", "--components", s(&path), "--shape", "33x33", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--shape"));
}

#[test]
fn bench_is_reproducible_and_validates_algorithms() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let o = sparsica(&["bench", "--trials", "2", "--algos", "fastica,amuse", "--seed", "6", "--out", s(&a)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary = fs::read_to_string(a.join("summary.csv")).unwrap();
    assert!(summary.starts_with("algorithm,mean,sd,n\n"));
    assert_eq!(summary.lines().count(), 3);
    for f in ["report.json", "trials.csv", "plot_data.csv", "manifest.json"] {
        assert!(a.join(f).is_file(), "{f}");
    }
    let b = dir.path().join("b");
    let o = sparsica(&["replay", "--manifest", s(&a.join("manifest.json")), "--out", s(&b)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_same_outputs(&a, &b);

    let o = sparsica(&["bench", "--trials", "2", "--algos", "fastica,jade", "--seed", "6", "--out", s(&a)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("jade"));
    let o = sparsica(&["bench", "--trials", "1", "--seed", "6", "--out", s(&a)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn replay_of_missing_manifest_fails() {
    let o = sparsica(&["replay", "--manifest", "/nonexistent/manifest.json"]);
    assert_eq!(o.status.code(), Some(1));
}
