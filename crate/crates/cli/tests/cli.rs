use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use covfloor::experiments::Preset;
use covfloor::intervals::normal_quantile;
use covfloor::{OutcomeKind, Sampling};
use covfloor_cli::commands::scenario_config;
use covfloor_cli::config::RunConfig;

fn covfloor(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_covfloor"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = covfloor(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read(path: impl AsRef<Path>) -> Vec<u8> {
    std::fs::read(path.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}

/// Writes a small synthetic problem to `dir/d`.
fn dataset(dir: &Path, outcome: &str) -> PathBuf {
    ok(
        dir,
        &["dgm", "--n", "120", "--p", "10", "--n-test", "12", "--outcome", outcome, "--seed", "5", "--out", "d"],
    );
    dir.join("d")
}

fn fit_and_quantify(dir: &Path, threads: &str) {
    ok(
        dir,
        &["fit", "--data", "d/train.csv", "--test", "d/test.csv", "--trees", "40", "--seed", "9", "--threads", threads, "--out", "f"],
    );
    ok(
        dir,
        &[
            "uncertainty", "--forest", "f/forest.json", "--data", "d/train.csv", "--test", "d/test.csv",
            "--r-syn", "4", "--b-mc", "20", "--r-cf", "2", "--seed", "9", "--threads", threads, "--out", "u",
        ],
    );
}

#[test]
fn outputs_are_byte_identical_across_runs_and_thread_counts() {
    let runs: Vec<_> = ["1", "1", "8"]
        .into_iter()
        .map(|threads| {
            let tmp = tempfile::tempdir().unwrap();
            dataset(tmp.path(), "continuous");
            fit_and_quantify(tmp.path(), threads);
            tmp
        })
        .collect();
    let files = ["d/train.csv", "d/test.csv", "f/forest.json", "f/predictions.csv", "u/intervals.csv", "u/floor.csv"];
    for file in files {
        let first = read(runs[0].path().join(file));
        for run in &runs[1..] {
            assert!(first == read(run.path().join(file)), "{file} differs");
        }
    }
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    let text = String::from_utf8(read(path)).unwrap();
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn interval_half_width_combines_the_three_components() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    dataset(dir, "continuous");
    fit_and_quantify(dir, "1");
    let z = normal_quantile(0.05).unwrap();
    let table = rows(&dir.join("u/intervals.csv"));
    assert_eq!(table.len(), 12);
    for r in table {
        let v: Vec<f64> = r[1..].iter().map(|s| s.parse().unwrap()).collect();
        let (est, lo, hi) = (v[0], v[1], v[2]);
        let total = v[5] + v[6] + v[7];
        assert!(v[5..8].iter().all(|c| *c >= 0.0));
        assert!((est - lo - z * total.sqrt()).abs() < 1e-9);
        assert!((hi - est - z * total.sqrt()).abs() < 1e-9);
    }
}

#[test]
fn alpha_and_outcome_are_recorded_in_the_metadata() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    dataset(dir, "continuous");
    ok(dir, &["fit", "--data", "d/train.csv", "--trees", "20", "--out", "f"]);
    ok(
        dir,
        &[
            "uncertainty", "--forest", "f/forest.json", "--data", "d/train.csv", "--test", "d/test.csv",
            "--alpha", "0.1", "--r-syn", "3", "--b-mc", "10", "--r-cf", "2", "--out", "u",
        ],
    );
    let text = String::from_utf8(read(dir.join("u/intervals.csv"))).unwrap();
    let header: Vec<&str> = text.lines().take_while(|l| l.starts_with('#')).collect();
    assert!(header[0].starts_with("# covfloor "));
    assert!(header.iter().any(|l| l.starts_with("# config_hash=") && l.len() == "# config_hash=".len() + 16));
    assert!(header.contains(&"# alpha=0.1"));
    assert!(header.contains(&"# outcome=continuous"));
}

#[test]
fn binary_pipeline_keeps_intervals_inside_the_unit_interval() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    dataset(dir, "binary");
    ok(dir, &["fit", "--data", "d/train.csv", "--outcome", "binary", "--trees", "60", "--out", "f"]);
    ok(
        dir,
        &[
            "uncertainty", "--forest", "f/forest.json", "--data", "d/train.csv", "--test", "d/test.csv",
            "--r-syn", "3", "--b-mc", "20", "--out", "u",
        ],
    );
    for r in rows(&dir.join("u/intervals.csv")) {
        let lo: f64 = r[4].parse().unwrap();
        let hi: f64 = r[5].parse().unwrap();
        assert!((0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi) && lo <= hi);
    }
}

#[test]
fn flags_override_the_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("run.toml"), "seed = 5\n[dgm]\nn = 30\nn_test = 4\n").unwrap();
    ok(dir, &["--config", "run.toml", "dgm", "--seed", "7", "--out", "d"]);
    let text = String::from_utf8(read(dir.join("d/train.csv"))).unwrap();
    assert!(text.contains("# seed=7\n"));
    assert_eq!(rows(&dir.join("d/train.csv")).len(), 30);
    assert_eq!(rows(&dir.join("d/test.csv")).len(), 4);
}

#[test]
fn missing_outcome_column_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    dataset(dir, "continuous");
    let out = covfloor(dir, &["fit", "--data", "d/test.csv", "--out", "f"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("`y`"));
}

#[test]
fn unparseable_cell_names_row_and_column() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("bad.csv"), "x1,x2,y\n0.5,1.0,2\n1.5,oops,3\n").unwrap();
    let out = covfloor(dir, &["fit", "--data", "bad.csv", "--out", "f"]);
    assert_eq!(out.status.code(), Some(3));
    let msg = stderr(&out);
    assert!(msg.contains("row 2") && msg.contains("x2") && msg.contains("oops"), "{msg}");
}

#[test]
fn binary_outcome_outside_zero_one_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("d.csv"), "x1,y\n0.1,0\n0.2,1\n0.3,0.5\n").unwrap();
    let out = covfloor(dir, &["fit", "--data", "d.csv", "--outcome", "binary", "--out", "f"]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}

#[test]
fn seed_beyond_the_toml_integer_range_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let out = covfloor(tmp.path(), &["dgm", "--seed", "9223372036854775808", "--out", "d"]);
    assert_eq!(out.status.code(), Some(2));
    ok(tmp.path(), &["dgm", "--seed", "9223372036854775807", "--n", "20", "--n-test", "2", "--out", "d"]);
}

#[test]
fn unknown_keys_in_the_config_file_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("run.toml"), "[fit]\ntress = 10\n").unwrap();
    let out = covfloor(dir, &["--config", "run.toml", "dgm", "--out", "d"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_experiment_lists_the_valid_names() {
    let tmp = tempfile::tempdir().unwrap();
    let out = covfloor(tmp.path(), &["experiment", "nonsense"]);
    assert!(!out.status.success());
    let msg = stderr(&out);
    for name in covfloor::experiments::EXPERIMENTS {
        assert!(msg.contains(name), "{name} missing from: {msg}");
    }
}

#[test]
fn passing_checks_exit_zero_and_write_both_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = covfloor(dir, &["experiment", "overlap", "--check", "--out", "e"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(dir.join("e/overlap.csv").exists());
    let json: serde_json::Value = serde_json::from_slice(&read(dir.join("e/overlap.json"))).unwrap();
    assert_eq!(json["passed"], serde_json::Value::Bool(true));
}

#[test]
fn failing_check_exits_four() {
    // 2 x 5 hits can only give coverage 0.9 or 1.0, never within 0.03 of 0.95
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(
        dir.join("run.toml"),
        "[experiment]\nn = 80\n[experiment.budgets]\nr_cov = 2\nn_test = 5\nr_syn = 3\nb_mc = 10\nb_deploy = 20\nr_cf = 2\n",
    )
    .unwrap();
    let out = covfloor(dir, &["--config", "run.toml", "experiment", "coverage", "--check", "--out", "e"]);
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
    let without = covfloor(dir, &["--config", "run.toml", "experiment", "coverage", "--out", "e2"]);
    assert_eq!(without.status.code(), Some(0));
}

#[test]
fn presets_resolve_to_their_shapes() {
    let expected = [
        ("favorable", Preset::Favorable, (400, 10, 4)),
        ("challenging", Preset::Challenging, (200, 30, 6)),
        ("stress", Preset::Stress, (200, 200, 15)),
    ];
    for (name, preset, (n, p, q)) in expected {
        let mut cfg = RunConfig::default();
        cfg.experiment.preset = name.to_string();
        let sc = scenario_config(&cfg).unwrap();
        assert_eq!((sc.n, sc.p, sc.mtry), (n, p, q), "{name}");
        assert_eq!(sc.sampling, Sampling::Bootstrap);
        assert_eq!(preset.name(), name);
    }
    let mut cfg = RunConfig::default();
    cfg.experiment.outcome = OutcomeKind::Binary;
    assert_eq!(scenario_config(&cfg).unwrap().min_leaf, covfloor::DEFAULT_MIN_LEAF);
    cfg.experiment.preset = "gentle".to_string();
    assert!(scenario_config(&cfg).is_err());
}
