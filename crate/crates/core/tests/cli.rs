use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn nlpot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlpot")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_str(&stdout(o)).unwrap_or_else(|e| panic!("bad JSON ({e}): {}", stdout(o)))
}

#[test]
fn missing_file_is_a_usage_error_naming_the_path() {
    let o = nlpot(&["--config", "/nonexistent/run.conf", "sweep"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/nonexistent/run.conf"), "{}", stderr(&o));
}

#[test]
fn bad_config_line_reports_its_location() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write(dir.path(), "run.conf", "# comment\nlambda = 4\nnot a pair\n");
    let o = nlpot(&["--config", &conf, "sweep"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("run.conf:3"), "{}", stderr(&o));
    let o = nlpot(&["--set", "bogus=1", "sweep"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn same_seed_gives_identical_bytes() {
    let args = ["--seed", "9", "--grid", "8", "--probes", "8", "--set", "count=3", "verify", "wolff-below-v"];
    let a = nlpot(&args);
    let b = nlpot(&args);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn wolff_below_v_is_consistent() {
    let o = nlpot(&["--grid", "8", "--probes", "8", "--set", "count=4", "verify", "wolff-below-v"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["report"]["verdict"], "Consistent", "{v}");
}

#[test]
fn unknown_estimate_is_a_usage_error() {
    assert_eq!(nlpot(&["verify", "no-such-estimate"]).status.code(), Some(2));
    assert_eq!(nlpot(&["construct", "no-such-kind"]).status.code(), Some(2));
}

#[test]
fn above_curve_below_threshold_is_rejected() {
    let o = nlpot(&["--set", "sigma=2.5", "construct", "above-curve"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("critical"), "{}", stderr(&o));
}

#[test]
fn bump_construction_passes_and_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_string_lossy().into_owned();
    let o = nlpot(&["--out", &out, "--set", "points=4", "--set", "samples_per_ball=8", "construct", "bump"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("construction.json")).unwrap()).unwrap();
    assert_eq!(doc["schema_version"], 1);
    let rates = fs::read_to_string(dir.path().join("rates_u.csv")).unwrap();
    assert!(rates.starts_with("j,norm,log_radius,u,ratio"), "{rates}");
}

#[test]
fn sharp_rate_ratios_grow() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_string_lossy().into_owned();
    let o = nlpot(&["--out", &out, "--set", "points=8", "--set", "samples_per_ball=4", "construct", "sharp-rate"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rates = fs::read_to_string(dir.path().join("rates_u.csv")).unwrap();
    let ratios: Vec<f64> = rates.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert!(ratios.len() >= 3, "{rates}");
    assert!(ratios.windows(2).all(|w| w[1] > w[0]), "{ratios:?}");
}

#[test]
fn repr_mass_recovers_two() {
    let dir = tempfile::tempdir().unwrap();
    let dec = write(
        dir.path(),
        "dec.json",
        r#"{"schema_version": 1, "n": 3, "m": 2.0, "epsilon": 1.0,
            "mu": {"variant": "atomic", "points": [[0.5, 0.2, 0.0]], "masses": [1.5]},
            "harmonic": {"constant": 0.7, "linear": [0.1, 0.0, 0.0], "quadratic": []}}"#,
    );
    let o = nlpot(&["repr", "mass", "--decomposition", &dec]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let m = json(&o)["fit"]["m"].as_f64().unwrap();
    assert!((m - 2.0).abs() <= 0.02, "{m}");
}

#[test]
fn wrong_schema_version_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let dec = write(
        dir.path(),
        "dec.json",
        r#"{"schema_version": 2, "n": 3, "m": 1.0, "epsilon": 1.0, "mu": {"variant": "atomic", "points": [], "masses": []}}"#,
    );
    let o = nlpot(&["repr", "mass", "--decomposition", &dec]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("schema_version"), "{}", stderr(&o));
}

#[test]
fn potential_of_a_dirac_mass() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "spec.json", r#"{"schema_version": 1, "operator": "riesz_kernel", "alpha": 2.0}"#);
    let mu = write(
        dir.path(),
        "mu.json",
        r#"{"schema_version": 1, "variant": "atomic", "points": [[0, 0, 0]], "masses": [1]}"#,
    );
    let pts = write(dir.path(), "pts.json", r#"{"schema_version": 1, "points": [[0.5, 0, 0], [0, 0, 2]]}"#);
    let o = nlpot(&["potential", "--spec", &spec, "--measure", &mu, "--points", &pts]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    let values: Vec<f64> = rows.records().map(|r| r.unwrap()[3].parse().unwrap()).collect();
    assert!((values[0] - 2.0).abs() < 1e-12 && (values[1] - 0.5).abs() < 1e-12, "{text}");
}

#[test]
fn invalid_measure_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let spec =
        write(dir.path(), "spec.json", r#"{"schema_version": 1, "operator": "wolff", "alpha": 1, "p": 2, "c": 1}"#);
    let mu = write(
        dir.path(),
        "mu.json",
        r#"{"schema_version": 1, "variant": "radial", "dim": 3, "knot_radii": [0, 1], "cumulative_mass": [0, 1]}"#,
    );
    let pts = write(dir.path(), "pts.json", r#"{"schema_version": 1, "points": [[0.5, 0, 0]]}"#);
    let o = nlpot(&["potential", "--spec", &spec, "--measure", &mu, "--points", &pts]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("positive"), "{}", stderr(&o));
}

#[test]
fn sweep_and_classify() {
    let o = nlpot(&["--set", "steps=5", "sweep"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.lines().next().unwrap().contains("region"), "{text}");
    assert!(text.lines().count() > 5);
    let o = nlpot(&["--set", "lambda=4", "--set", "sigma=1", "classify"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o)["region"], "B", "{}", stdout(&o));
    assert_eq!(nlpot(&["--set", "lambda=1", "--set", "sigma=2", "classify"]).status.code(), Some(2));
}

#[test]
fn moser_reports_the_worked_example() {
    let o = nlpot(&["--set", "lambda=4", "--set", "sigma=2.2", "moser"]);
    assert_eq!(o.status.code(), Some(0));
    let c0 = json(&o)["trace"]["C0"].as_f64().unwrap();
    assert!((c0 - 0.46667).abs() < 1e-4);
}
