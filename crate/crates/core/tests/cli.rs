use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dosc::groundstate::ground_state_moments;
use dosc::measure::FrequencyMeasure;
use dosc::UnitSystem;
use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn dosc(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dosc"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn run(cmd: &str, config: &str, extra: &[&str], out: &Path) -> Output {
    let cfg = configs().join(config);
    let mut args = vec![cmd, "--config", cfg.to_str().unwrap()];
    args.extend_from_slice(extra);
    dosc(&args, out)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr_error(o: &Output) -> Value {
    serde_json::from_str(String::from_utf8_lossy(&o.stderr).trim()).unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn spectrum_outputs_round_trip_bit_identically() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("spectrum", "flat_band.json", &[], dir.path());
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let summary = json(&dir.path().join("spectrum.json"));
    let (header, rows) = read_csv(&dir.path().join("pi.csv"));
    assert_eq!(
        header,
        ["omega", "Y", "alpha_sq", "beta_ratio", "pi", "weight"]
    );
    let (_, bound) = read_csv(&dir.path().join("bound_states.csv"));
    assert_eq!(
        bound.len(),
        summary["bound_states"].as_array().unwrap().len()
    );
    assert!(!bound.is_empty());
    let moment = |f: &dyn Fn(f64) -> f64| {
        let c: f64 = rows.iter().map(|r| r[5] * r[4] * f(r[0])).sum();
        c + bound.iter().map(|b| b[1] * f(b[0])).sum::<f64>()
    };
    assert_eq!(
        (moment(&|_| 1.0) - 1.0).abs(),
        summary["norm_defect"].as_f64().unwrap()
    );
    assert_eq!(
        (moment(&|w| w * w) - 1.0).abs(),
        summary["sum_rule_defect"].as_f64().unwrap()
    );
    assert_eq!(moment(&|w| w), summary["mean"].as_f64().unwrap());
    assert_eq!(
        moment(&|w| 1.0 / w),
        summary["mean_inverse"].as_f64().unwrap()
    );
    assert!(summary["norm_defect"].as_f64().unwrap() <= 1e-6);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("norm defect") && stdout.contains("sum-rule defect"));
}

#[test]
fn groundstate_rederives_from_the_spectrum_files() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        run("spectrum", "reference.json", &[], &dir.path().join("s"))
            .status
            .code(),
        Some(0)
    );
    assert_eq!(
        run("groundstate", "reference.json", &[], &dir.path().join("g"))
            .status
            .code(),
        Some(0)
    );
    let (_, rows) = read_csv(&dir.path().join("s/pi.csv"));
    let (_, bound) = read_csv(&dir.path().join("s/bound_states.csv"));
    let mut nodes: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let mut weights: Vec<f64> = rows.iter().map(|r| r[4] * r[5]).collect();
    nodes.extend(bound.iter().map(|b| b[0]));
    weights.extend(bound.iter().map(|b| b[1]));
    let m = FrequencyMeasure::new(nodes, weights, None, true).unwrap();
    let g = ground_state_moments(&m, &UnitSystem::default()).unwrap();
    let stored: dosc::cli::GroundStateOutput =
        serde_json::from_value(json(&dir.path().join("g/groundstate.json"))).unwrap();
    assert_eq!(stored.source, "continuum");
    assert_eq!(stored.summary, g);
    let report = fs::read_to_string(dir.path().join("g/groundstate.txt")).unwrap();
    assert!(report.contains("mutual information 2S"));
}

#[test]
fn reference_groundstate_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        run("groundstate", "reference.json", &[], dir.path())
            .status
            .code(),
        Some(0)
    );
    let got = json(&dir.path().join("groundstate.json"));
    let golden = json(
        &Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/reference_groundstate.json"),
    );
    for (key, want) in golden.as_object().unwrap() {
        let v = got["summary"][key].as_f64().unwrap();
        let want = want.as_f64().unwrap();
        assert!(
            (v - want).abs() <= 1e-10 * want.abs().max(1e-3),
            "{key}: {v} vs {want}"
        );
    }
}

#[test]
fn two_mode_override_reproduces_closed_forms() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        "groundstate",
        "reference.json",
        &[
            "--override",
            r#"spectrum={"family":"discrete","bath_freqs":[1.0],"couplings":[0.5]}"#,
        ],
        dir.path(),
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let g = json(&dir.path().join("groundstate.json"));
    assert_eq!(g["source"], "discrete");
    let (a, b) = (0.5f64.sqrt(), 1.5f64.sqrt());
    let s = &g["summary"];
    assert!((s["var_x"].as_f64().unwrap() - 0.25 * (1.0 / a + 1.0 / b)).abs() < 1e-12);
    assert!((s["var_p"].as_f64().unwrap() - 0.25 * (a + b)).abs() < 1e-12);
    let mi = s["mutual_info"].as_f64().unwrap();
    assert!((mi - 2.0 * s["entropy"].as_f64().unwrap()).abs() < 1e-12);
}

#[test]
fn uncoupled_runs() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("spectrum", "uncoupled.json", &[], &dir.path().join("s"));
    assert_eq!(o.status.code(), Some(3));
    let e = stderr_error(&o);
    assert_eq!(e["exit_code"], 3);
    assert_eq!(e["error"], "non_convergence");
    assert!(e["message"].as_str().unwrap().contains("point-mass"));

    assert_eq!(
        run("groundstate", "uncoupled.json", &[], &dir.path().join("g"))
            .status
            .code(),
        Some(0)
    );
    let g = json(&dir.path().join("g/groundstate.json"));
    assert_eq!(g["summary"]["var_x"], 0.5);
    assert_eq!(g["summary"]["n_bar_c"], 0.0);

    let o = run(
        "compare",
        "uncoupled.json",
        &["--override", "oracle.modes=50"],
        &dir.path().join("c"),
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let c = json(&dir.path().join("c/comparison.json"));
    assert_eq!(c["report"]["var_x_rel_error"], 0.0);
    assert_eq!(c["report"]["var_p_rel_error"], 0.0);
    assert_eq!(c["report"]["pi_l1_distance"], 0.0);
    assert_eq!(c["passed"], true);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("spectrum", "inadmissible.json", &[], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_error(&o)["error"], "positivity");

    let o = run(
        "spectrum",
        "reference.json",
        &["--override", "spectrum.nonsense=1"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr_error(&o)["message"]
        .as_str()
        .unwrap()
        .contains("nonsense"));

    let o = dosc(&["frobnicate"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr_error(&o)["error"], "usage");

    let o = dosc(&["spectrum"], dir.path());
    assert_eq!(o.status.code(), Some(1));

    let o = run("weak", "two_mode.json", &[], dir.path());
    assert_eq!(o.status.code(), Some(1));

    let o = Command::new(env!("CARGO_BIN_EXE_dosc"))
        .arg("--help")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn positivity_margin_configuration_still_runs() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        "spectrum",
        "reference.json",
        &[
            "--override",
            "spectrum.amplitude=null",
            "--override",
            "spectrum.strength=0.99",
        ],
        dir.path(),
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(
        json(&dir.path().join("spectrum.json"))["norm_defect"]
            .as_f64()
            .unwrap()
            <= 1e-5
    );
}

#[test]
fn dynamics_files_and_classification() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        "dynamics",
        "weak.json",
        &["--override", "time.steps=500"],
        dir.path(),
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let (header, rows) = read_csv(&dir.path().join("kernels.csv"));
    assert_eq!(header, ["t", "k_cos", "k_sin_over", "k_sin_times"]);
    assert_eq!(rows.len(), 501);
    assert_eq!(rows[0][0], 0.0);
    assert!((rows[0][1] - 1.0).abs() < 1e-6 && rows[0][2] == 0.0 && rows[0][3] == 0.0);
    let (header, traj) = read_csv(&dir.path().join("trajectory.csv"));
    assert_eq!(
        header,
        ["t", "k_cos", "k_sin_over", "k_sin_times", "x", "p"]
    );
    assert_eq!(traj[0][4], rows[0][1]);
    let d = json(&dir.path().join("damping.json"));
    assert_eq!(d["classification"]["class"], "underdamped");
    assert!(d["short_time"]["notice"].is_null());
    let saved = dosc::cli::RunConfig::parse(
        &fs::read_to_string(dir.path().join("config.json")).unwrap(),
        &[],
    )
    .unwrap();
    assert_eq!(saved.time.steps, 500);
}

#[test]
fn strong_damping_is_non_oscillatory() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        "dynamics",
        "strong.json",
        &["--override", "time.steps=50"],
        dir.path(),
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let d = json(&dir.path().join("damping.json"));
    assert_eq!(d["classification"]["class"], "non_oscillatory");
    assert!(d["classification"]["first_stationary_time"].is_null());
}

#[test]
fn coarse_compare_reports_without_crashing() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        "compare",
        "reference.json",
        &["--override", "oracle.modes=50"],
        dir.path(),
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let c = json(&dir.path().join("comparison.json"));
    assert_eq!(c["passed"], false);
    assert!(c["report"]["pi_l1_distance"].as_f64().unwrap() > 0.02);
    assert!(c["report"]["var_x_rel_error"].as_f64().unwrap() > 0.005);
    let (header, rows) = read_csv(&dir.path().join("pi_histogram.csv"));
    assert_eq!(header, ["lo", "hi", "mass", "density"]);
    let mass: f64 = rows.iter().map(|r| r[2]).sum();
    assert!((mass - 1.0).abs() < 1e-12);
    assert!(String::from_utf8_lossy(&o.stdout).contains("verdict          FAIL"));
}

#[test]
fn weak_fit_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("weak", "weak.json", &[], dir.path());
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let w = json(&dir.path().join("weak.json"));
    assert!(w["hwhm_rel_error"].as_f64().unwrap() < 0.05);
    assert!(w["report"]["F0"].is_f64());
    let (header, rows) = read_csv(&dir.path().join("fit.csv"));
    assert_eq!(header, ["omega", "pi_exact", "pi_lorentz"]);
    assert!(rows.len() > 100);
}
