//! End-to-end runs of the `salina` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use salina::frame_io::{write_clip, SonarFrame};
use salina::synth::{moving_blob_clip, BlobClipParams};
use serde_json::Value;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn salina(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_salina"))
        .args(args)
        .env_remove("SALINA_SEED")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

/// Front for the fixture frame geometry, built once per test binary.
fn fixture_front() -> &'static Path {
    static DIR: OnceLock<tempfile::TempDir> = OnceLock::new();
    let dir = DIR.get_or_init(|| {
        let d = tempfile::tempdir().unwrap();
        let profile = fixtures().join("profile.csv");
        let out = d.path().join("front");
        ok(&salina(&[
            "profile", "--width", "200", "--height", "600", "--profile", p(&profile), "-o", p(&out),
        ]));
        d
    });
    Box::leak(dir.path().join("front/front.json").into_boxed_path())
}

#[test]
fn missing_input_is_an_io_error_naming_the_path() {
    let out = salina(&["motion", "/nonexistent/clip.sfr"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("/nonexistent/clip.sfr"), "{}", stderr(&out));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(salina(&["profile", "--bogus"]).status.code(), Some(2));
    assert_eq!(salina(&[]).status.code(), Some(2));
}

#[test]
fn empty_profile_reports_row_zero() {
    let d = tempfile::tempdir().unwrap();
    let prof = d.path().join("empty.csv");
    std::fs::write(&prof, "").unwrap();
    let out = salina(&[
        "profile", "--width", "100", "--height", "100", "--profile", p(&prof), "-o", p(&d.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("row 0"), "{}", stderr(&out));
}

#[test]
fn invalid_parameter_is_a_domain_error() {
    let d = tempfile::tempdir().unwrap();
    let clip = d.path().join("c.sfr");
    write_clip(&clip, &[SonarFrame::filled(32, 32, 10, 0, 0.0)], 10.0).unwrap();
    let out = salina(&["motion", p(&clip), "--mog-alpha", "1.5"]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    assert!(stderr(&out).contains("alpha"), "{}", stderr(&out));
}

#[test]
fn constant_clip_saves_everything() {
    let d = tempfile::tempdir().unwrap();
    let clip = d.path().join("flat.sfr");
    let frames: Vec<_> = (0..30).map(|i| SonarFrame::filled(64, 32, 77, i, i as f64 / 10.0)).collect();
    write_clip(&clip, &frames, 10.0).unwrap();
    let out = d.path().join("pre");
    ok(&salina(&["preprocess", p(&clip), "-o", p(&out)]));
    let ledger = read_json(&out.join("ledger.json"));
    assert_eq!(ledger["ledger"]["saving_ratio"].as_f64(), Some(1.0));
    assert_eq!(ledger["ledger"]["frames_total"].as_u64(), Some(30));
    for f in ["channels.sfr", "mask.sfr"] {
        assert!(out.join(f).is_file());
    }
    let channels = salina::frame_io::read_clip(out.join("channels.sfr")).unwrap();
    assert_eq!(channels.frames.len(), 90);
}

#[test]
fn blob_clip_saving_ratio_tracks_ground_truth() {
    let d = tempfile::tempdir().unwrap();
    let clip = moving_blob_clip(&BlobClipParams::default(), 11).unwrap();
    let path = d.path().join("blob.sfr");
    write_clip(&path, &clip.frames, clip.fps).unwrap();
    let per_frame = d.path().join("frames.csv");
    let doc: Value = serde_json::from_str(&ok(&salina(&["motion", p(&path), "--per-frame", p(&per_frame)]))).unwrap();
    let got = doc["ledger"]["saving_ratio"].as_f64().unwrap();
    assert!((got - clip.true_saving_ratio()).abs() <= 0.02, "{got} vs {}", clip.true_saving_ratio());
    let rows = std::fs::read_to_string(per_frame).unwrap();
    assert_eq!(rows.lines().count(), clip.frames.len() + 1);
}

#[test]
fn seed_from_environment_lands_in_run_config() {
    let d = tempfile::tempdir().unwrap();
    let clip = d.path().join("c.sfr");
    write_clip(&clip, &[SonarFrame::filled(32, 32, 10, 0, 0.0)], 10.0).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_salina"))
        .args(["motion", p(&clip)])
        .env("SALINA_SEED", "4242")
        .output()
        .unwrap();
    let doc: Value = serde_json::from_str(&ok(&out)).unwrap();
    assert_eq!(doc["run_config"]["seed"].as_u64(), Some(4242));
}

const TINY_PROFILE: &str = "stratum_key,accuracy
edge/d1/f1/off,0.40
edge/d1/f5/off,0.50
cloud/d1/f1/off,0.70
cloud/d1/f5/off,0.80
";

fn tiny_profile(dir: &Path, rule: &str) -> Value {
    let prof = dir.join("tiny.csv");
    std::fs::write(&prof, TINY_PROFILE).unwrap();
    let out = dir.join(rule);
    ok(&salina(&[
        "profile", "--width", "100", "--height", "100", "--profile", p(&prof), "--downscales", "1", "--fps-set",
        "1,5", "--filters", "off", "--routes", "edge,cloud", "--rule", rule, "-o", p(&out),
    ]));
    read_json(&out.join("front.json"))
}

#[test]
fn four_configuration_profile_by_hand() {
    let d = tempfile::tempdir().unwrap();
    let strict = tiny_profile(d.path(), "strict-all");
    assert_eq!(strict["space_size"].as_u64(), Some(4));
    let members = strict["front"]["members"].as_array().unwrap();
    // nothing beats anything on all three axes at once
    assert_eq!(members.len(), 4);

    // one unfiltered 100x100 stratum at 5 fps
    let cloud_f5 = members
        .iter()
        .find(|m| m["key"].as_str().unwrap().starts_with("cloud") && m["key"].as_str().unwrap().contains("f5"))
        .unwrap();
    let b = cloud_f5["metrics"]["bandwidth_bps"].as_f64().unwrap();
    let rate = salina::stratum::BitrateParams::default();
    let expect_b = 100.0 * 100.0 * 5.0 * rate.bits_per_pixel * rate.codec_ratio;
    assert_eq!(b, expect_b);
    let pm = salina::stratum::PowerModel::default();
    let expect_p = pm.cloud_edge_base_w + pm.cloud_edge_per_stratum_w + pm.tx_base_w + pm.tx_w_per_mbps * b / 1e6;
    assert!((cloud_f5["metrics"]["power_w"].as_f64().unwrap() - expect_p).abs() < 1e-9);

    // the slower edge setting ties the faster one on B and P and loses on A
    let standard = tiny_profile(d.path(), "standard");
    let keys: Vec<&str> = standard["front"]["members"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m["key"].as_str().unwrap())
        .collect();
    assert_eq!(keys.len(), 3);
    assert!(!keys.iter().any(|k| k.starts_with("edge") && k.contains("f1/")), "{keys:?}");
    assert_eq!(standard["fallback"]["metrics"]["accuracy"].as_f64(), Some(0.5));

    let points = std::fs::read_to_string(d.path().join("standard/points.csv")).unwrap();
    assert_eq!(points.lines().count(), 5);
}

#[test]
fn profile_rerun_is_byte_identical() {
    let d = tempfile::tempdir().unwrap();
    let read = |f: &str| std::fs::read(d.path().join("standard").join(f)).unwrap();
    tiny_profile(d.path(), "standard");
    let first = (read("points.csv"), read("front.json"));
    tiny_profile(d.path(), "standard");
    assert_eq!(first, (read("points.csv"), read("front.json")));
}

fn simulate(traces: &str, extra: &[&str]) -> (Value, Vec<u8>) {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("sim");
    let traces = fixtures().join(traces);
    let models = fixtures().join("models.json");
    let mut args = vec![
        "simulate",
        "--traces",
        p(&traces),
        "--front",
        p(fixture_front()),
        "--power-model",
        p(&models),
        "-o",
        p(&out),
    ];
    args.extend_from_slice(extra);
    ok(&salina(&args));
    (read_json(&out.join("report.json")), std::fs::read(out.join("series.csv")).unwrap())
}

#[test]
fn simulation_outcomes_on_fixture_days() {
    let (clear, series_a) = simulate("clear_day.csv", &[]);
    assert_eq!(clear["report"]["depletion_events"].as_array().unwrap().len(), 0);
    let (_, series_b) = simulate("clear_day.csv", &[]);
    assert_eq!(series_a, series_b);

    let (storm, _) = simulate("storm_day.csv", &[]);
    assert_eq!(storm["report"]["depletion_events"].as_array().unwrap().len(), 0);
    let (greedy, _) = simulate("storm_day.csv", &["--always-max"]);
    assert!(!greedy["report"]["depletion_events"].as_array().unwrap().is_empty());
}

#[test]
fn stochastic_dish_requires_a_seed() {
    let d = tempfile::tempdir().unwrap();
    let out = salina(&[
        "simulate",
        "--traces",
        p(&fixtures().join("clear_day.csv")),
        "--front",
        p(fixture_front()),
        "--stochastic-dish",
        "-o",
        p(&d.path().join("x")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn plan_and_report_round_trip() {
    let d = tempfile::tempdir().unwrap();
    let input = d.path().join("in.json");
    std::fs::write(&input, r#"{"bandwidth_mbps": 5.0, "budget_w": 40.0}"#).unwrap();
    let text = ok(&salina(&["plan", "--front", p(fixture_front()), "--input", p(&input)]));
    let doc: Value = serde_json::from_str(&text).unwrap();
    let chosen = &doc["decision"]["chosen"]["metrics"];
    assert!(chosen["power_w"].as_f64().unwrap() <= 40.0);
    assert_eq!(doc["decision"]["fallback_used"], Value::Bool(false));

    let saved = d.path().join("decision.json");
    std::fs::write(&saved, &text).unwrap();
    let summary = ok(&salina(&["report", p(&saved)]));
    assert!(summary.contains("chosen"));
    let front_summary = ok(&salina(&["report", p(fixture_front())]));
    assert!(front_summary.contains("strata          3"), "{front_summary}");

    std::fs::write(&input, r#"{"bandwidth_mbps": 5.0}"#).unwrap();
    let out = salina(&["plan", "--front", p(fixture_front()), "--input", p(&input)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn plan_derives_budget_from_energy_block() {
    let d = tempfile::tempdir().unwrap();
    let input = d.path().join("in.json");
    let forecast = vec![400.0; 240];
    let body = serde_json::json!({
        "bandwidth_mbps": 20.0,
        "energy": {"soc": 1.0, "forecast_w": forecast, "horizon_s": 14400.0},
    });
    std::fs::write(&input, body.to_string()).unwrap();
    let doc: Value = serde_json::from_str(&ok(&salina(&["plan", "--front", p(fixture_front()), "--input", p(&input)]))).unwrap();
    assert_eq!(doc["low_energy"], Value::Bool(false));
    assert!(doc["budget_w"].as_f64().unwrap() > 200.0);
}
