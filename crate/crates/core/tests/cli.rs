//! End-to-end runs of the command-line driver.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use resonance::degeneracy::EpReport;
use resonance::spectral::read_survival;
use resonance::zeros::read_census;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_resonance"))
        .args(args)
        .arg("--output-dir")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn error_kind(o: &Output) -> String {
    let v: serde_json::Value = serde_json::from_slice(&o.stderr).expect("error report is JSON");
    v["error"].as_str().unwrap().to_string()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn scan_of_free_potential_writes_an_empty_census() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "free.json", r#"{"cutoff": 1.0}"#);
    let o = run(&["scan", "--config", &cfg], d.path());
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(d.path().join("zeros.csv")).unwrap();
    assert_eq!(text, "# schema=resonance/1\nre_k,im_k,multiplicity,class,res_f,res_df,re_E,im_E\n");
    assert!(d.path().join("jost_field.csv").exists());
}

#[test]
fn scan_matches_the_oracle_census() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["scan", "--config", fixture("one_shell_config.json").to_str().unwrap()], d.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let got = read_census(std::fs::File::open(d.path().join("zeros.csv")).unwrap()).unwrap();
    let want = read_census(std::fs::File::open(fixture("one_shell_census.csv")).unwrap()).unwrap();
    assert_eq!(got.len(), want.len());
    for (g, w) in got.iter().zip(&want) {
        let (dk, nk) = ((g.re_k - w.re_k).hypot(g.im_k - w.im_k), w.re_k.hypot(w.im_k));
        assert!(dk <= 1e-8 * nk, "{g:?} vs {w:?}");
        assert_eq!((g.multiplicity, &g.class), (w.multiplicity, &w.class));
    }
}

#[test]
fn malformed_config_exits_2() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "bad.json", r#"{"cutoff": "#);
    let o = run(&["scan", "--config", &cfg], d.path());
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_kind(&o), "Json");
}

#[test]
fn unknown_schema_version_exits_2() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "v.json", r#"{"schema": "resonance/2", "cutoff": 1.0}"#);
    let o = run(&["scan", "--config", &cfg], d.path());
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_kind(&o), "Schema");
}

#[test]
fn ep_on_free_potential_does_not_converge() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "free.json", r#"{"cutoff": 1.0, "ep_seed": {"p": [1.0, 1.0], "k": {"re": 1.0, "im": -0.1}}}"#);
    let o = run(&["ep", "--config", &cfg], d.path());
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(error_kind(&o), "NoConvergence");
}

#[test]
fn ep_is_deterministic_and_reproduces_the_fixture() {
    let cfg = fixture("ep_seed_config.json");
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let o = run(&["ep", "--config", cfg.to_str().unwrap()], d.path());
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["ep.json", "chain.json", "trajectory.csv"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        assert_eq!(x, std::fs::read(b.path().join(name)).unwrap(), "{name} differs between runs");
    }
    let got: EpReport = serde_json::from_slice(&std::fs::read(a.path().join("ep.json")).unwrap()).unwrap();
    let want: EpReport = serde_json::from_slice(&std::fs::read(fixture("ep.json")).unwrap()).unwrap();
    assert_eq!(got.p_star, want.p_star);
    assert_eq!(got.k_m, want.k_m);

    let chain: serde_json::Value = serde_json::from_slice(&std::fs::read(a.path().join("chain.json")).unwrap()).unwrap();
    assert_eq!(chain["schema"], "resonance/1");
    assert_eq!(chain["algebraic_multiplicity"], 2);
    assert_eq!(chain["geometric_multiplicity"], 1);
    for (name, v) in chain["identities"].as_object().unwrap() {
        assert!(v.as_f64().unwrap() < 1e-5, "{name} = {v}");
    }
}

#[test]
fn chain_honours_the_normalization_flag() {
    let d = tempfile::tempdir().unwrap();
    let cfg = fixture("ep_config.json");
    let o = run(&["chain", "--config", cfg.to_str().unwrap(), "--x-re", "2.0"], d.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let chain: serde_json::Value = serde_json::from_slice(&std::fs::read(d.path().join("chain.json")).unwrap()).unwrap();
    assert_eq!(chain["X_m"]["re"], 2.0);
}

#[test]
fn greens_expansion_agrees_with_direct_evaluation() {
    let d = tempfile::tempdir().unwrap();
    let base: serde_json::Value = serde_json::from_slice(&std::fs::read(fixture("ep_config.json")).unwrap()).unwrap();
    let mut cfg = base.clone();
    cfg["fixture"] = fixture("ep.json").to_str().unwrap().into();
    cfg["contour"] = serde_json::json!({"gamma": 0.4, "k_turn": 4.0, "k_max": 240.0, "vertical_panels": 6,
        "bottom_panels": 30, "real_width": 0.5, "bound_max": 10.0, "clearance": 1e-3});
    cfg["greens_points"] = serde_json::json!([
        {"k": {"re": 1.3, "im": 0.2}, "r": 0.7, "rp": 1.9},
        {"k": {"re": 2.5, "im": -0.1}, "r": 2.1, "rp": 0.4}
    ]);
    let path = write(d.path(), "g.json", &cfg.to_string());
    let o = run(&["greens", "--config", &path], d.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(d.path().join("greens.csv")).unwrap();
    let body = text.strip_prefix("# schema=resonance/1\n").unwrap();
    let mut rd = csv::Reader::from_reader(body.as_bytes());
    let mut rows = 0;
    for rec in rd.records() {
        let v: Vec<f64> = rec.unwrap().iter().map(|x| x.parse().unwrap()).collect();
        let (g, e) = ((v[4], v[5]), (v[6], v[7]));
        assert!((g.0 - e.0).hypot(g.1 - e.1) <= 1e-4 * g.0.hypot(g.1), "{v:?}");
        rows += 1;
    }
    assert_eq!(rows, 2);
}

#[test]
fn evolve_writes_both_amplitudes() {
    let d = tempfile::tempdir().unwrap();
    let mut cfg: serde_json::Value = serde_json::from_slice(&std::fs::read(fixture("ep_config.json")).unwrap()).unwrap();
    cfg["fixture"] = fixture("ep.json").to_str().unwrap().into();
    cfg["times"] = serde_json::json!([0.5, 1.0, 1.5]);
    let path = write(d.path(), "e.json", &cfg.to_string());
    let o = run(&["evolve", "--config", &path], d.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = read_survival(std::fs::File::open(d.path().join("survival.csv")).unwrap()).unwrap();
    let c = read_survival(std::fs::File::open(d.path().join("survival_cn.csv")).unwrap()).unwrap();
    assert_eq!(s.len(), 3);
    for ((t1, a), (t2, b)) in s.iter().zip(&c) {
        assert_eq!(t1, t2);
        assert!((a - b).norm() <= 1e-3 * b.norm());
    }
}

#[test]
fn verify_reports_expected_failures_under_tight_tolerances() {
    let d = tempfile::tempdir().unwrap();
    let cfg = fixture("ep_config.json");
    let o = run(&["verify", "--config", cfg.to_str().unwrap(), "--tolerance", "all=1e-15"], d.path());
    assert_eq!(o.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.lines().any(|l| l.starts_with("FAIL")));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(d.path().join("verify.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], false);
}

#[test]
fn verify_without_fixture_exits_2() {
    let d = tempfile::tempdir().unwrap();
    let mut cfg: serde_json::Value = serde_json::from_slice(&std::fs::read(fixture("ep_config.json")).unwrap()).unwrap();
    cfg["fixture"] = "missing.json".into();
    let path = write(d.path(), "v.json", &cfg.to_string());
    let o = run(&["verify", "--config", &path], d.path());
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_kind(&o), "Config");
}

#[test]
fn nonpositive_tolerance_is_rejected() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["verify", "--config", fixture("ep_config.json").to_str().unwrap(), "--tolerance", "oracle=0"], d.path());
    assert_eq!(o.status.code(), Some(2));
}
