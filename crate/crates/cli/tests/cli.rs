//! End-to-end tests of the command-line interface: exit codes, provenance
//! headers, determinism, and the preset outputs.

use std::fs;
use std::path::Path;
use std::process::Command;

fn toplab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_toplab"))
}

fn write(path: &Path, text: &str) {
    fs::write(path, text).unwrap();
}

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> std::process::Output {
    toplab()
        .arg(cmd)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

const SIM_EQUILIBRIUM: &str = r#"{
  "top": {"c": 1.0, "rho": 0.0, "a": 3.0},
  "initial": {"u": [0.0, 0.0, 1.0], "v": [0.0, 0.0, 3.0]},
  "integrator": {"scheme": "implicit-midpoint", "dt": 0.01},
  "t_end": 1.0,
  "sample_every": 10
}"#;

#[test]
fn simulate_at_equilibrium_is_constant() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    write(&cfg, SIM_EQUILIBRIUM);
    let out = dir.path().join("out");
    let o = run("simulate", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(text.starts_with("# toplab v"));
    assert!(text.contains("# config-hash:"));
    for line in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        let u3: f64 = fields[3].parse().unwrap();
        assert!((u3 - 1.0).abs() < 1e-12, "state drifted: {line}");
    }
}

#[test]
fn identical_config_and_seed_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    write(&cfg, SIM_EQUILIBRIUM);
    let out1 = dir.path().join("a");
    let out2 = dir.path().join("b");
    assert!(run("simulate", &cfg, &out1, &["--seed", "7"]).status.success());
    assert!(run("simulate", &cfg, &out2, &["--seed", "7"]).status.success());
    for name in ["trajectory.csv", "drift_summary.json"] {
        let a = fs::read(out1.join(name)).unwrap();
        let b = fs::read(out2.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn missing_required_field_is_exit_2_with_field_name() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    // integrator.dt missing
    write(
        &cfg,
        r#"{
  "top": {"c": 1.0, "a": 3.0},
  "initial": {"u": [0.0, 0.0, 1.0], "v": [0.0, 0.0, 3.0]},
  "integrator": {"scheme": "implicit-midpoint"},
  "t_end": 1.0
}"#,
    );
    let o = run("simulate", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("dt"), "stderr must name the missing field: {err}");
}

#[test]
fn scan_spectrum_flip_and_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    write(
        &cfg,
        r#"{"c_values": [1.0], "a_range": {"min": 1.5, "max": 2.5, "count": 101}}"#,
    );
    let out = dir.path().join("out");
    let o = run("scan-spectrum", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("spectrum.csv")).unwrap();
    let mut flips = Vec::new();
    let mut prev: Option<(f64, String)> = None;
    for line in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        let a: f64 = fields[0].parse().unwrap();
        let class = fields[3].to_string();
        if let Some((pa, pc)) = &prev {
            if *pc != class && (pc == "hyperbolic" || class == "elliptic") {
                flips.push((*pa, a));
            }
        }
        prev = Some((a, class));
    }
    // the hyperbolic -> (resonant at the grid point 2.0) -> elliptic
    // transition happens between 1.99 and 2.01
    assert!(!flips.is_empty());
    assert!(flips.first().unwrap().0 >= 1.99 - 1e-9);
    assert!(flips.last().unwrap().1 <= 2.01 + 1e-9);
    let tj = fs::read_to_string(out.join("thresholds.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&tj).unwrap();
    let a0 = v["thresholds"][0][1].as_f64().unwrap();
    assert!((a0 - 2.0).abs() < 1e-8);
}

#[test]
fn scan_spectrum_empty_grid_is_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    write(
        &cfg,
        r#"{"c_values": [], "a_range": {"min": 1.5, "max": 2.5, "count": 5}}"#,
    );
    let o = run("scan-spectrum", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn normal_form_roundtrip_preset() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    write(
        &cfg,
        r#"{
  "unfolding": {"lambda0": 1.0, "mu1": 0.0, "mu2": 0.2},
  "roundtrip": {"b": 0.8, "c1": 0.15, "c2": -0.3}
}"#,
    );
    let out = dir.path().join("out");
    let o = run("normal-form", &cfg, &out, &["--seed", "11"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("coefficients.json")).unwrap()).unwrap();
    assert!((v["b"].as_f64().unwrap() - 0.8).abs() < 1e-6);
    assert!((v["c1"].as_f64().unwrap() - 0.15).abs() < 1e-6);
    assert!((v["c2"].as_f64().unwrap() + 0.3).abs() < 1e-6);
    assert_eq!(v["supercritical"].as_bool().unwrap(), true);
}

#[test]
fn monodromy_default_loop_gives_integer_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    write(
        &cfg,
        r#"{
  "coeffs": {"lambda0": 1.0, "mu2": -0.8, "b": 1.0},
  "loop": {"mu2": -0.8, "radius_s": 0.08, "radius_g": 0.08, "steps": 32}
}"#,
    );
    let out = dir.path().join("out");
    let o = run("monodromy", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("monodromy.json")).unwrap()).unwrap();
    let m = &v["matrix"];
    assert_eq!(m[0][0].as_i64().unwrap(), 1);
    assert_eq!(m[1][0].as_i64().unwrap(), 0);
    assert_eq!(m[1][1].as_i64().unwrap(), 1);
    assert_eq!(m[0][1].as_i64().unwrap().abs(), 1);
    assert_eq!(v["winding"].as_i64().unwrap(), 1);
    assert!(out.join("theta_branch.csv").exists());
}

#[test]
fn monodromy_loop_through_surface_is_numeric_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    // radius_g far exceeds the gap to the detached sheet
    write(
        &cfg,
        r#"{
  "coeffs": {"lambda0": 1.0, "mu2": -0.5, "b": 1.0},
  "loop": {"mu2": -0.5, "radius_s": 0.1, "radius_g": 1.0, "steps": 16}
}"#,
    );
    let o = run("monodromy", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn dioph_scan_preset_reproduces_half_plane_asymmetry() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    write(
        &cfg,
        r#"{
  "omega": [1.0, 1.6180339887498949],
  "lambda0": 1.3228756555322954,
  "mu2_range": {"min": -0.4, "max": 0.4, "count": 161},
  "dioph": {"tau": 1.5, "gamma": 0.02, "k_max": 12}
}"#,
    );
    let out = dir.path().join("out");
    let o = run("dioph-scan", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("dioph.csv")).unwrap();
    let (mut neg_pass, mut neg_total, mut pos_pass, mut pos_total) = (0, 0, 0, 0);
    for line in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        let mu2: f64 = fields[0].parse().unwrap();
        let pass = fields[1] == "1";
        if mu2 <= 0.0 {
            neg_total += 1;
            neg_pass += pass as usize;
        } else {
            pos_total += 1;
            pos_pass += pass as usize;
        }
    }
    assert_eq!(neg_pass, neg_total, "hyperbolic half-plane is a continuum");
    assert!(pos_pass < pos_total, "elliptic side must show excluded wedges");
    assert!(pos_pass > 0);
}

#[test]
fn strata_emits_both_surfaces() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    write(
        &cfg,
        r#"{
  "coeffs": {"lambda0": 1.0, "mu2": 0.5, "b": 1.0, "c1": 0.2},
  "m_range": {"min": 0.0, "max": 1.0, "count": 21},
  "top": {"c": 1.0, "u3_range": {"min": 0.2, "max": 1.0, "count": 5},
          "omega_range": {"min": -3.0, "max": -0.5, "count": 5}}
}"#,
    );
    let out = dir.path().join("out");
    let o = run("strata", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let surf = fs::read_to_string(out.join("surface.csv")).unwrap();
    assert!(surf.contains("thread"));
    assert!(surf.contains("surface"));
    let top = fs::read_to_string(out.join("top_surface.csv")).unwrap();
    assert!(top.contains("thread-elliptic") || top.contains("thread-hyperbolic"));
}

#[test]
fn naff_synthetic_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    write(
        &cfg,
        r#"{
  "synthetic": {"terms": [{"frequency": 0.775, "amplitude": 1.0},
                          {"frequency": 2.1, "amplitude": 0.4, "phase": 0.5}],
                "n": 2048, "dt": 0.5},
  "max_terms": 4
}"#,
    );
    let out = dir.path().join("out");
    let o = run("naff", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("naff.json")).unwrap()).unwrap();
    let f0 = v["terms"][0]["frequency"].as_f64().unwrap();
    assert!((f0 - 0.775).abs() < 1e-8);
}

#[test]
fn unknown_config_field_is_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    write(
        &cfg,
        r#"{"c_values": [1.0], "a_range": {"min": 1.0, "max": 2.0, "count": 5}, "bogus": 1}"#,
    );
    let o = run("scan-spectrum", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bogus"), "{err}");
}
