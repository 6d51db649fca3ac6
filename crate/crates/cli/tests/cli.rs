use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const LINEAR_GAUSSIAN: &str = r#"
[model]
jump_rate = 1.0
horizon = 1.0

[jump_law]
kind = "gaussian"
variance = 1.0

[defaults]
seed = 42
paths = 20000
"#;

const NONLINEAR_LAPLACE: &str = r#"
[model]
jump_rate = 1.0
horizon = 1.0

[model.drift]
kind = "trig"
base = 0.0
amplitude = 0.3
frequency = 1.0
phase = 1.5707963267948966

[model.diffusion]
kind = "trig"
base = 1.0
amplitude = 0.5
frequency = 1.0
phase = 0.0

[jump_law]
kind = "laplace"
rate = 1.0

[defaults]
seed = 9
paths = 5000
"#;

fn jumpdens(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_jumpdens"));
    cmd.args(args).env_remove("JUMPDENS_THREADS");
    if let Some(n) = threads {
        cmd.env("JUMPDENS_THREADS", n);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_column(path: &Path, col: usize) -> Vec<(f64, f64)> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[col].parse().unwrap())
        })
        .collect()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn closed_density_reproduces_the_peak() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "lin.toml", LINEAR_GAUSSIAN);
    let out = tmp.path().join("d");
    let o = jumpdens(&["density", s(&cfg), "--t", "1", "--method", "closed", "--out", s(&out)], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let at0 = read_column(&out.join("density.csv"), 1).into_iter().find(|(y, _)| *y == 0.0).unwrap().1;
    let mut w = (-1.0f64).exp();
    let mut oracle = 0.0;
    for n in 0..30 {
        if n > 0 {
            w /= n as f64;
        }
        oracle += w / (2.0 * PI * (1.0 + n as f64)).sqrt();
    }
    assert!((at0 - oracle).abs() < 1e-12, "{at0} vs {oracle}");
    assert!((at0 - 0.3085).abs() < 5e-5);

    let m = manifest(&out);
    assert_eq!(m["subcommand"], "density");
    assert_eq!(m["config"], LINEAR_GAUSSIAN);
    for f in m["outputs"].as_array().unwrap() {
        assert!(out.join(f.as_str().unwrap()).exists(), "{f}");
    }
    assert_eq!(m["outputs"].as_array().unwrap().len(), 2);
}

#[test]
fn calibrated_envelopes_contain_the_closed_form() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "lin.toml", LINEAR_GAUSSIAN);
    let cal = tmp.path().join("cal");
    let o = jumpdens(&["calibrate", s(&cfg), "--times", "0.1,0.5,1", "--grid=-8:8:321", "--out", s(&cal)], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let env = cal.join("envelopes.json");

    let dens = tmp.path().join("d");
    jumpdens(&["density", s(&cfg), "--t", "0.5", "--grid=-8:8:161", "--out", s(&dens)], None);
    let curve = dens.join("density.csv");
    let chk = tmp.path().join("chk");
    let args = ["check", s(&cfg), "--envelopes", s(&env), "--curve", s(&curve), "--out", s(&chk)];
    let o = jumpdens(&args, None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(chk.join("containment.csv").exists());

    // Shrinking C_T below its fitted value must break containment.
    let mut set: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&env).unwrap()).unwrap();
    set["constants"]["big_c"] = serde_json::json!(1.01);
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, set.to_string()).unwrap();
    let chk2 = tmp.path().join("chk2");
    let args = ["check", s(&cfg), "--envelopes", s(&bad), "--curve", s(&curve), "--out", s(&chk2)];
    let o = jumpdens(&args, None);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("violated at t = 0.5, r = "), "{err}");
    assert!(chk2.join("manifest.json").exists());
    assert!(manifest(&chk2)["parameters"]["violations"].as_u64().unwrap() > 0);
}

#[test]
fn simulation_is_thread_count_independent() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "nl.toml", NONLINEAR_LAPLACE);
    let mut outputs = Vec::new();
    for n in ["1", "4", "8"] {
        let sim = tmp.path().join(format!("s{n}"));
        let o = jumpdens(&["simulate", s(&cfg), "--t", "1", "--x=0.5", "--out", s(&sim)], Some(n));
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let kde = tmp.path().join(format!("k{n}"));
        let o = jumpdens(&["density", s(&cfg), "--t", "1", "--method", "kde", "--out", s(&kde)], Some(n));
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push((
            std::fs::read(sim.join("ensemble.csv")).unwrap(),
            std::fs::read(sim.join("ensemble.bin")).unwrap(),
            std::fs::read(kde.join("density.csv")).unwrap(),
        ));
        assert_eq!(manifest(&sim)["seed"], 9);
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn auto_seed_is_recorded() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "lin.toml", &LINEAR_GAUSSIAN.replace("seed = 42\n", ""));
    let sim = tmp.path().join("s");
    let o = jumpdens(&["simulate", s(&cfg), "--t", "0.5", "--paths", "100", "--out", s(&sim)], None);
    assert_eq!(o.status.code(), Some(0));
    assert!(manifest(&sim)["seed"].is_u64());
}

#[test]
fn bounds_are_monotone_and_capped() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "nl.toml", NONLINEAR_LAPLACE);
    let out = tmp.path().join("b");
    let o = jumpdens(&["bounds", s(&cfg), "--t", "0.5", "--rmax", "12", "--points", "49", "--out", s(&out)], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let tail = read_column(&out.join("bounds.csv"), 1);
    assert_eq!(tail[0].1, 1.0);
    assert!(tail.windows(2).all(|w| w[1].1 <= w[0].1));
    assert!(tail.iter().all(|(_, v)| *v > 0.0 && *v <= 1.0));
    // Vacuous below r = c1 t = 0.15.
    assert_eq!(tail[1].1, 1.0);
    assert_eq!(manifest(&out)["parameters"]["rigorous"], true);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let missing = tmp.path().join("missing.toml");
    assert_eq!(jumpdens(&["density", s(&missing), "--t", "1", "--out", s(&out)], None).status.code(), Some(1));

    let bad = write_config(tmp.path(), "bad.toml", "[model]\njump_rate = -1\n[jump_law]\nkind = \"gaussian\"\nvariance = 1.0\n");
    assert_eq!(jumpdens(&["density", s(&bad), "--t", "1", "--out", s(&out)], None).status.code(), Some(1));

    let cfg = write_config(tmp.path(), "lin.toml", LINEAR_GAUSSIAN);
    assert_eq!(jumpdens(&["density", s(&cfg), "--t", "1", "--bogus", "--out", s(&out)], None).status.code(), Some(1));
    assert_eq!(jumpdens(&["density", s(&cfg), "--t", "2", "--out", s(&out)], None).status.code(), Some(1));

    let nl = write_config(tmp.path(), "nl.toml", NONLINEAR_LAPLACE);
    assert_eq!(jumpdens(&["density", s(&nl), "--t", "1", "--method", "closed", "--out", s(&out)], None).status.code(), Some(1));

    // Reference densities underflow to zero far out: calibration is a numeric failure.
    let o = jumpdens(&["calibrate", s(&cfg), "--times", "0.1", "--grid=-200:200:101", "--out", s(&out)], None);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.join("manifest.json").exists());

    assert_eq!(jumpdens(&["--help"], None).status.code(), Some(0));
}
