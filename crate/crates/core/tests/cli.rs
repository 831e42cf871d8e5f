//! End-to-end tests of the command-line surface: file schemas, exit
//! codes, artifact plumbing.

use std::path::{Path, PathBuf};
use std::process::Command;

use gchan::io::{ChannelFile, StateFile};

fn exe() -> &'static str {
    env!("CARGO_BIN_EXE_gchan")
}

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn gchan(args: &[&str]) -> Run {
    let out = Command::new(exe())
        .args(args)
        .output()
        .expect("spawn gchan");
    Run {
        code: out.status.code().expect("exit code"),
        stdout: String::from_utf8(out.stdout).expect("utf-8 stdout"),
        stderr: String::from_utf8(out.stderr).expect("utf-8 stderr"),
    }
}

fn report(run: &Run) -> serde_json::Value {
    serde_json::from_str(run.stdout.lines().next().expect("one report line"))
        .expect("report is json")
}

fn workdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("gchan-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_attenuator(path: &Path, theta: f64) {
    let (c2, s2) = (theta.cos(), theta.sin().powi(2));
    let file = ChannelFile {
        d: 1,
        x: vec![vec![c2, 0.0], vec![0.0, c2]],
        y: vec![vec![s2, 0.0], vec![0.0, s2]],
        w: vec![0.0, 0.0],
        convention: "blocked".into(),
    };
    std::fs::write(path, gchan::io::to_json_string(&file).unwrap()).unwrap();
}

#[test]
fn check_flags_the_counterexample() {
    let dir = workdir("check");
    let ch = dir.join("cx.json");
    let out = gchan(&[
        "counterexample",
        "--d",
        "1",
        "--out",
        ch.to_str().unwrap(),
        "--json",
    ]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let rep = report(&out);
    assert_eq!(rep["verdicts"]["fd0_member"], false);
    assert_eq!(rep["verdicts"]["fd_sufficient"], true);
    assert_eq!(rep["verdicts"]["fd_sample_falsified"], false);

    let out = gchan(&["check", ch.to_str().unwrap(), "--json"]);
    assert_eq!(out.code, 2);
    let rep = report(&out);
    assert_eq!(rep["verdicts"]["valid"], false);
    let min_eig = rep["residuals"]["min_eig_minus"].as_f64().unwrap();
    assert!((min_eig + 1.0).abs() <= 1e-9, "min_eig {min_eig}");
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn check_accepts_valid_channel() {
    let dir = workdir("check-ok");
    let ch = dir.join("att.json");
    write_attenuator(&ch, 0.7);
    let out = gchan(&["check", ch.to_str().unwrap(), "--json"]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert_eq!(report(&out)["verdicts"]["valid"], true);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn dilate_then_verify_attenuator() {
    let dir = workdir("dilate");
    let ch = dir.join("att.json");
    let dil = dir.join("dil.json");
    write_attenuator(&ch, 0.9);
    let out = gchan(&[
        "dilate",
        ch.to_str().unwrap(),
        "--out",
        dil.to_str().unwrap(),
        "--json",
    ]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let rep = report(&out);
    assert_eq!(rep["verdicts"]["d_env"], 2);

    let out = gchan(&[
        "verify",
        ch.to_str().unwrap(),
        dil.to_str().unwrap(),
        "--samples",
        "20",
        "--json",
    ]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let rep = report(&out);
    let dev = rep["residuals"]["max_deviation"].as_f64().unwrap();
    assert!(dev <= 1e-8, "deviation {dev}");
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn verify_rejects_mangled_dilation() {
    let dir = workdir("verify-bad");
    let ch = dir.join("att.json");
    let dil = dir.join("dil.json");
    write_attenuator(&ch, 0.9);
    let out = gchan(&[
        "dilate",
        ch.to_str().unwrap(),
        "--out",
        dil.to_str().unwrap(),
    ]);
    assert_eq!(out.code, 0);
    // perturb one entry of G
    let mut file: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&dil).unwrap()).unwrap();
    let entry = &mut file["G"][0][0];
    *entry = serde_json::json!(entry.as_f64().unwrap() + 1e-3);
    std::fs::write(&dil, serde_json::to_string(&file).unwrap()).unwrap();
    let out = gchan(&[
        "verify",
        ch.to_str().unwrap(),
        dil.to_str().unwrap(),
        "--json",
    ]);
    assert_eq!(out.code, 2);
    let dev = report(&out)["residuals"]["max_deviation"].as_f64().unwrap();
    assert!(dev > 1e-4, "deviation {dev}");
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn interferometer_exit_codes() {
    let dir = workdir("interf");
    let id = dir.join("id.json");
    write_attenuator(&id, 0.0);
    let out = gchan(&["interferometer", id.to_str().unwrap(), "--json"]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let rep = report(&out);
    assert_eq!(rep["verdicts"]["status"], "yes");
    assert_eq!(rep["verdicts"]["reason"], "q_found");

    let cx = dir.join("cx.json");
    let out = gchan(&["counterexample", "--d", "1", "--out", cx.to_str().unwrap()]);
    assert_eq!(out.code, 0);
    let out = gchan(&["interferometer", cx.to_str().unwrap(), "--json"]);
    assert_eq!(out.code, 2);
    let rep = report(&out);
    assert_eq!(rep["verdicts"]["status"], "no");
    assert_eq!(rep["verdicts"]["reason"], "invalid_channel");
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn evolve_displacement_moves_the_mean() {
    let dir = workdir("evolve");
    let ch_path = dir.join("disp.json");
    let st_path = dir.join("vac.json");
    let file = ChannelFile {
        d: 1,
        x: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        y: vec![vec![0.0, 0.0], vec![0.0, 0.0]],
        w: vec![0.25, -1.5],
        convention: "blocked".into(),
    };
    std::fs::write(&ch_path, gchan::io::to_json_string(&file).unwrap()).unwrap();
    let vac = StateFile {
        d: 1,
        mean: vec![0.0, 0.0],
        cov: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
    };
    std::fs::write(&st_path, gchan::io::to_json_string(&vac).unwrap()).unwrap();
    let out = gchan(&[
        "evolve",
        ch_path.to_str().unwrap(),
        st_path.to_str().unwrap(),
        "--json",
    ]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let rep = report(&out);
    assert_eq!(rep["artifact"]["mean"][0], 0.25);
    assert_eq!(rep["artifact"]["mean"][1], -1.5);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn compose_attenuators_through_files() {
    let dir = workdir("compose");
    let a = dir.join("a.json");
    let b = dir.join("b.json");
    let out_path = dir.join("ab.json");
    write_attenuator(&a, 0.4);
    write_attenuator(&b, 0.8);
    let out = gchan(&[
        "compose",
        a.to_str().unwrap(),
        b.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
        "--json",
    ]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let file: ChannelFile =
        gchan::io::from_json_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    let expect = 0.4f64.cos() * 0.8f64.cos();
    assert!((file.x[0][0] - expect).abs() <= 1e-12);
    assert!((file.y[0][0] - (1.0 - expect * expect)).abs() <= 1e-12);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn modes_and_transpose_map() {
    let dir = workdir("modes");
    let att = dir.join("att.json");
    write_attenuator(&att, 0.6);
    let out = gchan(&["modes", att.to_str().unwrap(), "--json"]);
    assert_eq!(out.code, 0);
    assert_eq!(report(&out)["verdicts"]["env_mode_bound"], 2);

    let id = dir.join("id.json");
    write_attenuator(&id, 0.0);
    let out = gchan(&["modes", id.to_str().unwrap(), "--json"]);
    assert_eq!(out.code, 0);
    assert_eq!(report(&out)["verdicts"]["env_mode_bound"], 0);

    let out = gchan(&["transpose-map", "--d", "2", "--json"]);
    assert_eq!(out.code, 0);
    let rep = report(&out);
    assert_eq!(rep["verdicts"]["valid"], false);
    let min_eig = rep["residuals"]["min_eig_minus"].as_f64().unwrap();
    assert!((min_eig + 2.0).abs() <= 1e-9);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn error_exit_codes() {
    let dir = workdir("errors");
    // missing file
    let out = gchan(&["check", dir.join("nope.json").to_str().unwrap()]);
    assert_eq!(out.code, 65);
    // malformed json
    let bad = dir.join("bad.json");
    std::fs::write(&bad, "{\"d\": 1").unwrap();
    let out = gchan(&["check", bad.to_str().unwrap()]);
    assert_eq!(out.code, 65);
    // wrong shape
    let shape = dir.join("shape.json");
    std::fs::write(
        &shape,
        r#"{"d": 2, "X": [[1.0]], "Y": [[0.0]], "w": [0.0], "convention": "blocked"}"#,
    )
    .unwrap();
    let out = gchan(&["check", shape.to_str().unwrap()]);
    assert_eq!(out.code, 65);
    // usage errors
    let out = gchan(&["frobnicate"]);
    assert_eq!(out.code, 64);
    let out = gchan(&["check"]);
    assert_eq!(out.code, 64);
    // help is not an error
    let out = gchan(&["--help"]);
    assert_eq!(out.code, 0);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn selftest_passes_and_reports() {
    let out = gchan(&["selftest", "--json", "--seed", "3"]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let rep = report(&out);
    assert_eq!(rep["verdicts"]["all"], "pass");
    assert_eq!(rep["seed"], 3);
    assert_eq!(rep["tolerances"]["residual_tol"], 1e-8);
}
