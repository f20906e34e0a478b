use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_haptic-cf"))
        .args(args)
        .env("NO_COLOR", "1")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn run_writes_outputs_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a");
    let res = bin(&[
        "run",
        "--preset",
        "case_a",
        "--quiet",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    assert!(res.stdout.is_empty());

    let summary = read_json(&out.join("summary.json"));
    assert_eq!(summary["outcome"], "converged");
    assert!(summary.get("wall_time_s").is_none());
    let manifest = read_json(&out.join("manifest.json"));
    assert_eq!(manifest["trajectory_schema"], "trajectory-v1");
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    assert!(manifest["wall_time_s"].as_f64().unwrap() >= 0.0);
    let csv = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6002);
    assert!(fs::read_dir(&out).unwrap().all(|e| !e
        .unwrap()
        .file_name()
        .to_string_lossy()
        .starts_with('.')));
}

#[test]
fn reruns_are_byte_identical_and_hash_follows_config() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, extra: &[&str]| {
        let out = dir.path().join(name);
        let mut args = vec![
            "run",
            "--preset",
            "case_d",
            "--quiet",
            "--out",
            out.to_str().unwrap(),
        ];
        args.extend_from_slice(extra);
        assert_eq!(code(&bin(&args)), 13);
        out
    };
    let a = run("a", &[]);
    let b = run("b", &[]);
    let c = run("c", &["--seed", "9"]);
    for f in ["trajectory.csv", "summary.json", "config.json"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    assert_ne!(
        fs::read(a.join("trajectory.csv")).unwrap(),
        fs::read(c.join("trajectory.csv")).unwrap()
    );
    let hash = |d: &Path| read_json(&d.join("manifest.json"))["config_sha256"].clone();
    assert_eq!(hash(&a), hash(&b));
    assert_ne!(hash(&a), hash(&c));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(code(&bin(&["run", "--preset", "nope", "--out", out])), 2);
    assert_eq!(code(&bin(&["run", "--out", out])), 2);
    assert_eq!(
        code(&bin(&[
            "run",
            "--preset",
            "case_a",
            "--set",
            "gains.kp=1",
            "--out",
            out
        ])),
        2
    );
    assert_eq!(
        code(&bin(&[
            "run",
            "--preset",
            "case_a",
            "--set",
            "arms.5.beta=1",
            "--out",
            out
        ])),
        2
    );
    assert_eq!(
        code(&bin(&[
            "run", "--preset", "case_a", "--set", "dt=0.007", "--out", out
        ])),
        3
    );
    assert_eq!(
        code(&bin(&[
            "run",
            "--preset",
            "case_a",
            "--set",
            "gains.k_p=1",
            "--out",
            out
        ])),
        3
    );
    assert_eq!(
        code(&bin(&[
            "run", "--preset", "case_b", "--quiet", "--out", out
        ])),
        10
    );
    let anti = bin(&[
        "run",
        "--preset",
        "case_a",
        "--quiet",
        "--set",
        "arms.0.beta=1",
        "--set",
        "arms.1.beta=1",
        "--out",
        out,
    ]);
    assert_eq!(code(&anti), 11);
    assert_eq!(
        code(&bin(&[
            "montecarlo",
            "--preset",
            "case_a_vision",
            "--runs",
            "0",
            "--out",
            out
        ])),
        2
    );
}

#[test]
fn toml_config_matches_preset() {
    let dir = tempfile::tempdir().unwrap();
    let shown = bin(&["presets", "--show", "case_c"]);
    assert_eq!(code(&shown), 0);
    let value: Value = serde_json::from_slice(&shown.stdout).unwrap();
    let toml_path = dir.path().join("case_c.toml");
    fs::write(&toml_path, toml::to_string(&value).unwrap()).unwrap();
    let json_path = dir.path().join("case_c.json");
    fs::write(&json_path, serde_json::to_string(&value).unwrap()).unwrap();

    let run = |cfg: &Path, name: &str| {
        let out = dir.path().join(name);
        let res = bin(&[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--quiet",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&res), 10, "{}", String::from_utf8_lossy(&res.stderr));
        fs::read(out.join("trajectory.csv")).unwrap()
    };
    let preset_out = dir.path().join("p");
    bin(&[
        "run",
        "--preset",
        "case_c",
        "--quiet",
        "--out",
        preset_out.to_str().unwrap(),
    ]);
    let expected = fs::read(preset_out.join("trajectory.csv")).unwrap();
    assert_eq!(run(&toml_path, "t"), expected);
    assert_eq!(run(&json_path, "j"), expected);

    fs::write(dir.path().join("broken.json"), "{ not json").unwrap();
    let broken = dir.path().join("broken.json");
    assert_eq!(
        code(&bin(&["run", "--config", broken.to_str().unwrap()])),
        2
    );
}

#[test]
fn montecarlo_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("mc");
    let res = bin(&[
        "montecarlo",
        "--preset",
        "case_a_vision",
        "--runs",
        "12",
        "--quiet",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 0);
    let agg = read_json(&out.join("aggregate.json"));
    assert_eq!(agg["n_runs"], 12);
    assert_eq!(agg["converged_fraction"], 1.0);
    assert_eq!(agg["anti_aligned"], 0);
    let runs = fs::read_to_string(out.join("runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 13);
    assert!(runs
        .lines()
        .skip(1)
        .all(|l| l.split(',').nth(1) == Some("converged")));
}

#[test]
fn piball_export() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b");
    bin(&[
        "run",
        "--preset",
        "case_b",
        "--quiet",
        "--out",
        out.to_str().unwrap(),
    ]);
    let ball = dir.path().join("ball.csv");
    let res = bin(&[
        "export-piball",
        out.join("trajectory.csv").to_str().unwrap(),
        "--out",
        ball.to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 0);
    let text = fs::read_to_string(&ball).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,x,y,z"));
    for line in lines {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!((v[1] * v[1] + v[2] * v[2] + v[3] * v[3]).sqrt() <= std::f64::consts::PI + 1e-12);
    }

    let bad = dir.path().join("bad.csv");
    let header = fs::read_to_string(out.join("trajectory.csv"))
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_owned();
    fs::write(&bad, format!("{header}\n1,2,3\n")).unwrap();
    assert_eq!(
        code(&bin(&[
            "export-piball",
            bad.to_str().unwrap(),
            "--out",
            ball.to_str().unwrap()
        ])),
        2
    );
    let missing = dir.path().join("missing.csv");
    assert_eq!(
        code(&bin(&[
            "export-piball",
            missing.to_str().unwrap(),
            "--out",
            ball.to_str().unwrap()
        ])),
        2
    );
}

#[test]
fn preset_listing() {
    let res = bin(&["presets"]);
    assert_eq!(code(&res), 0);
    let names = String::from_utf8(res.stdout).unwrap();
    for name in [
        "case_a",
        "case_b",
        "case_c",
        "case_d",
        "edge_grasp",
        "case_a_vision",
    ] {
        assert!(names.lines().any(|l| l == name));
    }
}
