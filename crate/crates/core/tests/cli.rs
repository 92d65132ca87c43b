use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use repeated_delegation::instances::InstanceModel;

fn delegate(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_delegate"));
    cmd.args(args).env_remove("DELEGATE_OUT_DIR");
    if let Some(dir) = env_out {
        cmd.env("DELEGATE_OUT_DIR", dir);
    }
    cmd.output().expect("spawn delegate")
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

fn write_spec(dir: &Path, body: &str) -> String {
    let p = dir.join("spec.json");
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

const SMOKE: &str = r#"{
    "name": "smoke",
    "instance": {"fixture": "P1(0.1, 1e-14)"},
    "mechanism": {"name": "delayed_binary_search", "params": {"gamma": 0.9, "y_min": 0.05}},
    "agent": {"name": "adversarial_eps", "params": {"eps": 0.025}, "gamma": 0.9},
    "T": [10000],
    "seeds": [1]
}"#;

#[test]
fn fixtures_list_names_every_family() {
    let o = delegate(&["fixtures", "list"], None);
    assert!(o.status.success());
    let s = text(&o);
    for name in ["P1", "P2", "AppendixK", "TwoUniformComplement", "TwoUniformComplementTruncated"] {
        assert!(s.contains(name), "missing {name} in\n{s}");
    }
}

#[test]
fn fixtures_show_prints_the_derived_optimum() {
    let o = delegate(&["fixtures", "show", "TwoUniformComplement"], None);
    assert!(o.status.success());
    let s = text(&o);
    assert!(s.contains("tau* = 0.41421 (derived"), "{s}");
    assert!(s.contains("f(tau*) = 0.55228 (derived"), "{s}");
}

#[test]
fn fixtures_export_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p2.json");
    let o = delegate(&["fixtures", "export", "P2", path.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", text(&o));
    let inst: InstanceModel = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(inst.k(), 1);
    assert_eq!(inst.max_x(), Some(0.1));
}

#[test]
fn unknown_fixture_exits_3() {
    let o = delegate(&["fixtures", "show", "P9"], None);
    assert_eq!(o.status.code(), Some(3), "{}", text(&o));
}

#[test]
fn smoke_run_writes_one_summary_row() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), SMOKE);
    let out = dir.path().join("out");
    let o = delegate(&["run", "--spec", &spec, "--out", out.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", text(&o));
    let summary = fs::read_to_string(out.join("smoke/summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines[0], "T,mean_regret,stddev,runtime");
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("10000,"));
    assert!(out.join("smoke/traces/T10000_seed1.csv").exists());
    let plot = fs::read_to_string(out.join("smoke/regret_vs_T.dat")).unwrap();
    assert!(plot.starts_with('#') && plot.lines().count() == 2);
}

#[test]
fn unknown_mechanism_exits_3_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), &SMOKE.replace("delayed_binary_search", "delayed_bianry_search"));
    let o = delegate(&["run", "--spec", &spec, "--out", dir.path().to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(3), "{}", text(&o));
    assert!(text(&o).contains("mechanism"), "{}", text(&o));
}

#[test]
fn unknown_spec_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), &SMOKE.replace("\"seeds\"", "\"sedes\""));
    let o = delegate(&["run", "--spec", &spec], None);
    assert_eq!(o.status.code(), Some(3), "{}", text(&o));
    assert!(text(&o).contains("sedes"));
}

#[test]
fn malformed_json_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "{\"name\": \"x\",");
    let o = delegate(&["run", "--spec", &spec], None);
    assert_eq!(o.status.code(), Some(2), "{}", text(&o));
}

#[test]
fn missing_spec_file_is_a_runtime_error() {
    let o = delegate(&["run", "--spec", "/nonexistent/spec.json"], None);
    assert_eq!(o.status.code(), Some(1), "{}", text(&o));
}

#[test]
fn sweep_writes_one_trace_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        r#"{
            "name": "sweep",
            "instance": {"generator": {"random": {"k": 5, "seed": 3}}},
            "mechanism": {"name": "iterative_search", "params": {}},
            "agent": {"name": "myopic", "params": {}},
            "T": [1000, 10000, 100000],
            "seeds": [0, 1, 2, 3, 4, 5, 6, 7, 8, 9]
        }"#,
    );
    let o = delegate(&["run", "--spec", &spec, "--jobs", "4"], Some(&dir.path().join("env")));
    assert!(o.status.success(), "{}", text(&o));
    let root = dir.path().join("env/sweep");
    assert_eq!(fs::read_dir(root.join("traces")).unwrap().count(), 30);
    assert_eq!(fs::read_to_string(root.join("summary.csv")).unwrap().lines().count(), 4);
}

#[test]
fn seed_override_replaces_the_spec_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), &SMOKE.replace("[10000]", "[500]"));
    let out = dir.path().join("o");
    let o = delegate(&["run", "--spec", &spec, "--out", out.to_str().unwrap(), "--seed-override", "7,8"], None);
    assert!(o.status.success(), "{}", text(&o));
    let mut names: Vec<String> = fs::read_dir(out.join("smoke/traces"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(names, ["T500_seed7.csv", "T500_seed8.csv"]);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        r#"{
            "name": "ucb",
            "instance": {"fixture": "TwoUniformComplement"},
            "mechanism": {"name": "ucb_threshold", "params": {}},
            "agent": {"name": "myopic", "params": {}},
            "T": [2000],
            "seeds": [1, 2, 3]
        }"#,
    );
    let read = |sub: &str| {
        let out = dir.path().join(sub);
        let o = delegate(&["run", "--spec", &spec, "--out", out.to_str().unwrap()], None);
        assert!(o.status.success(), "{}", text(&o));
        ["summary.csv", "regret_vs_T.dat", "traces/T2000_seed2.csv"]
            .map(|f| fs::read(out.join("ucb").join(f)).unwrap())
    };
    assert_eq!(read("a"), read("b"));
}

#[test]
fn bad_suite_is_a_usage_error() {
    let o = delegate(&["verify", "--suite", "medium"], None);
    assert_eq!(o.status.code(), Some(2));
}
