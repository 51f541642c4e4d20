use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use macsim_core::topology::{build_kd, load_topology};

fn macsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_macsim"))
        .args(args)
        .env("MACSIM_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn text(o: &Output) -> String {
    format!(
        "{}{}",
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    )
}

fn out_dir(dir: &Path) -> &str {
    dir.to_str().unwrap()
}

#[test]
fn lists_required_presets() {
    let o = macsim(&["list-presets"]);
    assert!(o.status.success());
    let s = text(&o);
    for name in [
        "thm2-demo",
        "thm3-demo",
        "thm4-demo",
        "twophase-suite",
        "wpaxos-suite",
        "flp-explore",
        "wpaxos-scaling",
    ] {
        assert!(s.contains(name), "{name} missing from\n{s}");
    }
    let o = macsim(&["list-presets", "thm3-demo"]);
    assert!(text(&o).contains("kind = \"kd-partition\""), "{}", text(&o));
}

#[test]
fn exports_k4_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("k4.edges");
    let o = macsim(&[
        "export-topology",
        "--topology",
        "kd:D=4",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", text(&o));
    let loaded = load_topology(&path).unwrap();
    let built = build_kd(4).unwrap();
    assert_eq!(loaded.n(), 14);
    assert_eq!(loaded.edges(), built.edges());
    assert_eq!(loaded.diameter(), built.diameter());
}

#[test]
fn partition_demo_passes_and_writes_results() {
    let dir = tempfile::tempdir().unwrap();
    let o = macsim(&["run", "--scenario", "thm3-demo", "--out-dir", out_dir(dir.path())]);
    assert!(o.status.success(), "{}", text(&o));
    let base = dir.path().join("thm3-demo");
    for f in ["runs.csv", "summary.csv", "report.json", "scenario.toml"] {
        assert!(base.join(f).exists(), "{f}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(base.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["verdict"], "pass");
    let checks = &report["construction"]["checks"]["checks"];
    assert!(checks
        .as_array()
        .unwrap()
        .iter()
        .any(|c| c["name"] == "agreement_violation_on_kd" && c["verdict"] == "pass"));
}

#[test]
fn failing_check_gives_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let o = macsim(&[
        "run",
        "--protocol",
        "twophase:fault=premature-decide",
        "--topology",
        "clique:n=4",
        "--scheduler",
        "sync",
        "--values",
        "alternate",
        "--out-dir",
        out_dir(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(1), "{}", text(&o));
    let runs = fs::read_to_string(dir.path().join("adhoc/runs.csv")).unwrap();
    assert!(runs.contains("agreement"), "{runs}");
}

#[test]
fn scenario_file_errors_carry_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(
        &path,
        "name = \"bad\"\n\n[experiment]\nkind = \"simulate\"\n\n[[experiment.runs]]\ntopology = \"clique:n=5\"\nscheduler = \"warp\"\nprotocol = \"twophase\"\n",
    )
    .unwrap();
    let o = macsim(&[
        "run",
        "--scenario",
        path.to_str().unwrap(),
        "--out-dir",
        out_dir(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).contains("line 8"), "{}", text(&o));
}

#[test]
fn scenario_file_runs_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.toml");
    fs::write(
        &path,
        r#"name = "repro"
seeds = "0..12"

[experiment]
kind = "simulate"

[[experiment.runs]]
topology = "random:n=8,p=0.2"
scheduler = "random:seed=0"
protocol = "wpaxos"
values = "random"
f_ack = 3
quiescent = true

[[experiment.runs]]
topology = "clique:n=6"
scheduler = "random:seed=0"
protocol = "twophase"
values = "random"
f_ack = 5
"#,
    )
    .unwrap();
    let run = |threads: &str, sub: &str| {
        let out = dir.path().join(sub);
        let o = Command::new(env!("CARGO_BIN_EXE_macsim"))
            .args([
                "run",
                "--scenario",
                path.to_str().unwrap(),
                "--out-dir",
                out.to_str().unwrap(),
            ])
            .env("MACSIM_THREADS", threads)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", text(&o));
        (
            fs::read_to_string(out.join("repro/runs.csv")).unwrap(),
            fs::read_to_string(out.join("repro/summary.csv")).unwrap(),
        )
    };
    let a = run("1", "a");
    let b = run("4", "b");
    assert_eq!(a, b);
    assert_eq!(a.0.lines().count(), 1 + 2 * 12);
    // The written scenario reproduces the run.
    let again = dir.path().join("c");
    let o = macsim(&[
        "run",
        "--scenario",
        dir.path().join("a/repro/scenario.toml").to_str().unwrap(),
        "--out-dir",
        again.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", text(&o));
    assert_eq!(fs::read_to_string(again.join("repro/runs.csv")).unwrap(), a.0);
}

#[test]
fn sweep_needs_seeds_and_prints_summary() {
    let dir = tempfile::tempdir().unwrap();
    let o = macsim(&[
        "sweep",
        "--scenario",
        "wpaxos-scaling",
        "--out-dir",
        out_dir(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = macsim(&[
        "sweep",
        "--scenario",
        "wpaxos-scaling",
        "--seeds",
        "0..3",
        "--out-dir",
        out_dir(dir.path()),
    ]);
    assert!(o.status.success(), "{}", text(&o));
    let s = text(&o);
    assert!(s.starts_with("scenario,cell,label,topology"), "{s}");
    assert_eq!(s.lines().filter(|l| l.starts_with("wpaxos-scaling,")).count(), 3);
}

#[test]
fn jsonl_runs_embed_reports_and_traces_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let o = macsim(&[
        "run",
        "--topology",
        "line:d=3",
        "--protocol",
        "wpaxos",
        "--scheduler",
        "maxdelay",
        "--fack",
        "2",
        "--seeds",
        "0..2",
        "--format",
        "jsonl",
        "--traces",
        "--out-dir",
        out_dir(dir.path()),
    ]);
    assert!(o.status.success(), "{}", text(&o));
    let lines = fs::read_to_string(dir.path().join("adhoc/runs.jsonl")).unwrap();
    let first: serde_json::Value = serde_json::from_str(lines.lines().next().unwrap()).unwrap();
    assert_eq!(first["protocol"], "wpaxos");
    assert!(first["report"]["checks"].as_array().unwrap().len() >= 5);
    let trace = fs::read_to_string(dir.path().join("adhoc/traces/cell0-seed1.jsonl")).unwrap();
    let header: serde_json::Value = serde_json::from_str(trace.lines().next().unwrap()).unwrap();
    assert_eq!(header["config"]["f_ack"], 2);
}

#[test]
fn constructions_refuse_cell_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let o = macsim(&[
        "run",
        "--scenario",
        "thm2-demo",
        "--fack",
        "3",
        "--out-dir",
        out_dir(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).contains("fixed construction"), "{}", text(&o));
    let o = macsim(&["run", "--scenario", "no-such-thing", "--out-dir", out_dir(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
}
