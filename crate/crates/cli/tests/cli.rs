use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use etc_traffic::quotient::Abstraction;
use etc_traffic_cli::config::parse;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn source(name: &str) -> String {
    std::fs::read_to_string(configs().join(name)).unwrap()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_etc-traffic"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn line_of(src: &str, prefix: &str) -> usize {
    src.lines().position(|l| l.starts_with(prefix)).unwrap() + 1
}

#[test]
fn shipped_configs_load() {
    for name in ["unperturbed.toml", "perturbed.toml", "smoke.toml"] {
        let job = parse(&source(name), name).unwrap_or_else(|e| panic!("{e}"));
        assert!(job.simulation.is_some());
        assert_eq!(job.sha256.len(), 64);
    }
    let u = parse(&source("unperturbed.toml"), "u").unwrap();
    let p = parse(&source("perturbed.toml"), "p").unwrap();
    assert!(!u.model.is_perturbed());
    assert!(p.model.is_perturbed());
    assert_eq!(u.abstraction.heartbeat, 0.025);
    assert_eq!(p.abstraction.heartbeat, 0.04);
    assert_eq!(u.abstraction.divisions, vec![7, 7]);
}

#[test]
fn bad_values_are_reported_at_their_key() {
    let base = source("smoke.toml");
    let cases: Vec<(&str, &str, &str)> = vec![
        ("rho = ", "rho = -1.0", "abstraction.rho"),
        ("divisions = ", "divisions = [3]", "abstraction.divisions"),
        ("trigger = ", "trigger = \"e1^2 + e2^2 + 0.01^2\"", "system.trigger"),
        ("x0 = ", "x0 = [3.0, 0.0]", "simulation.x0"),
        ("heartbeat = ", "heartbeat = 0.0", "abstraction.heartbeat"),
        ("tau_star = ", "tau_star = -1e-3", "abstraction.tau_star"),
        ("state_lo = ", "state_lo = [1.0, -1.0]", "abstraction.state_lo"),
    ];
    for (prefix, replacement, key) in cases {
        let line = line_of(&base, prefix);
        let src: String = base
            .lines()
            .map(|l| if l.starts_with(prefix) { replacement } else { l })
            .collect::<Vec<_>>()
            .join("\n");
        let err = parse(&src, "job.toml").expect_err(replacement);
        assert_eq!(err.key, key, "{err}");
        assert_eq!(err.at.map(|a| a.0), Some(line), "{err}");
        assert!(err.to_string().starts_with(&format!("job.toml:{line}:")), "{err}");
    }
}

#[test]
fn bad_expressions_name_the_field() {
    let base = source("smoke.toml");
    let line = line_of(&base, "    \"-x1\"");
    for bad in ["\"-x1 +* 2\",", "\"-x1 + y\",", "\"-x1 + sin(x2)\","] {
        let src = base.replacen("\"-x1\",", bad, 1);
        let err = parse(&src, "job.toml").expect_err(bad);
        assert_eq!(err.key, "system.field[0]", "{err}");
        assert_eq!(err.at.map(|a| a.0), Some(line), "{err}");
    }
}

#[test]
fn mutated_configs_fail_with_a_location() {
    let base = source("perturbed.toml");
    let lines: Vec<&str> = base.lines().collect();
    let mut rejected = 0;
    for i in 0..lines.len() {
        let mutations = [
            String::new(),
            lines[i].replacen(|c: char| c.is_ascii_digit(), "x", 1),
            lines[i].replacen('=', "= -", 1),
            lines[i].replacen(']', ", 0.5]", 1),
            lines[i].replacen('"', "", 1),
        ];
        for m in mutations {
            if m == lines[i] {
                continue;
            }
            let mut copy = lines.clone();
            copy[i] = &m;
            let src = copy.join("\n");
            if let Err(e) = parse(&src, "m.toml") {
                rejected += 1;
                let (line, col) = e.at.unwrap_or_else(|| panic!("no location for mutation of line {}: {e}", i + 1));
                assert!(line >= 1 && line <= lines.len() + 1 && col >= 1, "{e}");
            }
        }
    }
    assert!(rejected > 30, "only {rejected} mutations rejected");
}

#[test]
fn missing_trigger_exits_with_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    let src: String = source("smoke.toml")
        .lines()
        .filter(|l| !l.starts_with("trigger"))
        .map(|l| format!("{l}\n"))
        .collect();
    std::fs::write(&path, src).unwrap();
    let o = run(&["info", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("trigger"), "{err}");
    assert!(err.contains("c.toml:"), "{err}");
}

#[test]
fn missing_file_exits_with_error() {
    let o = run(&["info", "--config", "/nonexistent/job.toml"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("/nonexistent/job.toml"));
}

#[test]
fn perturbed_info_reports_first_derivative_only() {
    let cfg = configs().join("perturbed.toml");
    let src = source("perturbed.toml").replace("p = 1", "p = 5");
    let dir = tempfile::tempdir().unwrap();
    let five = dir.path().join("p5.toml");
    std::fs::write(&five, src).unwrap();
    let o = run(&["info", "--config", five.to_str().unwrap(), "--jobs", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("p = 1 instead of 5"), "{out}");
    assert!(out.contains("alpha = 2, theta = 1, p = 1"), "{out}");
    let o = run(&["info", "--config", cfg.to_str().unwrap(), "--jobs", "1"]);
    assert!(!stdout(&o).contains("instead of"));
}

#[test]
fn perturbed_abstraction_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("perturbed.toml");
    let mut outputs = Vec::new();
    for (k, jobs) in ["1", "2"].iter().enumerate() {
        let out = dir.path().join(format!("a{k}.json"));
        let o = run(&[
            "abstract",
            "--config",
            cfg.to_str().unwrap(),
            "--jobs",
            jobs,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(matches!(o.status.code(), Some(0) | Some(2)), "{}", stderr(&o));
        outputs.push((
            std::fs::read(&out).unwrap(),
            std::fs::read(out.with_extension("regions.tsv")).unwrap(),
        ));
    }
    assert!(outputs[0].0 == outputs[1].0, "abstraction JSON differs between runs");
    assert!(outputs[0].1 == outputs[1].1, "region log differs between runs");
}

#[test]
fn smoke_abstract_simulate_validate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = configs().join("smoke.toml");
    let cfg_s = cfg.to_str().unwrap();
    let json = d.join("a.json");
    let dot = d.join("a.dot");
    let pipes = d.join("pipes.csv");
    let o = run(&[
        "abstract",
        "--config",
        cfg_s,
        "--out",
        json.to_str().unwrap(),
        "--dot",
        dot.to_str().unwrap(),
        "--flowpipes",
        pipes.to_str().unwrap(),
    ]);
    assert!(matches!(o.status.code(), Some(0) | Some(2)), "{}", stderr(&o));
    assert!(stderr(&o).contains("9 regions"));

    let a = Abstraction::from_json(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(a.regions.len(), 9);
    assert_eq!(a.heartbeat, 0.025);
    assert_eq!(a.provenance.tool_version, env!("CARGO_PKG_VERSION"));
    let tsv = std::fs::read_to_string(json.with_extension("regions.tsv")).unwrap();
    assert_eq!(tsv.lines().filter(|l| !l.starts_with('#')).count(), 10);
    let dot_src = std::fs::read_to_string(&dot).unwrap();
    assert!(dot_src.starts_with("digraph"));
    assert_eq!(dot_src.matches("->").count(), a.transitions.len());
    let pipes_src = std::fs::read_to_string(&pipes).unwrap();
    assert!(pipes_src.lines().count() > 9);

    let trace = d.join("t.csv");
    let o = run(&[
        "simulate",
        "--config",
        cfg_s,
        "--out",
        trace.to_str().unwrap(),
        "--abstraction",
        json.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(&trace).unwrap();
    assert!(csv.starts_with("i,t_i,x1,x2,tau_i,region_id,capped\n"));
    assert!(csv.lines().count() > 100);
    assert!(std::fs::read_to_string(trace.with_extension("dat")).unwrap().contains("gnuplot"));

    let report = d.join("v.json");
    let o = run(&[
        "validate",
        "--config",
        cfg_s,
        "--abstraction",
        json.to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("result: PASS"), "{text}");
    assert!(!text.contains("different configuration"));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["pass"], serde_json::Value::Bool(true));

    // Same system, edited file: still valid, but flagged.
    let edited = d.join("edited.toml");
    std::fs::write(&edited, format!("# edited\n{}", source("smoke.toml"))).unwrap();
    let o = run(&[
        "validate",
        "--config",
        edited.to_str().unwrap(),
        "--abstraction",
        json.to_str().unwrap(),
        "--out",
        d.join("v2.json").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("different configuration"), "{}", stdout(&o));

    // A heartbeat the abstraction was not built for produces violations.
    let longer = d.join("longer.toml");
    std::fs::write(&longer, source("smoke.toml").replace("heartbeat = 0.025", "heartbeat = 0.05")).unwrap();
    let o = run(&[
        "validate",
        "--config",
        longer.to_str().unwrap(),
        "--abstraction",
        json.to_str().unwrap(),
        "--out",
        d.join("v3.json").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stdout(&o));
    assert!(stdout(&o).contains("heartbeat differs"));
}

#[test]
fn corrupt_abstraction_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"version\": 99}").unwrap();
    let cfg = configs().join("smoke.toml");
    let o = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--abstraction",
        bad.to_str().unwrap(),
        "--out",
        dir.path().join("t.csv").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bad.json"));
}
