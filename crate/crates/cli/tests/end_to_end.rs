use std::fs;
use std::path::Path;
use std::process::Command as Process;

use indefla_cli::{run, Command};
use indefla_core::Schedule;
use serde_json::Value;
use tempfile::TempDir;

const BASE: &str = "\
# two-circle geometry, critical contrast
r_i = 1
r_e = 2
R = 8
mu = 1
a = 5
b = 6
spectrum = parametric
q = 2
s = 1
";

fn setup() -> (TempDir, String) {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, BASE).unwrap();
    let cfg = cfg.display().to_string();
    (dir, cfg)
}

fn args(cfg: &str, extra: &[&str], out: &Path) -> Vec<String> {
    let mut v = vec![cfg.to_string()];
    v.extend(extra.iter().map(|s| s.to_string()));
    v.push(format!("--out_dir={}", out.display()));
    v
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

#[test]
fn range_check_in_range_exits_zero() {
    let (dir, cfg) = setup();
    let out = dir.path().join("rc");
    let o = run(Command::RangeCheck, &args(&cfg, &[], &out), None, Schedule::Auto);
    assert_eq!(o.code, 0, "{}", o.stdout);
    let r = report(&out);
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["result"]["verdict"], "InRange");
    assert!((r["result"]["ratio"].as_f64().unwrap() - 0.64).abs() < 1e-12);
    // defaults are echoed
    assert_eq!(r["config"]["M_max"], 64);
    assert_eq!(r["config"]["margin"], 0.01);
}

#[test]
fn solve_not_in_range_exits_one_with_error_object() {
    let (dir, cfg) = setup();
    let out = dir.path().join("nr");
    let o = run(Command::Solve, &args(&cfg, &["--a", "2.5", "--b", "3"], &out), None, Schedule::Auto);
    assert_eq!(o.code, 1);
    let v: Value = serde_json::from_str(&o.stdout).unwrap();
    assert_eq!(v["error"]["code"], "not_in_range");
    assert_eq!(v["error"]["report"]["verdict"], "NotInRange");
    assert_eq!(report(&out)["error"]["code"], "not_in_range");
}

#[test]
fn dtn_modes_zero_to_eight_gives_54_rows() {
    let (dir, cfg) = setup();
    let out = dir.path().join("dtn");
    let o = run(Command::Dtn, &args(&cfg, &["--m_lo", "0", "--m_hi", "8"], &out), None, Schedule::Auto);
    assert_eq!(o.code, 0);
    let csv = fs::read_to_string(out.join("dtn.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "m,kind,e11,e12,e21,e22,overflow");
    assert_eq!(lines.len() - 1, 9 * 6);
    for kind in ["B", "C", "D", "Dinv", "Theta", "Psi"] {
        assert_eq!(lines.iter().filter(|l| l.split(',').nth(1) == Some(kind)).count(), 9);
    }
}

#[test]
fn overflowing_entries_are_clamped_and_flagged() {
    let (dir, cfg) = setup();
    let out = dir.path().join("big");
    let o = run(
        Command::Dtn,
        &args(&cfg, &["--r_i", "0.001", "--r_e", "1", "--M_max", "200", "--m_lo", "199", "--m_hi", "200"], &out),
        None,
        Schedule::Auto,
    );
    assert_eq!(o.code, 0, "{}", o.stdout);
    let csv = fs::read_to_string(out.join("dtn.csv")).unwrap();
    let flagged: Vec<&str> = csv.lines().skip(1).filter(|l| l.ends_with(",1")).collect();
    assert!(!flagged.is_empty());
    for l in flagged {
        for cell in l.split(',').skip(2).take(4) {
            let v: f64 = cell.parse().unwrap();
            assert!(v.is_finite());
        }
    }
}

#[test]
fn every_subcommand_is_deterministic() {
    let (dir, cfg) = setup();
    let cases: [(Command, &[&str]); 7] = [
        (Command::Dtn, &[]),
        (Command::Field, &["--mode", "4"]),
        (Command::Solve, &["--M_max", "16"]),
        (Command::RangeCheck, &[]),
        (Command::SweepDelta, &["--M_max", "8", "--deltas", "1e-1,1e-2,1e-3,1e-4"]),
        (Command::ThetaSpectrum, &[]),
        (Command::OracleCompare, &["--grid_points", "64", "--delta", "0.01"]),
    ];
    for (cmd, extra) in cases {
        let first = dir.path().join(format!("{}-1", cmd.name()));
        let second = dir.path().join(format!("{}-2", cmd.name()));
        let o1 = run(cmd, &args(&cfg, extra, &first), None, Schedule::Parallel);
        let o2 = run(cmd, &args(&cfg, extra, &second), None, Schedule::Sequential);
        assert_eq!(o1.code, 0, "{}: {}", cmd.name(), o1.stdout);
        assert_eq!(o2.code, 0);
        assert_eq!(o1.written.len(), o2.written.len());
        for (p1, p2) in o1.written.iter().zip(&o2.written) {
            let (a, b) = (fs::read_to_string(p1).unwrap(), fs::read_to_string(p2).unwrap());
            let strip = |s: &str, d: &Path| s.replace(&d.display().to_string(), "OUT");
            assert_eq!(strip(&a, &first), strip(&b, &second), "{} differs", p1.display());
            if p1.extension().is_some_and(|e| e == "csv") {
                assert!(a.lines().next().unwrap().chars().any(char::is_alphabetic), "header row");
            }
        }
    }
}

#[test]
fn sweep_emits_long_csv_and_plot() {
    let (dir, cfg) = setup();
    let out = dir.path().join("sw");
    let o = run(
        Command::SweepDelta,
        &args(&cfg, &["--M_max", "8", "--deltas", "1e-1,1e-2,1e-3,1e-4"], &out),
        None,
        Schedule::Auto,
    );
    assert_eq!(o.code, 0, "{}", o.stdout);
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("delta,region,h1_norm_sq"));
    assert_eq!(csv.lines().count(), 1 + 4 * 3);
    let gp = fs::read_to_string(out.join("plot_sweep.gp")).unwrap();
    assert!(gp.contains("set logscale x") && gp.contains("set logscale y"));
    let r = report(&out);
    assert_eq!(r["result"]["fits"].as_array().unwrap().len(), 3);
}

#[test]
fn theta_spectrum_classifies() {
    let (dir, cfg) = setup();
    let out = dir.path().join("th");
    let o = run(Command::ThetaSpectrum, &args(&cfg, &["--mu", "3"], &out), None, Schedule::Auto);
    assert_eq!(o.code, 0, "{}", o.stdout);
    let r = report(&out);
    assert_eq!(r["result"]["regime"], "NonCritical");
    assert_eq!(r["result"]["sign_consistent"], true);
    let csv = fs::read_to_string(out.join("theta.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("m,lambda1,lambda2,kind"));
    assert_eq!(csv.lines().count(), 1 + 65);

    let o = run(Command::ThetaSpectrum, &args(&cfg, &["--window_lo", "10", "--window_hi", "15"], &out), None, Schedule::Auto);
    assert_eq!(o.code, 2);
    assert!(o.stdout.contains("window_too_small"));
}

#[test]
fn oracle_compare_reports_second_order() {
    let (dir, cfg) = setup();
    let out = dir.path().join("or");
    let o = run(Command::OracleCompare, &args(&cfg, &["--grid_points", "65", "--delta", "0.05", "--mu", "2"], &out), None, Schedule::Auto);
    assert_eq!(o.code, 0, "{}", o.stdout);
    let r = report(&out);
    let table = r["result"]["convergence"].as_array().unwrap();
    for row in &table[1..] {
        let p = row["order"].as_f64().unwrap();
        assert!((1.8..2.2).contains(&p), "order {p}");
    }
    let csv = fs::read_to_string(out.join("oracle.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("r,exact,oracle,abs_error"));
}

#[test]
fn validation_and_parse_errors_exit_two() {
    let (dir, cfg) = setup();
    let out = dir.path().join("bad");
    let o = run(Command::Solve, &args(&cfg, &["--a", "1.5"], &out), None, Schedule::Auto);
    assert_eq!(o.code, 2);
    let v: Value = serde_json::from_str(&o.stdout).unwrap();
    assert_eq!(v["error"]["code"], "validation_error");
    assert_eq!(v["error"]["field"], "a");
    assert!(v["error"]["message"].as_str().unwrap().contains("r_e <= a"));

    let broken = dir.path().join("broken.cfg");
    fs::write(&broken, "r_i = 1\nr_e: 2\n").unwrap();
    let o = run(Command::Dtn, &[broken.display().to_string()], None, Schedule::Auto);
    assert_eq!(o.code, 2);
    let v: Value = serde_json::from_str(&o.stdout).unwrap();
    assert_eq!(v["error"]["code"], "parse_error");
    assert_eq!(v["error"]["line"], 2);
}

#[test]
fn out_override_wins() {
    let (dir, cfg) = setup();
    let out = dir.path().join("ignored");
    let real = dir.path().join("real");
    let o = run(Command::RangeCheck, &args(&cfg, &[], &out), Some(real.to_str().unwrap()), Schedule::Auto);
    assert_eq!(o.code, 0);
    assert!(real.join("report.json").exists());
    assert!(!out.exists());
}

#[test]
fn binary_exit_codes_and_environment() {
    let (dir, cfg) = setup();
    let bin = env!("CARGO_BIN_EXE_indefla");
    let out = dir.path().join("bin");
    let status = Process::new(bin)
        .args(["range-check", &cfg])
        .env("INDEFLA_OUT", &out)
        .env("INDEFLA_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(0));
    assert!(out.join("report.json").exists());

    let status = Process::new(bin)
        .args(["solve", &cfg, "--a", "2.5", "--b", "3"])
        .env("INDEFLA_OUT", &out)
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(1));

    let status = Process::new(bin).args(["no-such-command"]).output().unwrap();
    assert_eq!(status.status.code(), Some(2));

    let status = Process::new(bin)
        .args(["dtn", &cfg])
        .env("INDEFLA_OUT", &out)
        .env("INDEFLA_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));
    let v: Value = serde_json::from_slice(&status.stdout).unwrap();
    assert_eq!(v["error"]["field"], "INDEFLA_THREADS");
}
