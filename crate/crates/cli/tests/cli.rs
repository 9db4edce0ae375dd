use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use slotless::{Nanos, SimOutcome, VariantSolution};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slotless"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect()
}

#[test]
fn optimize_one_percent() {
    let o = run(&["optimize", "--eta", "0.01", "--json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let sol: VariantSolution = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(sol.variant.name(), "PI0M");
    assert_eq!(sol.m, 199);
    assert_eq!(sol.d_m, Nanos::from_millis(14_720));
}

#[test]
fn optimize_human_output_reports_split() {
    let o = run(&["optimize", "--eta", "0.05", "--variant", "PIK1P"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("PIK1P"));
    assert!(text.contains("one-way"));
    assert!(text.contains("clamped"));
}

#[test]
fn json_round_trips() {
    let o = run(&["optimize", "--eta", "0.04", "--variant", "pik2p", "--json"]);
    let text = stdout(&o);
    let sol: VariantSolution = serde_json::from_str(&text).unwrap();
    let again = serde_json::to_string_pretty(&sol).unwrap();
    assert_eq!(text.trim_end(), again);
}

#[test]
fn infeasible_eta_exits_two_and_names_the_limit() {
    let o = run(&["optimize", "--eta", "0.5"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("23.7%"), "{err}");
    assert!(err.contains("sqrt(d_a*d_s_min)"), "{err}");
}

#[test]
fn skew_guard_reports_eps() {
    let o = run(&["optimize", "--eta", "0.01", "--skew-guard", "20", "--json"]);
    assert!(o.status.success());
    let sol: VariantSolution = serde_json::from_str(&stdout(&o)).unwrap();
    let unguarded_t_s = 201.0 * 73_600_000.0 - 30_518.0;
    assert_eq!(sol.eps, Nanos::from_f64_ceil(40e-6 * unguarded_t_s));
    assert_eq!(sol.eps_ta, sol.eps);
    assert!((sol.eps - Nanos::from_micros(600)).abs() <= Nanos(30_518));
    assert!(sol.d_m < Nanos::from_millis(14_720));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["optimize"]).status.code(), Some(1));
    assert_eq!(run(&["optimize", "--eta", "0.01", "--variant", "x"]).status.code(), Some(1));
    assert_eq!(run(&["cdf", "--eta", "0.01", "--step", "5"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn compare_single_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gain.csv");
    let o = run(&["compare", "--eta-min", "0.05", "--eta-max", "0.05", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let header = csv::Reader::from_path(&out).unwrap().headers().unwrap().clone();
    assert_eq!(
        header.iter().collect::<Vec<_>>(),
        ["eta", "protocol", "d_m_slotted_ns", "d_m_pikm_ns", "gain"]
    );
    let rows = csv_rows(&out);
    let data: Vec<_> = rows.iter().filter(|r| r[0] == "0.05").collect();
    assert_eq!(data.len(), 6);
    assert_eq!(rows.iter().filter(|r| r[0] == "mean").count(), 6);
    assert_eq!(rows.iter().filter(|r| r[0] == "max").count(), 6);
    for r in data {
        let gain: f64 = r[4].parse().unwrap();
        let ratio = r[2].parse::<f64>().unwrap() / r[3].parse::<f64>().unwrap();
        assert!((gain - ratio).abs() < 1e-9);
        assert!(gain > 1.0);
    }
}

#[test]
fn compare_slot_length_scales_slotted_latency() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for (dsl, p) in [("10ms", &a), ("20ms", &b)] {
        let o = run(&[
            "compare", "--eta-min", "0.02", "--eta-max", "0.04", "--step", "0.01", "--dsl", dsl, "--out",
            p.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let (ra, rb) = (csv_rows(&a), csv_rows(&b));
    let data = |rows: &Vec<Vec<String>>| -> Vec<(String, f64)> {
        rows.iter()
            .filter(|r| !r[2].is_empty())
            .map(|r| (r[1].clone(), r[2].parse().unwrap()))
            .collect()
    };
    let (da, db) = (data(&ra), data(&rb));
    assert_eq!(da.len(), 18);
    for ((name, x), (_, y)) in da.iter().zip(&db) {
        let ratio = y / x;
        if name == "G-Nihao" {
            // its beacon share of a slot shrinks as the slot grows
            assert!(ratio > 1.8 && ratio < 2.0, "{ratio}");
        } else {
            assert!((ratio - 2.0).abs() < 1e-6, "{name} {ratio}");
        }
    }
}

#[test]
fn compare_infeasible_grid() {
    let o = run(&["compare", "--eta-min", "0.2", "--eta-max", "0.3", "--step", "0.05"]);
    assert_eq!(o.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g.csv");
    let o = run(&[
        "compare", "--eta-min", "0.2", "--eta-max", "0.3", "--step", "0.05", "--lenient", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("warning"));
    let rows = csv_rows(&out);
    assert!(rows.iter().all(|r| r[0] != "0.3" && r[0] != "0.25"));
    assert_eq!(rows.iter().filter(|r| r[0] == "0.2").count(), 6);
}

#[test]
fn cdf_mean_is_half_the_bound() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cdf.csv");
    let o = run(&["cdf", "--eta", "0.05", "--variant", "best", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&out);
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r[0].parse().unwrap(), r[1].parse().unwrap())).collect();
    assert!(pts.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 <= w[1].1));
    assert_eq!(pts.last().unwrap().1, 1.0);
    // area above a CDF equals its mean
    let mut mean = pts[0].0;
    for w in pts.windows(2) {
        mean += (1.0 - w[0].1) * (w[1].0 - w[0].0);
    }
    let json = run(&["optimize", "--eta", "0.05", "--json"]);
    let sol: VariantSolution = serde_json::from_str(&stdout(&json)).unwrap();
    let rel = mean / sol.d_m.as_f64();
    assert!((0.47..=0.53).contains(&rel), "{rel}");
}

#[test]
fn simulate_is_deterministic_under_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    let c = dir.path().join("c.jsonl");
    for (seed, p) in [("7", &a), ("7", &b), ("8", &c)] {
        let o = run(&[
            "simulate", "--eta", "0.1", "--trials", "400", "--seed", seed, "--collisions", "--horizon", "5s",
            "--out", p.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let (ta, tb, tc) = (fs::read(&a).unwrap(), fs::read(&b).unwrap(), fs::read(&c).unwrap());
    assert_eq!(ta, tb);
    assert_ne!(ta, tc);
    let outcomes: Vec<SimOutcome> = String::from_utf8(ta)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(outcomes.len(), 400);
    assert!(outcomes.iter().all(|o| o.skew_a.abs() <= 20.0 && o.skew_b.abs() <= 20.0));
}

#[test]
fn granularity_lists() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gran.csv");
    let o = run(&["granularity", "--min", "0.001", "--max", "0.2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&out);
    let pi: Vec<_> = rows.iter().filter(|r| r[0] == "PI-kMOpt").collect();
    let nihao: Vec<_> = rows.iter().filter(|r| r[0] == "G-Nihao").collect();
    assert_eq!(pi.len(), 399);
    assert!(!nihao.is_empty() && nihao.len() < pi.len());
    for r in pi {
        let (t, a): (f64, f64) = (r[1].parse().unwrap(), r[2].parse().unwrap());
        assert!((a - t).abs() / t <= 1e-3);
    }
}

#[test]
fn radio_file_overrides_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let radio = dir.path().join("radio.json");
    fs::write(&radio, r#"{"d_a_ns": 184000}"#).unwrap();
    let o = run(&["--radio-file", radio.to_str().unwrap(), "optimize", "--eta", "0.01", "--json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let sol: VariantSolution = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(sol.config.d_a, Nanos(184_000));

    let missing = dir.path().join("nope.json");
    let o = run(&["--radio-file", missing.to_str().unwrap(), "optimize", "--eta", "0.01"]);
    assert_eq!(o.status.code(), Some(3));

    fs::write(&radio, "{not json").unwrap();
    let o = run(&["--radio-file", radio.to_str().unwrap(), "optimize", "--eta", "0.01"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unwritable_output_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("missing").join("x.csv");
    let o = run(&["granularity", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}
