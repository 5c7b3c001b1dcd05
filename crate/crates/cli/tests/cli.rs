use std::path::Path;
use std::process::{Command, Output};

use pdt_core::optimizer::{noise_for, synthetic_measurements, truth_for};
use pdt_core::Scenario;
use serde_json::Value;

fn pdt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pdt")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = pdt(args);
    assert!(out.status.success(), "pdt {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr));
    out
}

fn code(args: &[&str]) -> i32 {
    pdt(args).status.code().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Data rows of a CSV written by the CLI, skipping the provenance comment and header.
fn rows(path: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# pdt "));
    lines.skip(1).map(|l| l.split(',').map(String::from).collect()).collect()
}

const TINY: [&str; 6] = [
    "--study.ce.n_ce=20",
    "--study.ce.n_iter_max=2",
    "--study.ce.n_mc=10",
    "--study.ce.n_bu=50",
    "--study.restarts=1",
    "--study.n_mc_final=40",
];

#[test]
fn help_documents_every_flag() {
    let flags: &[(&str, &[&str])] = &[
        ("simulate", &["--scenario", "--seed", "--out", "--set", "--h0", "--t-add", "--h-add", "--weeks", "--samples"]),
        (
            "update",
            &["--measurements", "--truth-seed", "--truth-index", "--weeks", "--n-particles", "--commit-h-add", "--no-close", "--cov-th", "--p-th"],
        ),
        ("optimize", &["--policy", "--sigma-eps"]),
        ("evaluate", &["--policy", "--sigma-eps", "--n-mc", "--n-bu"]),
        ("study", &["--no-traces"]),
        ("report", &["--study", "--log"]),
        ("serve", &["--addr", "--static-dir"]),
    ];
    for (cmd, names) in flags {
        let help = String::from_utf8(ok(&[cmd, "--help"]).stdout).unwrap();
        for n in *names {
            assert!(help.contains(n), "{cmd} --help lacks {n}");
        }
    }
}

#[test]
fn argument_and_scenario_errors_exit_with_2() {
    assert_eq!(code(&["simulate", "--bogus"]), 2);
    assert_eq!(code(&[]), 2);
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(code(&["simulate", "-o", out, "--geometry.nope=1"]), 2);
    assert_eq!(code(&["simulate", "-o", out, "--set", "geometry.clay_thickness_m=thick"]), 2);
    assert_eq!(code(&["simulate", "-o", out, "--scenario", "/no/such/file.toml"]), 2);
    assert_eq!(code(&["update", "-o", out]), 2);
    assert_eq!(code(&["evaluate", "-o", out, "--n-mc", "1"]), 2);
}

#[test]
fn implausible_measurement_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("z.csv");
    std::fs::write(&csv, "week,settlement_m\n1,500.0\n").unwrap();
    let args = ["update", "-o", dir.path().to_str().unwrap(), "--measurements", csv.to_str().unwrap()];
    assert_eq!(code(&args), 3);
}

#[test]
fn unbindable_address_exits_with_4() {
    let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = l.local_addr().unwrap().to_string();
    assert_eq!(code(&["serve", "--addr", &addr]), 4);
}

#[test]
fn every_output_carries_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    ok(&["simulate", "-o", out, "--seed", "4", "--samples", "1"]);
    let hash = Scenario::bundled().hash().to_string();
    let csv = std::fs::read_to_string(dir.path().join("trajectory_000.csv")).unwrap();
    assert!(csv.starts_with(&format!("# pdt simulate scenario=stockholm-highway73 scenario_hash={hash} seed=4\n")));
    let j = json(&dir.path().join("simulate.json"));
    assert_eq!(j["provenance"]["scenario_hash"], hash.as_str());
    assert_eq!(j["provenance"]["seed"], 4);
}

fn target_weeks(dir: &Path) -> Vec<Option<u64>> {
    json(&dir.join("simulate.json"))["samples"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["target_week"].as_u64())
        .collect()
}

#[test]
fn increment_reaches_the_target_no_later() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["simulate", "-o", a.to_str().unwrap(), "--samples", "12", "--h0", "0.6"]);
    ok(&["simulate", "-o", b.to_str().unwrap(), "--samples", "12", "--h0", "0.6", "--t-add", "15", "--h-add", "0.8"]);
    let (wa, wb) = (target_weeks(&a), target_weeks(&b));
    let mut earlier = 0;
    for (x, y) in wa.iter().zip(&wb) {
        match (x, y) {
            (Some(x), Some(y)) => {
                assert!(y <= x);
                earlier += (y < x) as usize;
            }
            (None, _) => earlier += y.is_some() as usize,
            (Some(_), None) => panic!("increment lost the target"),
        }
    }
    assert!(earlier > 0);
}

#[test]
fn no_load_means_no_settlement() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    ok(&["simulate", "-o", out, "--h0", "0", "--geometry.embankment_height_m=0", "--samples", "3"]);
    for i in 0..3 {
        for r in rows(&dir.path().join(format!("trajectory_{i:03}.csv"))) {
            assert_eq!(r[1].parse::<f64>().unwrap(), 0.0, "week {}", r[0]);
        }
    }
}

#[test]
fn empty_noise_list_gives_empty_tables() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["study", "-o", dir.path().to_str().unwrap(), "--study.sigma-eps=[]"]);
    for t in ["table2.csv", "table3.csv", "cost_breakdown.csv"] {
        assert!(rows(&dir.path().join(t)).is_empty(), "{t}");
    }
}

#[test]
fn study_tables_have_the_expected_layout() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("st");
    let mut args = vec!["study", "-o", out.to_str().unwrap(), "--study.sigma-eps=[0.05, 0.1, 0.15]"];
    args.extend(TINY);
    ok(&args);
    let t2 = rows(&out.join("table2.csv"));
    assert_eq!(t2.iter().map(|r| r[0].as_str()).collect::<Vec<_>>(), ["0.05", "0.1", "0.15"]);
    let t3 = rows(&out.join("table3.csv"));
    assert_eq!(t3.iter().map(|r| r[0].as_str()).collect::<Vec<_>>(), ["bu", "bu", "bu", "static"]);
    for r in rows(&out.join("cost_breakdown.csv")) {
        let v: Vec<f64> = r[2..].iter().map(|x| x.parse().unwrap()).collect();
        let parts = v[0] + v[1] + v[2] + v[3];
        assert!((parts - v[5]).abs() <= 1e-9 * v[5], "{r:?}");
        assert!((v[4] - v[5]).abs() <= 1e-9 * v[5]);
    }
    assert!(out.join("traces/ce_static_r0.jsonl").exists());
    assert!(out.join("traces/ce_bu_sigma0.1_r0.jsonl").exists());

    // tables regenerate byte for byte from the saved study
    let rep = dir.path().join("rep");
    ok(&["report", "-o", rep.to_str().unwrap(), "--study", out.join("study.json").to_str().unwrap()]);
    for t in ["table2.csv", "table3.csv", "cost_breakdown.csv"] {
        assert_eq!(std::fs::read(out.join(t)).unwrap(), std::fs::read(rep.join(t)).unwrap(), "{t}");
    }
}

#[test]
fn seed_flag_sets_the_master_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (d, seed) in [(&a, "1"), (&b, "2")] {
        let mut args = vec!["optimize", "-o", d.to_str().unwrap(), "--policy", "static", "--seed", seed];
        args.extend(TINY);
        ok(&args);
    }
    let (ja, jb) = (json(&a.join("optimize.json")), json(&b.join("optimize.json")));
    assert_eq!(ja["config"]["ce"]["master_seed"], 1);
    assert_eq!(ja["provenance"]["scenario_hash"], jb["provenance"]["scenario_hash"]);
    assert_ne!(ja["row"]["w_opt"], jb["row"]["w_opt"]);
}

#[test]
fn measurement_file_reproduces_a_truth_session() {
    let dir = tempfile::tempdir().unwrap();
    let truth = dir.path().join("truth");
    ok(&["update", "-o", truth.to_str().unwrap(), "--seed", "3", "--truth-seed", "7"]);
    let log = std::fs::read_to_string(truth.join("session.jsonl")).unwrap();

    let mut csv = String::from("# recorded\nweek,settlement_m\n");
    for line in log.lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        if v["event"] == "measurement" {
            csv.push_str(&format!("{},{}\n", v["t"], v["z_s_m"]));
        }
    }
    let path = dir.path().join("z.csv");
    std::fs::write(&path, csv).unwrap();
    let rec = dir.path().join("rec");
    ok(&["update", "-o", rec.to_str().unwrap(), "--seed", "3", "--measurements", path.to_str().unwrap()]);
    assert_eq!(log, std::fs::read_to_string(rec.join("session.jsonl")).unwrap());
}

#[test]
fn truth_mode_measures_the_committed_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    ok(&["update", "-o", out, "--seed", "5", "--truth-seed", "7"]);
    let summary = json(&dir.path().join("update.json"));
    let week = summary["decision"]["week"].as_u64().unwrap() as u32;
    assert!(summary["decision"]["committed_h_add_m"].as_f64().unwrap() > 0.0);

    // before the decision the readings follow the initial schedule
    let sc = Scenario::bundled();
    let p = sc.problem::<f64>().unwrap();
    let t = truth_for(&p.priors, 7, 0).unwrap();
    let expected = synthetic_measurements(&p.model, &t, 1.09, 0.05, &noise_for(7, 0, 72)).unwrap();
    let log = std::fs::read_to_string(dir.path().join("session.jsonl")).unwrap();
    let zs: Vec<(u32, f64)> = log
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap())
        .filter(|v| v["event"] == "measurement")
        .map(|v| (v["t"].as_u64().unwrap() as u32, v["z_s_m"].as_f64().unwrap()))
        .collect();
    assert_eq!(zs.len(), 72);
    for (z, e) in zs.iter().zip(&expected) {
        if z.0 <= week {
            assert_eq!(z.1, e.z_s);
        } else {
            assert!(z.1 > e.z_s, "week {}: the increment must add settlement", z.0);
        }
    }
    assert_eq!(summary["final_event"]["event"], "final");
}

#[test]
fn report_rejects_a_log_from_another_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("u");
    ok(&["update", "-o", out.to_str().unwrap(), "--truth-seed", "1", "--weeks", "10"]);
    let log = out.join("session.jsonl");
    let rep = dir.path().join("r");
    ok(&["report", "-o", rep.to_str().unwrap(), "--log", log.to_str().unwrap()]);
    assert_eq!(json(&rep.join("replay.json"))["verified"], true);
    let args = ["report", "-o", rep.to_str().unwrap(), "--log", log.to_str().unwrap(), "--measurement.sigma_eps_m=0.1"];
    assert_eq!(code(&args), 2);
}

#[test]
fn normalized_scenario_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["report", "-o", dir.path().to_str().unwrap(), "--requirements.t_max_weeks=60"]);
    let path = dir.path().join("scenario.toml");
    let back = pdt_core::load_scenario(&path, &[]).unwrap();
    assert_eq!(json(&dir.path().join("scenario.json"))["scenario_hash"], back.hash());
    assert_eq!(back.requirements::<f64>().t_max, 60);
}
