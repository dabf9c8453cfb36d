use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_isc-detect");

struct Workspace {
    dir: TempDir,
    config: PathBuf,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let config = dir.path().join("run.toml");
        fs::write(
            &config,
            "[simulation]\nseed = 0\n\n[paths]\nhealthy_trace = \"out/healthy.csv\"\nfault_trace = \"out/fault.csv\"\n\
             thresholds = \"out/thr.json\"\nevents = \"out/events.csv\"\ndiagnostics = \"out/diag.csv\"\nreport = \"out/report.csv\"\n",
        )
        .unwrap();
        Self { dir, config }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn run(&self, args: &[&str]) -> Output {
        let out = Command::new(BIN)
            .arg("--config")
            .arg(&self.config)
            .args(args)
            .output()
            .unwrap();
        out
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }
}

fn read(p: &Path) -> String {
    fs::read_to_string(p).unwrap()
}

fn data_rows(p: &Path) -> usize {
    read(p).lines().count() - 1
}

#[test]
fn full_pipeline() {
    let ws = Workspace::new();
    ws.ok(&["simulate"]);
    let healthy = read(&ws.path("out/healthy.csv"));
    assert!(healthy.starts_with("t_s,i_a,v_v,soc_true,i_sc_true,fault_active\n"));
    assert!(healthy.lines().skip(1).all(|l| l.ends_with(",false")));

    let out = ws.ok(&["simulate", "--table1"]);
    assert!(out.contains("11 scheduled events"), "{out}");

    let out = ws.ok(&["calibrate"]);
    assert!(
        out.contains("exceedance outside [theta-, theta+]: 1.000 %"),
        "{out}"
    );

    ws.ok(&["detect"]);
    assert_eq!(data_rows(&ws.path("out/events.csv")), 10);
    assert_eq!(data_rows(&ws.path("out/diag.csv")), 16000);
    let events = read(&ws.path("out/events.csv"));
    assert!(!events.lines().any(|l| l.starts_with("1391")));

    let out = ws.ok(&["evaluate", "--table1"]);
    assert!(
        out.starts_with("10/10 detected, 0 missed, 0 false"),
        "{out}"
    );
    assert_eq!(data_rows(&ws.path("out/report.csv")), 10);

    // healthy trace through the same thresholds
    ws.ok(&[
        "detect",
        "--trace",
        ws.path("out/healthy.csv").to_str().unwrap(),
    ]);
    assert_eq!(data_rows(&ws.path("out/events.csv")), 0);
}

#[test]
fn same_seed_same_bytes() {
    let ws = Workspace::new();
    let mut files = Vec::new();
    for _ in 0..2 {
        ws.ok(&["simulate", "--table1", "--seed", "7"]);
        ws.ok(&["simulate", "--seed", "7"]);
        ws.ok(&["calibrate"]);
        ws.ok(&["detect"]);
        files.push((
            fs::read(ws.path("out/fault.csv")).unwrap(),
            fs::read(ws.path("out/events.csv")).unwrap(),
        ));
    }
    assert_eq!(files[0], files[1]);
    ws.ok(&["simulate", "--table1", "--seed", "8"]);
    assert_ne!(fs::read(ws.path("out/fault.csv")).unwrap(), files[0].0);
}

#[test]
fn constant_trace_cannot_calibrate() {
    let ws = Workspace::new();
    let mut csv = String::from("t_s,i_a,v_v\n");
    for k in 0..1000 {
        csv.push_str(&format!("{k},0,3.7\n"));
    }
    fs::write(ws.path("flat.csv"), csv).unwrap();
    let out = ws.run(&[
        "calibrate",
        "--trace",
        ws.path("flat.csv").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("degenerate"));
}

#[test]
fn missing_files_are_io_errors() {
    let ws = Workspace::new();
    ws.ok(&["simulate"]);
    let out = ws.run(&[
        "detect",
        "--trace",
        ws.path("out/healthy.csv").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = Command::new(BIN)
        .args(["--config", "/nonexistent/cfg.toml", "simulate"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_config_is_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[detector]\ngamma = 0.5\n").unwrap();
    let out = Command::new(BIN)
        .arg("--config")
        .arg(&cfg)
        .arg("simulate")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn evaluate_empty_and_tolerance() {
    let ws = Workspace::new();
    let events = ws.path("events.csv");
    fs::write(
        &events,
        "t_onset_s,t_clear_s,delta_v,i_sc_a,r_sc_ohm,label\n",
    )
    .unwrap();
    let out = ws.ok(&["evaluate", "--table1", "--events", events.to_str().unwrap()]);
    assert!(
        out.starts_with("0/10 detected, 10 missed, 0 false"),
        "{out}"
    );

    fs::write(
        &events,
        "t_onset_s,t_clear_s,delta_v,i_sc_a,r_sc_ohm,label\n2932,2955,-0.09,51,0.07,E1\n",
    )
    .unwrap();
    let out = ws.ok(&[
        "evaluate",
        "--table1",
        "--events",
        events.to_str().unwrap(),
        "--tol",
        "3",
    ]);
    assert!(
        out.starts_with("0/10 detected, 10 missed, 1 false"),
        "{out}"
    );
    let out = ws.ok(&[
        "evaluate",
        "--table1",
        "--events",
        events.to_str().unwrap(),
        "--tol",
        "6",
    ]);
    assert!(out.starts_with("1/10 detected, 9 missed, 0 false"), "{out}");
    let out = ws.run(&[
        "evaluate",
        "--events",
        events.to_str().unwrap(),
        "--tol",
        "0.5",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn user_schedule_and_profile() {
    let ws = Workspace::new();
    let mut profile = String::from("t_s,i_a\n");
    for k in 0..600 {
        let i = if (k / 30) % 2 == 0 { 20.0 } else { -10.0 };
        profile.push_str(&format!("{k},{i}\n"));
    }
    fs::write(ws.path("profile.csv"), profile).unwrap();
    fs::write(
        ws.path("sched.json"),
        r#"{"events":[{"kind":{"type":"ShortResistor","ohms":0.1},"t_on":200,"t_off":230,"label":"s1"},
                     {"kind":{"type":"ExtraDischargePulse","amps":50},"t_on":400,"t_off":410,"label":"p1"}]}"#,
    )
    .unwrap();
    let prof = ws.path("profile.csv");
    let sched = ws.path("sched.json");
    let (prof, sched) = (prof.to_str().unwrap(), sched.to_str().unwrap());
    ws.ok(&["simulate", "--profile", prof]);
    let out = ws.ok(&["simulate", "--profile", prof, "--schedule", sched]);
    assert!(
        out.contains("2 scheduled events, 30 faulted samples"),
        "{out}"
    );
    ws.ok(&["calibrate"]);
    ws.ok(&["detect"]);
    let out = ws.ok(&["evaluate", "--schedule", sched]);
    assert!(out.starts_with("1/1 detected, 0 missed, 0 false"), "{out}");

    let out = ws.run(&["simulate", "--table1", "--schedule", sched]);
    assert_eq!(out.status.code(), Some(1));
    fs::write(
        ws.path("overlap.json"),
        r#"{"events":[{"kind":{"type":"ShortResistor","ohms":0.1},"t_on":200,"t_off":230,"label":"a"},
                     {"kind":{"type":"ShortResistor","ohms":0.1},"t_on":220,"t_off":240,"label":"b"}]}"#,
    )
    .unwrap();
    let out = ws.run(&[
        "simulate",
        "--schedule",
        ws.path("overlap.json").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sweep_runs() {
    let ws = Workspace::new();
    let out = ws.ok(&["sweep", "--seeds", "2"]);
    assert!(
        out.contains("20/20 detected, 0 false alarms, 2/2 perfect runs"),
        "{out}"
    );
    let seq = ws.ok(&["sweep", "--seeds", "2", "--sequential"]);
    assert_eq!(out, seq);
}
