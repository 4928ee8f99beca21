use std::path::PathBuf;
use std::process::{Command, Output};

use dosnet_sim::runner::CSV_HEADER;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dosnet-sim"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("dosnet-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write(name: &str, text: &str) -> PathBuf {
    let p = scratch("files").join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const MINIMAL: &str = "
[run]
horizon_slots = 20000
warmup_slots = 2000
replications = 1

[station.1]
rho = 1
";

#[test]
fn minimal_run_has_fixed_header_and_rows() {
    let f = write("minimal.ini", MINIMAL);
    let o = bin().arg("run").arg(&f).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], CSV_HEADER.join(","));
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("run/r0,"));
    assert!(lines[2].starts_with("run/mean,"));
}

#[test]
fn same_seed_same_bytes() {
    let f = write(
        "reps.ini",
        "[run]\nhorizon_slots = 30000\nwarmup_slots = 3000\nreplications = 4\nseed = 5\n[station.1]\nrho = 1\ncount = 3\n[station.4]\nrho = 3\npolicy = tdos\n",
    );
    let a = bin().arg("run").arg(&f).output().unwrap();
    let b = bin().arg("run").arg(&f).output().unwrap();
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = bin().args(["run", "--seed", "6"]).arg(&f).output().unwrap();
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn exit_codes() {
    let bad = write("bad.ini", "[station.1]\nrho = -2\n");
    let o = bin().arg("run").arg(&bad).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty(), "no partial output");
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));

    let syntax = write("syntax.ini", "[station.1]\nrho 2\n");
    assert_eq!(bin().arg("run").arg(&syntax).output().unwrap().status.code(), Some(2));
    assert_eq!(bin().args(["preset", "fig99"]).output().unwrap().status.code(), Some(2));
    assert_eq!(bin().args(["run", "/nonexistent/x.ini"]).output().unwrap().status.code(), Some(1));
}

fn oracle_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .skip_while(|l| !l.starts_with("station_id,"))
        .skip(1)
        .take_while(|l| l.contains(','))
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect()
}

#[test]
fn oracle_report_values() {
    let f = write("five.ini", "[station.1]\nrho = 1\ncount = 5\n");
    let o = bin().arg("oracle").arg(&f).output().unwrap();
    assert!(o.status.success());
    let text = stdout(&o);
    let rows = oracle_rows(&text);
    assert_eq!(rows.len(), 5);
    assert!((rows[0][2] - 0.1813).abs() < 1e-4);
    assert!((rows[0][4] - 0.88).abs() < 0.005);
    assert!(text.contains("k_p            7.86"));
    assert!(text.contains("k_r            27.18"));

    // constant channel: R* = c T / (T + e tau)
    let f = write("const.ini", "[radio]\nfading = constant\n[station.1]\nrho = 3\n");
    let text = stdout(&bin().arg("oracle").arg(&f).output().unwrap());
    let c = (1.0f64 + 3.0).log2();
    let want = c * 10.0 / (10.0 + std::f64::consts::E);
    assert!((oracle_rows(&text)[0][4] - want).abs() < 1e-9);
}

#[test]
fn sweep_labels_points() {
    let f = write("sweep.ini", MINIMAL);
    let o = bin()
        .args(["sweep"])
        .arg(&f)
        .args(["--axis", "n_stations", "--values", "1,3"])
        .output()
        .unwrap();
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("sweep/n_stations=1/mean,"));
    assert!(text.lines().filter(|l| l.starts_with("sweep/n_stations=3/mean,")).count() == 4);
    let o = bin().arg("sweep").arg(&f).args(["--axis", "rho", "--values", "1"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn trace_preset_writes_both_files() {
    let out = scratch("preset");
    let o = bin()
        .args(["preset", "fig9b_snrstep", "--horizon", "20000", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = std::fs::read_to_string(out.join("fig9b_snrstep.csv")).unwrap();
    assert!(rows.starts_with(&CSV_HEADER.join(",")));
    let traces = std::fs::read_to_string(out.join("fig9b_snrstep_trace.csv")).unwrap();
    assert!(traces.starts_with("run_id,slot,station_id,p_i"));
    assert!(traces.lines().count() > 10);
}
