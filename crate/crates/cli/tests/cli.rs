use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use tempfile::tempdir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ruralmesh"))
}

fn scenario() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/rural_district.json")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn validate_shipped_scenario() {
    let out = bin().arg("validate").arg(scenario()).output().unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn validate_rejects_count_violation() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(
        &path,
        r#"{"kiosks": [{"pos": {"x_km": 0, "y_km": 0}}, {"pos": {"x_km": 1, "y_km": 0}}],
            "maps": [{"route": {"waypoints": [{"node": "kiosk:1"}, {"node": "dpc:1"}], "speed_kmh": 30}}],
            "dpcs": [{"pos": {"x_km": 5, "y_km": 0}}]}"#,
    )
    .unwrap();
    let out = bin().arg("validate").arg(&path).output().unwrap();
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stdout).contains("requires i >= n"));
    let out = bin().arg("run").arg(&path).output().unwrap();
    assert_eq!(code(&out), 3);
}

#[test]
fn unparseable_scenario_exits_2() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("broken.json");
    fs::write(&path, "{ not json").unwrap();
    for cmd in ["validate", "run"] {
        let out = bin().arg(cmd).arg(&path).output().unwrap();
        assert_eq!(code(&out), 2, "{cmd}");
    }
    let out = bin().args(["report"]).arg(&path).output().unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn zero_hours_gives_empty_report() {
    let dir = tempdir().unwrap();
    let out_path = dir.path().join("r.json");
    let out = bin()
        .arg("run")
        .arg(scenario())
        .args(["--until-hours", "0", "--out"])
        .arg(&out_path)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(report["events_executed"], 0);
    assert_eq!(report["messages"]["sensor_batch"]["delivery_ratio"], "n/a");
}

#[test]
fn same_seed_byte_identical() {
    let dir = tempdir().unwrap();
    let paths: Vec<PathBuf> = ["a.json", "b.json", "c.json"].iter().map(|n| dir.path().join(n)).collect();
    let seeds = ["7", "7", "8"];
    for (p, seed) in paths.iter().zip(seeds) {
        let out = bin()
            .arg("run")
            .arg(scenario())
            .args(["--until-hours", "12", "--seed", seed, "--event-log", "--out"])
            .arg(p)
            .output()
            .unwrap();
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    let read = |p: &PathBuf| fs::read(p).unwrap();
    assert_eq!(read(&paths[0]), read(&paths[1]));
    assert_ne!(read(&paths[0]), read(&paths[2]));
}

#[test]
fn report_formats() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("r.json");
    let out = bin()
        .arg("run")
        .arg(scenario())
        .args(["--until-hours", "6", "--out"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);

    let text = bin().arg("report").arg(&path).output().unwrap();
    assert_eq!(code(&text), 0);
    assert!(String::from_utf8_lossy(&text.stdout).contains("sensor_batch"));

    let csv = bin().arg("report").arg(&path).args(["--format", "csv"]).output().unwrap();
    assert_eq!(code(&csv), 0);
    let csv = String::from_utf8(csv.stdout).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("kind,attempted,delivered,in_flight,blocked"));
    assert_eq!(lines.count(), 7);
}
