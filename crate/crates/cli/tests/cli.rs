use std::path::Path;
use std::process::{Command, Output};

fn perfscale(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_perfscale")).args(args).env_remove("PERFSCALE_WORKERS").output().unwrap()
}

fn tmp(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("perfscale-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

const SMALL: &str = r#"
[solver]
seed = 7

[[sweep]]
name = "cell"
quantities = ["corrector-int", "corrector-grad"]
etas = [0.25, 0.125, 0.0625]
cells_per_radius = 2

[[sweep]]
name = "search"
quantities = ["a"]
method = "random-search"
p = [4]
etas = [0.25, 0.125, 0.0625]
cells_per_radius = 1
trials = 4
"#;

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn norm_prints_one_json_row() {
    let out = perfscale(&["norm", "--which", "D", "--p", "2", "--d", "2", "--eta", "0.125", "--epsilon", "0.25"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 1);
    let row: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(row["which"], "D");
    assert_eq!(row["kind"], "exact-p2");
    assert!(row["value"].as_f64().unwrap() > 0.0);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(perfscale(&["norm", "--bogus"]).status.code(), Some(2));
    assert_eq!(perfscale(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(perfscale(&[]).status.code(), Some(2));
    let exact_p4 = perfscale(&["norm", "--which", "D", "--p", "4", "--eta", "0.5"]);
    assert_eq!(exact_p4.status.code(), Some(2));
}

#[test]
fn misspelled_config_key_exits_2_naming_it() {
    let dir = tmp("typo");
    let cfg = write_config(&dir, &SMALL.replacen("etas", "etta", 1));
    let out = perfscale(&["--config", &cfg, "sweep"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("etta"));
}

#[test]
fn sweep_is_byte_stable_and_reverifiable() {
    let dir = tmp("stable");
    let cfg = write_config(&dir, SMALL);
    let (a, b) = (dir.join("a"), dir.join("b"));
    let first = perfscale(&["--config", &cfg, "--out", a.to_str().unwrap(), "sweep"]);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stdout));
    let second = perfscale(&["--config", &cfg, "--out", b.to_str().unwrap(), "--workers", "2", "sweep"]);
    assert_eq!(first.stdout, second.stdout);
    for f in ["report.csv", "report.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let csv = std::fs::read_to_string(a.join("report.csv")).unwrap();
    assert!(csv.starts_with("quantity,d,p,epsilon,eta,value,kind,h,iterations\n"));
    let again = perfscale(&["verify", "--report", a.join("report.json").to_str().unwrap()]);
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(again.stdout, first.stdout);
}

#[test]
fn tampered_report_fails_verification() {
    let dir = tmp("tamper");
    let cfg = write_config(&dir, SMALL);
    let out = dir.join("o");
    assert!(perfscale(&["--config", &cfg, "--out", out.to_str().unwrap(), "sweep"]).status.success());
    let path = out.join("report.json");
    let mut report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(report["verdicts"][0]["check"], "log-law-r2");
    report["verdicts"][0]["measured"] = serde_json::json!(0.5);
    std::fs::write(&path, serde_json::to_string(&report).unwrap()).unwrap();
    let v = perfscale(&["verify", "--report", path.to_str().unwrap()]);
    assert_eq!(v.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&v.stdout).starts_with("FAIL"));
}

#[test]
fn empty_sweep_list_gives_header_and_no_rows() {
    let dir = tmp("empty");
    let cfg = write_config(&dir, "[report]\nstem = \"empty\"\n");
    let out = dir.join("o");
    let run = perfscale(&["--config", &cfg, "--out", out.to_str().unwrap(), "sweep"]);
    assert_eq!(run.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(out.join("empty.csv")).unwrap(), "quantity,d,p,epsilon,eta,value,kind,h,iterations\n");
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("empty.json")).unwrap()).unwrap();
    assert_eq!(json["rows"], serde_json::json!([]));
    assert_eq!(json["config"]["solver"]["seed"], 0x5eed);
}

#[test]
fn export_writes_labels_and_corrector() {
    let dir = tmp("vtk");
    let file = dir.join("cell.vtk");
    let out = perfscale(&["export", "--eta", "0.5", "--cells", "4", "--field", "corrector", "--output", file.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&file).unwrap();
    assert!(text.contains("DATASET STRUCTURED_POINTS"));
    assert!(text.contains("SCALARS label int 1"));
    assert!(text.contains("SCALARS chi double 1"));
}

#[test]
fn cell_and_poincare_print_rows() {
    let cell = perfscale(&["cell", "--cells", "2"]);
    assert!(cell.status.success(), "{}", String::from_utf8_lossy(&cell.stderr));
    let rows: serde_json::Value = serde_json::from_slice(&cell.stdout).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 3);
    let poincare = perfscale(&["poincare", "--cells", "2", "--etas", "0.5,0.25,0.125"]);
    assert!(poincare.status.success(), "{}", String::from_utf8_lossy(&poincare.stderr));
    let rows: serde_json::Value = serde_json::from_slice(&poincare.stdout).unwrap();
    let v: Vec<f64> = rows.as_array().unwrap().iter().map(|r| r["value"].as_f64().unwrap()).collect();
    assert!(v[0] < v[1] && v[1] < v[2], "{v:?}");
}
