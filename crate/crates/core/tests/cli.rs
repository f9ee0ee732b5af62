use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cgof(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cgof")).args(args).output().expect("run cgof")
}

fn write_data(dir: &Path) -> String {
    let mut csv = String::from("time,event\n");
    for (k, t) in [0.12, 0.35, 0.51, 0.77, 0.9, 1.3, 1.6, 2.2, 2.9, 0.4, 1.1, 3.4].iter().enumerate() {
        csv.push_str(&format!("{t},{}\n", u8::from(k % 4 != 3)));
    }
    let path = dir.join("data.csv");
    fs::write(&path, csv).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn test_verb_json_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    let args = ["test", &data, "--spec", "M:D:a=1", "--B", "200", "--seed", "9", "--json"];
    let a = cgof(&args);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, cgof(&args).stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["meta"]["B"], 200);
    assert_eq!(v["critical_values"]["kind"], "upper");
    let p = v["p_value"].as_f64().unwrap();
    assert!(p > 0.0 && p <= 1.0);
}

#[test]
fn exit_code_on_reject() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("time,event\n");
    for k in 0..40 {
        csv.push_str(&format!("{},{}\n", 0.9 + 0.005 * k as f64, u8::from(k % 10 != 0)));
    }
    let path = dir.path().join("peaked.csv");
    fs::write(&path, csv).unwrap();
    let out = cgof(&["test", path.to_str().unwrap(), "--spec", "M:D:a=1", "--B", "100", "--exit-code-on-reject"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn bad_input_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    fs::write(&path, "time,event\n1.0,1\n-2.0,0\n").unwrap();
    let out = cgof(&["test", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let out = cgof(&["test", &write_data(dir.path()), "--spec", "K:PR"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn simulate_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("mini.cfg");
    fs::write(
        &cfg,
        "# tiny study\nn = 20\nN = 6\nB = 100\nrates = 0.1, 0.3\nalternatives = exp:1, weibull:1.4\nstatistics = J:PR:a=1, cvm\nseed = 3\n",
    )
    .unwrap();
    let prefix = dir.path().join("out");
    let out = cgof(&["simulate", cfg.to_str().unwrap(), "--out", prefix.to_str().unwrap(), "--threads", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("out.csv")).unwrap();
    let rows = csv.lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(rows, 1 + 2 * 2 * 2);
    assert!(fs::read_to_string(dir.path().join("out.md")).unwrap().contains("| W(1.4) |"));

    let report = cgof(&["report", dir.path().join("out.csv").to_str().unwrap(), "--format", "latex"]);
    assert!(report.status.success());
    assert!(String::from_utf8_lossy(&report.stdout).contains("\\begin{tabular}"));
}

#[test]
fn simulate_rejects_unknown_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "n = 20\nalternatives = exp:1\nstatistcs = cvm\n").unwrap();
    let out = cgof(&["simulate", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("statistcs") && err.contains("valid keys"), "{err}");
}

#[test]
fn asymptotics_verb_lists_eigenvalues() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    let out = cgof(&["asymptotics", &data, "--char", "D", "--k", "4", "--json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let text = v.to_string();
    assert!(text.contains("eigenvalues"), "{text}");
}
