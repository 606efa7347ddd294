use std::path::PathBuf;
use std::process::{Command, Output};

fn ttj(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ttj")).args(args).output().expect("spawn ttj")
}

fn case(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "cases", name].iter().collect();
    p.to_str().unwrap().to_string()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn run_exit_codes_follow_the_verdict() {
    let expect = [
        ("fig1a.json", "none", 0),
        ("fig1a.json", "m1", 0),
        ("fig1c.json", "none", 0),
        ("fig1c.json", "m1", 1),
        ("gyo_violation.json", "none", 0),
        ("gyo_violation.json", "m2", 2),
        ("bushy_p2.json", "none", 0),
        ("bushy_p2.json", "m3", 1),
    ];
    for (file, defect, want) in expect {
        let o = ttj(&["run", "--case", &case(file), "--defect", defect]);
        assert_eq!(code(&o), want, "{file} --defect {defect}: {}", stdout(&o));
    }
}

#[test]
fn run_writes_a_json_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let o = ttj(&["run", "--case", &case("fig1c.json"), "--defect", "m1", "--trace", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["verdict"]["kind"], "mismatch");
    assert!(!v["trace"].as_array().unwrap().is_empty());
}

#[test]
fn gen_is_deterministic() {
    let a = ttj(&["gen", "--seed", "7", "--max-size", "5"]);
    let b = ttj(&["gen", "--seed", "7", "--max-size", "5"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let c = ttj(&["gen", "--seed", "8", "--max-size", "5"]);
    assert_ne!(a.stdout, c.stdout);
    let d = ttj(&["gen", "--seed", "7", "--path", "b"]);
    assert!(stdout(&d).contains("\"plan\""));
}

#[test]
fn usage_errors_exit_3() {
    assert_eq!(code(&ttj(&["run"])), 3);
    assert_eq!(code(&ttj(&["frobnicate"])), 3);
    assert_eq!(code(&ttj(&["run", "--case", "/nonexistent/case.json"])), 3);
    assert_eq!(code(&ttj(&["run", "--case", &case("fig1a.json"), "--defect", "m9"])), 3);
    assert_eq!(code(&ttj(&["gen", "--max-size", "0"])), 3);
    assert_eq!(code(&ttj(&["--help"])), 0);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"seed\": 1, \"bogus\": true}").unwrap();
    let o = ttj(&["run", "--case", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}

#[test]
fn emit_sql_and_trace() {
    let sql = stdout(&ttj(&["emit-sql", "--case", &case("fig1a.json")]));
    assert!(sql.contains("CREATE TABLE"));
    assert!(sql.contains("INSERT INTO"));
    assert!(sql.trim_end().ends_with(';'));

    let o = ttj(&["trace", "--case", &case("fig1c.json"), "--defect", "m1"]);
    assert_eq!(code(&o), 1);
    let t = stdout(&o);
    assert!(t.contains("PROBE_MISS"));
    assert!(t.contains("BACKJUMP"));
}

#[test]
fn shrink_keeps_the_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("mre.json");
    let o = ttj(&["shrink", "--case", &case("fig1c.json"), "--defect", "m1", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(code(&ttj(&["run", "--case", out.to_str().unwrap()])), 1);

    let o = ttj(&["shrink", "--case", &case("fig1a.json")]);
    assert_eq!(code(&o), 3);
}

#[test]
fn fuzz_writes_summary_and_shrunk_failures() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let o = ttj(&["fuzz", "--seed", "7", "--cases", "200", "--path", "a", "--defect", "m1", "--out", d, "--shrink"]);
    assert_eq!(code(&o), 1, "{}", stdout(&o));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 7);
    let mres: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".mre.json"))
        .collect();
    assert!(!mres.is_empty());

    let clean = ttj(&["fuzz", "--seed", "7", "--cases", "100"]);
    assert_eq!(code(&clean), 0, "{}", stdout(&clean));
}
