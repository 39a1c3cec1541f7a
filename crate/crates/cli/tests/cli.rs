use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn speclab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_speclab")).args(args).env_remove("SPECLAB_WORKERS").output().unwrap()
}

fn small_sweep(dir: &Path, name: &str) -> std::path::PathBuf {
    let out = dir.join(name);
    let run = speclab(&[
        "sweep", "--family", "ellipse", "--params", "0,0.1,0.2,0.3", "--k", "2", "--res", "16,32", "--seed", "3", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    out
}

#[test]
fn sweep_csv_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let a = fs::read(small_sweep(dir.path(), "a.csv")).unwrap();
    let b = fs::read(small_sweep(dir.path(), "b.csv")).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("family,s,h_fine,lam1,lam2,lam1B,lam2B,d,d_err,eps,ratio21,linf_margin,status\n"));
    assert_eq!(text.lines().count(), 5);
    assert!(dir.path().join("a.jsonl").exists());
}

#[test]
fn verify_exit_codes_follow_the_records() {
    let dir = tempfile::tempdir().unwrap();
    let csv = small_sweep(dir.path(), "r.csv");
    let jsonl = csv.with_extension("jsonl");
    let input = jsonl.to_str().unwrap();
    assert_eq!(speclab(&["verify", "--input", input]).status.code(), Some(0));

    let lines: Vec<serde_json::Value> = fs::read_to_string(&jsonl).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let write = |records: &[serde_json::Value], name: &str| {
        let path = dir.path().join(name);
        let body: String = records.iter().map(|r| format!("{r}\n")).collect();
        fs::write(&path, body).unwrap();
        path
    };

    let mut broken = lines.clone();
    let ball = broken[1]["measured"]["ball"][0].as_f64().unwrap();
    broken[1]["measured"]["eigenvalues"][0] = serde_json::json!(0.5 * ball);
    let path = write(&broken, "violated.jsonl");
    let run = speclab(&["verify", "--input", path.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&run.stdout).contains("faber-krahn                  violated"));

    let mut failed = lines.clone();
    failed[2]["status"] = serde_json::json!("failed");
    failed[2]["measured"] = serde_json::Value::Null;
    failed[2]["error"] = serde_json::json!("solver diverged");
    let path = write(&failed, "failed.jsonl");
    assert_eq!(speclab(&["verify", "--input", path.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn config_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "k = 2\ncolour = red\n").unwrap();
    let run = speclab(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(2));
    let err = String::from_utf8_lossy(&run.stderr);
    assert!(err.contains("line 2") && err.contains("colour"), "{err}");
}

#[test]
fn config_sweep_matches_flag_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("ok.cfg");
    fs::write(&cfg, "k = 2\nres = 16, 32\nseed = 3\n\n[family.ellipse]\ns = 0, 0.1, 0.2, 0.3\n").unwrap();
    let out = dir.path().join("cfg.csv");
    let run = speclab(&["sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let flags = small_sweep(dir.path(), "flags.csv");
    assert_eq!(fs::read(out).unwrap(), fs::read(flags).unwrap());
}

#[test]
fn workers_from_the_environment_must_parse() {
    let run = Command::new(env!("CARGO_BIN_EXE_speclab"))
        .args(["sweep", "--family", "ellipse", "--param", "0", "--k", "1", "--res", "8,16"])
        .env("SPECLAB_WORKERS", "many")
        .output()
        .unwrap();
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).contains("SPECLAB_WORKERS"));

    let run = Command::new(env!("CARGO_BIN_EXE_speclab"))
        .args(["sweep", "--family", "ellipse", "--param", "0", "--k", "1", "--res", "8,16", "--format", "jsonl"])
        .env("SPECLAB_WORKERS", "2")
        .output()
        .unwrap();
    assert!(run.status.success());
    assert_eq!(String::from_utf8_lossy(&run.stdout).lines().count(), 1);
}

#[test]
fn single_domain_commands_emit_json() {
    for cmd in ["spectrum", "asymmetry", "surgery"] {
        let run = speclab(&[cmd, "--family", "fourier", "--param", "0.2", "--k", "2", "--res", "24,48"]);
        assert!(run.status.success(), "{cmd}: {}", String::from_utf8_lossy(&run.stderr));
        let v: serde_json::Value = serde_json::from_slice(&run.stdout).unwrap();
        assert_eq!(v["family"], "fourier-perturbed-ball");
    }
    let run = speclab(&["spectrum", "--family", "ellipse", "--param", "7"]);
    assert_eq!(run.status.code(), Some(2));
}
