use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_implicit-dynamics"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let outs: Vec<Vec<u8>> = (0..2)
        .map(|i| {
            let out = dir.path().join(format!("run{i}.csv"));
            let o = run(&[
                "integrate",
                "--system",
                "em-3d",
                "--seed",
                "5",
                "--steps",
                "100",
                "--out",
                out.to_str().unwrap(),
            ]);
            assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
            let csv = std::fs::read(&out).unwrap();
            let drift = std::fs::read(out.with_extension("csv.drift.json")).unwrap();
            [o.stdout, csv, drift].concat()
        })
        .collect();
    assert_eq!(outs[0], outs[1]);
}

#[test]
fn trajectory_csv_has_header() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    let o = run(&["integrate", "--system", "relativistic", "--seed", "1", "--steps", "10", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("t,q0,"));
    assert_eq!(lines.count(), 11);
}

#[test]
fn verify_passes_and_catches_sign_flip() {
    assert_eq!(code(&run(&["verify", "--seed", "3"])), 0);
    assert_eq!(code(&run(&["verify", "--seed", "3", "--inject-sign-flip"])), 4);
}

#[test]
fn missing_seed_is_a_config_error() {
    let o = run(&["analyze", "--system", "em-3d"]);
    assert_eq!(code(&o), 2);
    assert!(!o.stderr.is_empty());
}

#[test]
fn unknown_system_is_a_config_error() {
    assert_eq!(code(&run(&["analyze", "--system", "nope", "--seed", "1"])), 2);
}

#[test]
fn config_file_is_read() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "command = \"analyze\"\nsystem = \"two-particle\"\nseed = 9\nsamples = 8\n").unwrap();
    let o = run(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("two-particle"));
    assert!(Path::new(&cfg).exists());
}

#[test]
fn verdicts_do_not_depend_on_seed() {
    let verdict = |seed: &str| {
        let o = run(&["analyze", "--system", "two-particle", "--seed", seed, "--samples", "16"]);
        let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        let a = &v["algorithm"];
        assert!(a["verdict"].is_string());
        (a["verdict"].clone(), a["secondary_count"].clone(), a["final_constraints"].clone())
    };
    assert_eq!(verdict("1"), verdict("2"));
}
