use std::process::{Command, Output};

fn bsts(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bsts"))
        .args(args)
        .env_remove("BSTS_SEED")
        .output()
        .expect("run bsts")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn derive_worked_example() {
    let out = bsts(&["bsts-derive", "--key", "01100110011", "--json"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["base1"], "R");
    assert_eq!(v["base2"], "C");
    assert_eq!(v["interval_ms"], 10);
    assert_eq!(v["schedule"], "CRRCC");

    let out = bsts(&["--json", "bsts-derive", "--key", "01100110011", "--timing-rule", "example9"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["interval_ms"], 9);
}

#[test]
fn short_key_is_rejected() {
    let out = bsts(&["bsts-derive", "--key", "011001"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn session_exit_codes() {
    let ok = bsts(&["session", "--photons", "2048", "--seed", "3", "--json"]);
    assert_eq!(ok.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&stdout(&ok)).unwrap();
    assert_eq!(report["message_delivered"], true);
    assert_eq!(report["eve_decision"], "proceed");

    let spied = bsts(&["session", "--eve-mode", "intercept_resend", "--seed", "3", "--json"]);
    assert_eq!(spied.status.code(), Some(2));
    let report: serde_json::Value = serde_json::from_str(&stdout(&spied)).unwrap();
    assert_eq!(report["eve_decision"], "abort");

    let bad = bsts(&["session", "--photons", "100"]);
    assert_eq!(bad.status.code(), Some(4));
    let bad = bsts(&["session", "--noise-flip-prob", "2"]);
    assert_eq!(bad.status.code(), Some(4));
    let bad = bsts(&["session", "--eve-basis-set", "RX"]);
    assert_eq!(bad.status.code(), Some(4));
}

#[test]
fn session_is_reproducible_and_honors_env_seed() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed_env: Option<&str>| {
        let path = dir.path().join(name);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_bsts"));
        cmd.args(["session", "--photons", "1024", "--noise-flip-prob", "0.02", "--json", "--trace-path"])
            .arg(&path)
            .env_remove("BSTS_SEED");
        if let Some(s) = seed_env {
            cmd.env("BSTS_SEED", s);
        }
        let out = cmd.output().unwrap();
        assert_eq!(out.status.code(), Some(0));
        (stdout(&out), std::fs::read(&path).unwrap())
    };
    let a = run("a.json", Some("17"));
    let b = run("b.json", Some("17"));
    let c = run("c.json", None);
    assert_eq!(a, b);
    assert_ne!(a.0, c.0);
    let report: serde_json::Value = serde_json::from_str(&a.0).unwrap();
    assert_eq!(report["seed"], 17);
}

#[test]
fn stage_subcommands() {
    let out = bsts(&["bb84", "--photons", "2000", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["sifted_qber"], 0.0);

    let out = bsts(&["bb84", "--photons", "2000", "--eve-mode", "intercept_resend"]);
    assert_eq!(out.status.code(), Some(2));

    let out = bsts(&["postprocess", "--key-a", "0110101101110001", "--key-b", "0110001101110001", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["keys_equal"], true);
    assert_eq!(v["discarded_positions"], serde_json::json!([5]));

    let out = bsts(&["bsts-run", "--key", "01100110011", "--message", "10110", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["decoded"], "10110");
    assert_eq!(v["photons"], 50);
    assert_eq!(v["real_photons"], 5);
}

#[test]
fn sweep_summarizes() {
    let out = bsts(&["sweep", "--photons", "512", "--runs", "8", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["runs"], 8);
    assert_eq!(v["summary"]["message_delivered"]["mean"], 1.0);
    assert_eq!(v["summary"]["qber"]["n"], 8);
}
