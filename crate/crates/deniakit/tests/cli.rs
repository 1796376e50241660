use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_deniakit"))
        .args(args)
        .current_dir(cwd)
        .env_remove("DENIAKIT_SEED")
        .output()
        .expect("spawn deniakit")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn rows(csv: &str) -> Vec<(f64, f64)> {
    csv.lines()
        .skip(1)
        .map(|l| {
            let mut it = l.split(',');
            (it.next().unwrap().parse().unwrap(), it.next().unwrap().parse().unwrap())
        })
        .collect()
}

fn tmp() -> tempfile::TempDir {
    tempfile::tempdir().unwrap()
}

#[test]
fn channel_subcommands() {
    let d = tmp();
    let o = run(&["channel", "validate", &data("example1.json")], d.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("ok: |X|=2 |Y|=2 |Z|=3"));

    let o = run(&["channel", "degraded", &data("example1.json")], d.path());
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("degraded: yes"));
    assert!(s.contains("1: 0 0.5 0.5"), "{s}");

    let o = run(&["channel", "marginals", "--bec", "0.25"], d.path());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["eavesdropper"][0], serde_json::json!([0.75, 0.25, 0.0]));
}

#[test]
fn malformed_file_is_a_usage_error_with_position() {
    let d = tmp();
    std::fs::write(d.path().join("bad.json"), "{\n  \"x\": [\"a\",\n").unwrap();
    let o = run(&["channel", "validate", "bad.json"], d.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3 column"), "{err}");
    // unknown flags are usage errors too
    assert_eq!(run(&["region", "tx", "--bogus"], d.path()).status.code(), Some(2));
}

#[test]
fn invalid_law_is_a_domain_error() {
    let d = tmp();
    std::fs::write(
        d.path().join("c.json"),
        r#"{"x":["a"],"y":["b"],"z":["c","d"],"p":[[[0.5,0.4]]]}"#,
    )
    .unwrap();
    assert_eq!(run(&["channel", "validate", "c.json"], d.path()).status.code(), Some(1));
}

#[test]
fn zeroinfo_classes() {
    let d = tmp();
    let o = run(&["zeroinfo", &data("example2.json"), "--side", "tx"], d.path());
    assert_eq!(stdout(&o), "{w1,w2} {w3}\n");
    let o = run(&["zeroinfo", &data("example2.json"), "--side", "rx"], d.path());
    assert_eq!(stdout(&o), "{y1,y2} {y3}\n");

    // eavesdropper sees the input: every symbol is its own class
    std::fs::write(
        d.path().join("id.json"),
        r#"{"x":["a","b"],"y":["a","b"],"z":["a","b"],"p":[[[0.9,0],[0,0.1]],[[0,0.1],[0,0.9]]]}"#,
    )
    .unwrap();
    let o = run(&["zeroinfo", "id.json", "--side", "tx"], d.path());
    assert_eq!(stdout(&o), "{a} {b}\n");
}

#[test]
fn receiver_side_refuses_non_degraded() {
    let d = tmp();
    // Bob is a BSC(0.3), the eavesdropper sees X itself
    std::fs::write(
        d.path().join("nd.json"),
        r#"{"x":["0","1"],"y":["0","1"],"z":["0","1"],"p":[[[0.7,0],[0.3,0]],[[0,0.3],[0,0.7]]]}"#,
    )
    .unwrap();
    for args in [
        vec!["zeroinfo", "nd.json", "--side", "rx"],
        vec!["region", "rx", "nd.json"],
        vec!["simulate", "--setting", "receiver", "nd.json", "--n", "2", "--rate", "0.5"],
    ] {
        let o = run(&args, d.path());
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        assert!(String::from_utf8_lossy(&o.stderr).contains("degraded"));
    }
}

#[test]
fn transmitter_region_csv_and_sidecars() {
    let d = tmp();
    let o = run(
        &["region", "tx", &data("example2.json"), "--d-values", "0,0.6666666666666666,1", "--out", "tx.csv"],
        d.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(d.path().join("tx.csv")).unwrap();
    assert!(csv.starts_with("D,R,kind,channel_digest\n"));
    let r = rows(&csv);
    assert!((r[1].1 - 3f64.log2()).abs() <= 1e-3);
    assert!((r[2].1 - 1.0).abs() <= 1e-3);
    let w: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.path().join("tx.csv.witness.json")).unwrap()).unwrap();
    assert_eq!(w["kind"], "tx");
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.path().join("tx.csv.manifest.json")).unwrap()).unwrap();
    let cfg = &m["command"]["region"];
    assert_eq!(cfg["seed"], 0);
    assert_eq!(cfg["restarts"], 32);
    assert_eq!(cfg["grid"], 101);
    assert_eq!(m["outputs"].as_array().unwrap().len(), 2);
}

#[test]
fn equivocation_plateau() {
    let d = tmp();
    let o = run(&["region", "eq", "--bec", "0.5", "--by-rate", "--grid", "21"], d.path());
    let r = rows(&stdout(&o));
    assert_eq!(r.len(), 21);
    for (rate, dd) in r {
        let want = if rate >= 0.5 { 0.5 } else { rate };
        assert!((dd - want).abs() < 1e-12, "R={rate} D={dd}");
    }
    // closed forms need the erasure parameter
    assert_eq!(run(&["region", "eq", &data("example1.json")], d.path()).status.code(), Some(2));
}

#[test]
fn message_optimizer_inside_closed_form() {
    let d = tmp();
    let grid = "0,0.1,0.2,0.3,0.4,0.5";
    let closed = run(&["region", "message", "--bec", "0.5", "--closed-form", "--d-values", grid], d.path());
    let opt = run(&["region", "message", "--bec", "0.5", "--d-values", grid, "--restarts", "8"], d.path());
    assert_eq!(opt.status.code(), Some(0));
    let (c, o) = (rows(&stdout(&closed)), rows(&stdout(&opt)));
    assert_eq!(c.len(), o.len());
    for (a, b) in o.iter().zip(&c) {
        assert_eq!(a.0, b.0);
        assert!(a.1 <= b.1 + 2e-2, "{a:?} vs {b:?}");
        assert!(a.1 >= b.1 - 2e-2, "{a:?} vs {b:?}");
    }
}

fn simulate(args: &[&str], cwd: &Path) -> serde_json::Value {
    let o = run(args, cwd);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_str(&stdout(&o)).unwrap()
}

#[test]
fn simulate_examples() {
    let d = tmp();
    let v = simulate(
        &["simulate", "--setting", "transmitter", &data("example2.json"), "--n", "3", "--rate", "1", "--deniability", "0.6666666667", "--seed", "7", "--distinct"],
        d.path(),
    );
    assert_eq!(v["report"]["kl_plausibility"], 0.0);
    assert_eq!(v["report"]["deniability_rate"], 0.666666667);
    assert!(v["report"]["checks"].as_array().unwrap().iter().all(|c| c["residual"].as_f64().unwrap() >= -1e-9));

    let v = simulate(&["simulate", "--setting", "receiver", &data("example1.json"), "--n", "3", "--rate", "0.67"], d.path());
    assert_eq!(v["report"]["deniability_rate"], 0.0);
    assert_eq!(v["faker"], "receiver");

    let v = simulate(&["simulate", "--setting", "message", "--bec", "0.5", "--n", "3", "--rate", "0.67"], d.path());
    assert_eq!(v["report"]["deniability_rate"], 0.0);
    assert_eq!(v["report"]["kl_plausibility"], 0.0);

    let v = simulate(
        &["simulate", "--setting", "transmitter", "--bec", "0.5", "--n", "2", "--rate", "0.5", "--code", "iid", "--faker", "naive", "--trials", "50"],
        d.path(),
    );
    assert_eq!(v["report"]["kl_plausibility"], "inf");
    assert_eq!(v["monte_carlo"]["trials"], 50);

    // clique faking belongs to the transmitter
    let o = run(&["simulate", "--setting", "message", "--bec", "0.5", "--n", "2", "--rate", "0.5", "--faker", "clique"], d.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn seed_defaults_from_environment() {
    let d = tmp();
    let out = |name: &str| -> PathBuf { d.path().join(name) };
    let o = Command::new(env!("CARGO_BIN_EXE_deniakit"))
        .args(["simulate", "--setting", "message", "--bec", "0.3", "--n", "3", "--rate", "0.67", "--out", "a.json"])
        .current_dir(d.path())
        .env("DENIAKIT_SEED", "41")
        .output()
        .unwrap();
    assert!(o.status.success());
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out("a.json.manifest.json")).unwrap()).unwrap();
    assert_eq!(m["command"]["simulate"]["seed"], 41);
    assert_eq!(m["command"]["simulate"]["code"], "iid");
    assert_eq!(m["command"]["simulate"]["faker"], "split");

    // an explicit flag matches the environment default byte for byte
    run(&["simulate", "--setting", "message", "--bec", "0.3", "--n", "3", "--rate", "0.67", "--seed", "41", "--out", "b.json"], d.path());
    assert_eq!(std::fs::read(out("a.json")).unwrap(), std::fs::read(out("b.json")).unwrap());
}

#[test]
fn rerun_detects_changed_inputs() {
    let d = tmp();
    std::fs::copy(data("example2.json"), d.path().join("ch.json")).unwrap();
    let o = run(&["channel", "marginals", "ch.json", "--out", "m.json"], d.path());
    assert!(o.status.success());
    assert!(run(&["rerun", "m.json.manifest.json"], d.path()).status.success());
    let text = std::fs::read_to_string(d.path().join("ch.json")).unwrap().replace("\"w3\"", "\"w4\"");
    std::fs::write(d.path().join("ch.json"), text).unwrap();
    assert_eq!(run(&["rerun", "m.json.manifest.json"], d.path()).status.code(), Some(1));
}

#[test]
fn stdout_runs_record_a_manifest_on_request() {
    let d = tmp();
    let o = run(&["zeroinfo", &data("example2.json"), "--side", "tx", "--manifest", "z.json"], d.path());
    assert!(o.status.success());
    let o = run(&["rerun", "z.json"], d.path());
    assert!(o.status.success());
    assert_eq!(stdout(&o), "{w1,w2} {w3}\n");
}
