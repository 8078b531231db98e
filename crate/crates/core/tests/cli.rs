use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_csiforge");

/// A scenario small enough to train in a debug build.
const TINY: [&str; 14] = [
    "--set", "n_tx=8",
    "--set", "n_subcarriers=48",
    "--set", "n_taps=8",
    "--set", "n_samples=8",
    "--set", "split=0.5",
    "--set", "epochs=1",
    "--set", "batch_size=4",
];

fn run(args: &[&str], out: &Path) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).arg("--out").arg(out).env("RUST_LOG", "warn");
    cmd.output().expect("binary runs")
}

fn with_tiny<'a>(sub: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec![sub];
    v.extend(TINY);
    v.extend(extra);
    v
}

fn ok(o: &Output) -> String {
    assert!(o.status.success(), "status {:?}\nstderr: {}", o.status, String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn full_workflow_produces_hashed_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    ok(&run(&with_tiny("gen-data", &[]), &out));
    let data = out.join("dataset.csif");
    assert!(data.exists() && out.join("dataset.json").exists());
    let hash = std::fs::read_to_string(out.join("config.hash")).unwrap().trim().to_string();
    let sidecar = std::fs::read_to_string(out.join("dataset.json")).unwrap();
    assert!(sidecar.contains(&hash));

    ok(&run(&with_tiny("train", &["--data", data.to_str().unwrap()]), &out));
    assert!(out.join("model.csiw").exists());
    assert!(std::fs::read_to_string(out.join("training_curve.csv")).unwrap().contains(&hash));

    let model = out.join("model.csiw");
    let table = ok(&run(
        &with_tiny("evaluate", &["--data", data.to_str().unwrap(), "--model", model.to_str().unwrap()]),
        &out,
    ));
    assert!(table.contains("TWO_STAGE_RATE") && table.contains("GENIE"));
    let csv = std::fs::read_to_string(out.join("evaluation.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with(&hash)));
    assert!(out.join("evaluation.dat").exists());

    let o = Command::new(BIN).args(["report", "--input"]).arg(&out).output().unwrap();
    ok(&o);
    assert_eq!(
        std::fs::read_to_string(out.join("summary.csv")).unwrap(),
        std::fs::read_to_string(out.join("evaluation.csv")).unwrap()
    );
    assert!(!out.join(".csiforge.lock").exists());
}

#[test]
fn encode_debug_prints_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(&run(&with_tiny("encode-debug", &["--set", "codebook.kind=TYPE_I", "--set", "oversampling=4"]), dir.path()));
    assert!(text.contains("TypeI-O4"), "{text}");
    assert!(text.contains("unpack matches: true"), "{text}");
}

#[test]
fn evaluate_sweep_covers_every_codebook() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(&run(&with_tiny("evaluate", &["--sweep"]), dir.path()));
    for label in ["TypeI-O1", "TypeI-O4", "TypeII-O4-L4-SB4"] {
        assert!(text.contains(label), "{label} missing:\n{text}");
    }
}

#[test]
fn configuration_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["train", "--set", "n_antennas=3"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("scenario.n_tx"), "valid keys should be listed: {err}");

    let o = run(&["train", "--set", "oversampling=3"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("{1, 2, 4}"));

    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, "{\n  \"n_users\": ,\n}").unwrap();
    let o = run(&["train", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains(":2:"));
}

#[test]
fn corrupt_data_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    ok(&run(&with_tiny("gen-data", &[]), &out));
    let data = out.join("dataset.csif");
    let mut bytes = std::fs::read(&data).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 1;
    std::fs::write(&data, bytes).unwrap();
    let o = run(&with_tiny("train", &["--data", data.to_str().unwrap()]), &out);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("CRC"));
}

#[test]
fn a_locked_directory_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join(".csiforge.lock"), "1").unwrap();
    let o = run(&with_tiny("gen-data", &[]), dir.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("locked"));
}
