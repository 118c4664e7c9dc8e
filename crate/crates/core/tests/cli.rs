use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"{"trials": 12, "model": {"dataset_pairs": 520, "train": {"epochs": 1}}}"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_uwb-guard"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn uwb-guard")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn run_with_same_seed_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let mut outputs = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let out = dir.path().join(name);
        let o = run(&["--config", &cfg, "--seed", "42", "run", "--attack", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs.remove(0)).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# {"));
    assert!(lines.next().unwrap().starts_with("trial,truth,decision,hamming_d,"));
    assert_eq!(lines.count(), 12);
}

#[test]
fn gen_data_refuses_attacked_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"attack": {"enabled": true}}"#);
    let out = dir.path().join("d.bin");
    let o = run(&["--config", &cfg, "gen-data", "--pairs", "2", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn bad_config_and_bad_data_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"detector": {"q": 3}}"#);
    assert_eq!(run(&["--config", &cfg, "inspect-model", "--dims", "4,2"]).status.code(), Some(2));

    let junk = dir.path().join("junk.bin");
    std::fs::write(&junk, b"UWBCIR\x01\x00").unwrap();
    let model = dir.path().join("m.bin");
    let o = run(&["train", "--data", junk.to_str().unwrap(), "--out", model.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let o = run(&["inspect-model", "--model", junk.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn inspect_model_closed_form() {
    let o = run(&["inspect-model", "--dims", "700,32"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("flops: 44768"), "{s}");
    assert!(s.contains("params: 22432"), "{s}");

    let o = run(&["inspect-model", "--dims", "700,512,128,32,128,512,700"]);
    assert!(stdout(&o).contains("params: 858076"));
}

#[test]
fn gen_train_calibrate_inspect() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"model": {"dims": [700, 16, 700], "latent_dim": 16, "train": {"epochs": 1}}}"#,
    );
    let data = dir.path().join("d.bin");
    let model = dir.path().join("m.bin");
    let (data_s, model_s) = (data.to_str().unwrap(), model.to_str().unwrap());

    let o = run(&["--config", &cfg, "--seed", "3", "gen-data", "--pairs", "510", "--out", data_s]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::metadata(&data).unwrap().len(), 14 + 510 * 700 * 2 * 4);

    let o = run(&["--config", &cfg, "train", "--data", data_s, "--out", model_s]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("m.bin.json").exists());

    let o = run(&["--config", &cfg, "calibrate", "--model", model_s, "--data", data_s]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let s = stdout(&run(&["inspect-model", "--model", model_s]));
    assert!(s.contains("dims: 700,16,700"), "{s}");
    assert!(s.contains("calibration: q=4 alpha_t=0.5"), "{s}");
}
