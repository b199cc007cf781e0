use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use lom::checkpoint::Checkpoint;
use lom::mnist::InputConfig;
use lom::{Network, TopologyConfig};

fn lom(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lom")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).trim().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).to_string()
}

#[test]
fn encode_prints_codes() {
    for (bits, code) in [("101", "01011010"), ("011", "00111100"), ("1", "01"), ("00", "0000")] {
        let o = lom(&["encode", bits]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert_eq!(stdout(&o), code);
    }
}

#[test]
fn encode_rejects_non_binary() {
    let o = lom(&["encode", "2"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains('2'));
    assert!(!lom(&["encode", "10a1"]).status.success());
}

#[test]
fn missing_dataset_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[dataset]\ndir = \"nowhere\"\n").unwrap();
    let o = lom(&["experiment", "--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    let expected = dir.path().join("nowhere").join("train-images-idx3-ubyte");
    assert!(stderr(&o).contains(&expected.display().to_string()), "{}", stderr(&o));
}

#[test]
fn missing_config_is_named() {
    let o = lom(&["experiment", "--config", "/no/such/run.toml"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("/no/such/run.toml"));
}

#[test]
fn bad_config_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[topology]\nvote_threshold = 2.0\n").unwrap();
    let o = lom(&["experiment", "--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("vote threshold"));
}

fn untrained_checkpoint(path: &Path) {
    Checkpoint {
        seed: 1,
        examples_seen: 0,
        input: InputConfig::default(),
        network: Network::build(TopologyConfig::default()).unwrap(),
    }
    .save(path)
    .unwrap();
}

#[test]
fn corrupted_checkpoint_magic_fails() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ck.lom");
    untrained_checkpoint(&path);
    let mut bytes = fs::read(&path).unwrap();
    bytes[0] = b'X';
    fs::write(&path, &bytes).unwrap();
    let o = lom(&["eval", "--checkpoint", path.to_str().unwrap(), "--dataset", "unused"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("magic"), "{}", stderr(&o));
}

#[test]
fn inspect_untrained_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ck.lom");
    untrained_checkpoint(&path);
    let o = lom(&["inspect", "--checkpoint", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "unit,layer,patterns,label_entropy");
    assert_eq!(lines.len(), 1 + 484 + 121);
    assert_eq!(lines[1], "0,1,0,0.0000");
    assert_eq!(lines[605], "604,2,0,0.0000");
}

#[test]
fn untrained_checkpoint_scores_at_chance() {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist");
    if !data.join("t10k-images-idx3-ubyte").exists() {
        eprintln!("MNIST files not found under {}; skipping", data.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ck.lom");
    untrained_checkpoint(&path);
    let o = lom(&[
        "eval",
        "--checkpoint",
        path.to_str().unwrap(),
        "--dataset",
        data.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let err: f64 = stdout(&o).parse().unwrap();
    assert_eq!(stdout(&o).split('.').nth(1).map(str::len), Some(4));
    // Ten equally likely classes: 0.9 with binomial sd sqrt(0.9 * 0.1 / 10000).
    let sigma = (0.9f64 * 0.1 / 10_000.0).sqrt();
    assert!((err - 0.9).abs() <= 3.0 * sigma, "error {err}");
}
