use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
seed = 3
[data]
conditions = 3
dim = 4
noise = 0.1
artifacts = 1
artifact_scale = 0.3
train_per_condition = 8
heldout_per_condition = 2
[model]
hidden = [32, 32]
[training]
steps = 400
learning_rate = 3e-3
batch_size = 8
[rewards]
codebook_size = 16
[pool]
prompts = 4
k = 6
euler_steps = 8
[pairing]
r = 5
[pairing.percentiles]
primary = 50.0
secondary = 0.0
floor = 0.0
semantic_ceiling = 100.0
[dpo]
epochs = 2
batch_size = 4
warmup_steps = 1
[eval]
prompts = 3
samples_per_prompt = 2
euler_steps = 8
resamples = 50
"#;

fn flowdpo(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flowdpo"))
        .args(args)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn tiny(dir: &Path) -> String {
    let path = dir.join("tiny.toml");
    std::fs::write(&path, TINY).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn pipeline_prints_both_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path());
    let out = flowdpo(&["pipeline", "--config", &cfg], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.matches("# report").count(), 2);
    assert!(stdout.contains("bpm_std="));
    assert!(dir.path().join("out/net_win.txt").exists());
}

#[test]
fn subcommands_chain_and_then_cache() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path());
    for cmd in ["train-ref", "gen-pool", "score", "pair", "dpo", "eval"] {
        let out = flowdpo(&[cmd, "--config", &cfg], dir.path());
        assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let out = flowdpo(&["pipeline", "--config", &cfg], dir.path());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.matches("cached").count(), 7, "{stderr}");
}

#[test]
fn seed_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path());
    assert!(flowdpo(&["train-ref", "--config", &cfg, "--seed", "99"], dir.path()).status.success());
    let log = std::fs::read_to_string(dir.path().join("out/train_ref.log")).unwrap();
    let other = tempfile::tempdir().unwrap();
    assert!(flowdpo(&["train-ref", "--config", &cfg], other.path()).status.success());
    assert_ne!(log, std::fs::read_to_string(other.path().join("out/train_ref.log")).unwrap());
}

#[test]
fn missing_inputs_fail_with_the_stage_name() {
    let dir = tempfile::tempdir().unwrap();
    let out = flowdpo(&["pair"], dir.path());
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("stage `pair` failed"), "{stderr}");
    assert_eq!(stderr.matches("No such file").count(), 1, "{stderr}");
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[dpo]\nbeta = 1.0\ngamma = 2.0\n").unwrap();
    let out = flowdpo(&["train-ref", "--config", path.to_str().unwrap()], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("gamma"));
}
