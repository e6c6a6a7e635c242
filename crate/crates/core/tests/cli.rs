use std::fs;
use std::path::Path;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_sibris");

const TINY: &str = "\
[scenario]
n_ris = 1
elements = 4
n_antennas = 2

[experiment]
schemes = proposed
n_drops = 1
";

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn code(args: &[&str]) -> i32 {
    Command::new(BIN).args(args).output().unwrap().status.code().unwrap()
}

#[test]
fn run_succeeds_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "tiny.ini", TINY);
    let out = dir.path().join("o.csv").display().to_string();
    assert_eq!(code(&["run", "--config", &cfg, "--out", &out, "--seed", "3", "--jobs", "1"]), 0);
    assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 2);
}

#[test]
fn sweep_alias_overrides_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "tiny.ini", TINY);
    let out = dir.path().join("o.csv").display().to_string();
    assert_eq!(code(&["sweep", "--config", &cfg, "--out", &out, "--var", "P_dbm", "--values", "30,34"]), 0);
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().all(|l| l.starts_with("scheme") || l.contains(",P_dbm,")));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad_syntax = write(dir.path(), "a.ini", "[scenario]\nelements 4\n");
    let bad_value = write(dir.path(), "b.ini", "[experiment]\nn_drops = 0\n");
    let tiny = write(dir.path(), "c.ini", TINY);
    assert_eq!(code(&["run", "--config", &bad_syntax]), 2);
    assert_eq!(code(&["run", "--config", &bad_value]), 2);
    assert_eq!(code(&["sweep", "--config", &tiny, "--var", "Q", "--values", "1"]), 2);
}

#[test]
fn io_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.ini").display().to_string();
    assert_eq!(code(&["run", "--config", &missing]), 3);
    let tiny = write(dir.path(), "c.ini", TINY);
    let blocker = write(dir.path(), "file", "");
    let out = format!("{blocker}/o.csv");
    assert_eq!(code(&["run", "--config", &tiny, "--out", &out]), 3);
}

#[test]
fn shipped_configs_parse_and_validate() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["desk.ini", "full.ini"] {
        let cfg = sibris::experiment::parse_config(&root.join(name)).unwrap();
        cfg.validate().unwrap();
    }
}
