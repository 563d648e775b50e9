use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = "\
train_count = 24
test_count = 12
scale_divisor = 16
batch_size = 4
iterations = 6
checkpoint_every = 3
";

fn pcw(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pcw"))
        .args(args)
        .arg("--config")
        .arg(dir.join("tiny.cfg"))
        .arg("--out")
        .arg(dir.join("out"))
        .env("PCW_THREADS", "1")
        .output()
        .unwrap()
}

fn setup(extra: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("tiny.cfg"), format!("{TINY}{extra}")).unwrap();
    dir
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn eval_before_training_names_the_missing_stage() {
    let dir = setup("");
    let o = pcw(dir.path(), &["eval"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("run `pcw"), "{}", stderr(&o));
}

#[test]
fn unknown_and_invalid_fields_fail() {
    let dir = setup("colour = red\n");
    let o = pcw(dir.path(), &["generate"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("unknown config field `colour`"), "{}", stderr(&o));

    let dir = setup("batch_size = 0\n");
    let o = pcw(dir.path(), &["train"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("`batch_size`"), "{}", stderr(&o));
}

#[test]
fn train_requires_generated_data() {
    let dir = setup("");
    let o = pcw(dir.path(), &["train"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("pcw generate"), "{}", stderr(&o));
}

#[test]
fn generate_then_train_is_reproducible() {
    let dir = setup("");
    assert!(pcw(dir.path(), &["generate"]).status.success());
    let o = pcw(dir.path(), &["train", "--lambda", "0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let run = dir.path().join("out/train/lambda_0");
    let first = fs::read(run.join("model.ckpt")).unwrap();
    for name in ["log.csv", "summary.json", "run.json", "checkpoints/iter_00003.ckpt"] {
        assert!(run.join(name).exists(), "{name}");
    }
    let log = fs::read_to_string(run.join("log.csv")).unwrap();
    assert_eq!(log.lines().next(), Some("iteration,l_total,l_ce,l_euclid,wall_ms"));
    assert_eq!(log.lines().count(), 7);

    assert!(pcw(dir.path(), &["train", "--lambda", "0"]).status.success());
    assert_eq!(fs::read(run.join("model.ckpt")).unwrap(), first);
}
