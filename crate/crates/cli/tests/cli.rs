use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
[dataset.synth]
num_classes = 3
examples_per_class = 12
val_per_class = 8
length = 1024
band_low_hz = 300.0

[model.train]
fft_len = 128
hop = 64
conv1_channels = 4
conv2_channels = 6
epochs = 3
patience = 0
batch_size = 8

[attack]
variants = ["fft", "fft_no_timeshift", "uap"]

[attack.fourier]
epochs = 2
max_examples = 12

[attack.uap]
epochs = 1

[eval]
snr_grid = [0.0, 10.0]
shift_count = 4
cutoff_grid = [3000.0, 8000.0]
n_each = 6
calibrate = false
"#;

fn ufa(dir: &Path, args: &[&str]) -> Output {
    let out_dir = format!("output_dir={}", dir.join("run").display());
    Command::new(env!("CARGO_BIN_EXE_ufa"))
        .arg("--config")
        .arg(dir.join("tiny.toml"))
        .args(["--set", &out_dir])
        .args(args)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn stages_run_in_order_and_errors_are_categorized() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("tiny.toml"), TINY).unwrap();

    let early = ufa(dir.path(), &["eval", "--protocol", "time_shift"]);
    assert!(!early.status.success());
    let msg = stderr(&early);
    assert!(msg.starts_with("error[missing-artifact]:"), "{msg}");
    assert!(msg.contains("synth-data"), "{msg}");
    assert_eq!(msg.lines().count(), 1);

    for args in [&["synth-data"][..], &["train-classifier"], &["train-attack", "--variant", "fft"]] {
        let o = ufa(dir.path(), args);
        assert!(o.status.success(), "{args:?}: {}", stderr(&o));
    }
    let o = ufa(dir.path(), &["eval", "--protocol", "time_shift"]);
    let msg = stderr(&o);
    assert!(msg.contains("train-attack --variant fft_no_timeshift"), "{msg}");

    let o = ufa(dir.path(), &["run-all"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("min_over_shift0"), "{stdout}");
    let csv = std::fs::read(dir.path().join("run/summary.csv")).unwrap();

    let o = ufa(dir.path(), &["report"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read(dir.path().join("run/summary.csv")).unwrap(), csv);
    assert!(dir.path().join("run/manifests/eval_filtering.json").exists());
}

#[test]
fn config_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("tiny.toml"), TINY).unwrap();
    let o = ufa(dir.path(), &["--set", "eval.n_eachh=3", "show-config"]);
    assert!(!o.status.success());
    let msg = stderr(&o);
    assert!(msg.starts_with("error[config]:") && msg.contains("n_eachh"), "{msg}");

    let o = ufa(dir.path(), &["--set", "eval.n_each=3", "show-config"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("n_each = 3"));

    let o = ufa(dir.path(), &["train-attack", "--variant", "pgd"]);
    assert!(!o.status.success());
}
