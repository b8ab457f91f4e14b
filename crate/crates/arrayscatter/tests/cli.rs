use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_arrayscatter"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

const SWEEP: &str = r#"
[point]
total = [0.0, 0.0]
[[sweep]]
variable = "q_x"
start = 6.5
stop = 12.0
count = 9
"#;

#[test]
fn cross_section_sweep_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), SWEEP).unwrap();
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let o = run(dir.path(), &["cross-section", "--config", "run.toml", "--out", "sigma.csv"]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(std::fs::read_to_string(dir.path().join("sigma.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0].lines().filter(|l| !l.starts_with('#')).count(), 10);
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), SWEEP).unwrap();
    for (threads, out) in [("1", "one.json"), ("2", "two.json")] {
        let o = run(
            dir.path(),
            &["smatrix", "--config", "run.toml", "--format", "json", "--threads", threads, "--out", out],
        );
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let read = |name: &str| -> serde_json::Value {
        serde_json::from_str(&std::fs::read_to_string(dir.path().join(name)).unwrap()).unwrap()
    };
    let (one, two) = (read("one.json"), read("two.json"));
    assert_eq!(one["rows"], two["rows"]);
    assert_eq!(one["rows"].as_array().unwrap().len(), 9);
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "[array]\nspacing = 0.7\n").unwrap();
    let o = run(dir.path(), &["dispersion", "--config", "bad.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
    let o = run(dir.path(), &["dispersion", "--config", "missing.toml"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(dir.path(), &["dispersion", "--format", "xml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn schema_lists_columns() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["cross-section", "--schema"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("sigma_total"), "{text}");
}
