use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn olpomdp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_olpomdp"))
        .args(args)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL_SONAR: &str = r#"
schema_version = 1
experiment = "sonar"
seed = 3
runs = 2

[network]
layer_sizes = [60, 4, 1]
beta = 0.5
gamma = 1e-3
weight_init_halfwidth = 0.1

[sonar]
data = "DATA"
hold_steps = 10
epochs = 2
"#;

fn small_sonar(dir: &Path) -> String {
    let data = root().join("data/sonar.all-data");
    write(
        dir,
        "sonar.toml",
        &SMALL_SONAR.replace("DATA", data.to_str().unwrap()),
    )
}

#[test]
fn validate_accepts_shipped_configs() {
    for name in [
        "sonar_desk.toml",
        "sonar_paper.toml",
        "pendulum_desk.toml",
        "pendulum_paper.toml",
        "gradcheck_desk.toml",
    ] {
        let path = root().join("configs").join(name);
        let out = olpomdp(&["validate", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{name}: {out:?}");
        assert!(String::from_utf8_lossy(&out.stdout).contains("config hash"));
    }
}

#[test]
fn bad_config_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(
        dir.path(),
        "bad.toml",
        &SMALL_SONAR.replace("beta = 0.5", "beta = 1.5"),
    );
    assert_eq!(olpomdp(&["validate", &bad]).status.code(), Some(1));
    assert_eq!(olpomdp(&["run", &bad]).status.code(), Some(1));
    let unknown = write(
        dir.path(),
        "unknown.toml",
        &format!("{SMALL_SONAR}\nextra = 1\n"),
    );
    assert_eq!(olpomdp(&["validate", &unknown]).status.code(), Some(1));
    let missing = dir.path().join("nope.toml");
    assert_eq!(
        olpomdp(&["validate", missing.to_str().unwrap()])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(olpomdp(&["run"]).status.code(), Some(1));
}

#[test]
fn malformed_dataset_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "broken.data", "0.1,0.2,R\n");
    let cfg = write(dir.path(), "cfg.toml", &SMALL_SONAR.replace("DATA", &data));
    let out = olpomdp(&["run", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains(":1:"));
}

#[test]
fn unwritable_output_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_sonar(dir.path());
    let blocker = write(dir.path(), "file", "");
    let out = olpomdp(&["run", &cfg, "--out", &format!("{blocker}/sub")]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn run_is_deterministic_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_sonar(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let res = olpomdp(&["run", &cfg, "--out", out.to_str().unwrap(), "--log-raw"]);
        assert_eq!(res.status.code(), Some(0), "{res:?}");
    }
    for file in ["curves.csv", "runs.csv"] {
        assert_eq!(
            std::fs::read(a.join(file)).unwrap(),
            std::fs::read(b.join(file)).unwrap()
        );
    }
    assert!(a.join("run.json").exists());
    assert!(a.join("plot_curves.py").exists());
    assert!(std::fs::read_dir(a.join("raw")).unwrap().count() >= 2);
    let curves = std::fs::read_to_string(a.join("curves.csv")).unwrap();
    assert_eq!(curves.lines().count(), 1 + 3);

    let c = dir.path().join("c");
    olpomdp(&["run", &cfg, "--out", c.to_str().unwrap(), "--seed", "4"]);
    assert_ne!(
        std::fs::read(a.join("runs.csv")).unwrap(),
        std::fs::read(c.join("runs.csv")).unwrap()
    );
}

#[test]
fn gradcheck_single_step_is_labelled_high_variance() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = root().join("fixtures/three_state.toml");
    let out = olpomdp(&[
        "gradcheck",
        fixture.to_str().unwrap(),
        "--betas",
        "0.5,0.9",
        "--steps",
        "1",
        "--seeds",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let stdout = String::from_utf8_lossy(&out.stdout);
    let rows: Vec<&str> = stdout.lines().filter(|l| l.starts_with("0.")).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.ends_with("high-variance")));
    assert!(dir.path().join("gradcheck.csv").exists());
}

#[test]
fn gradcheck_rejects_non_mixing_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = write(
        dir.path(),
        "stuck.toml",
        r#"
n_states = 2
rewards = [0.0, 1.0]
observations = [[1.0], [1.0]]
transitions = [[[1.0, 0.0], [0.0, 1.0]]]
"#,
    );
    let out = olpomdp(&[
        "gradcheck",
        &fixture,
        "--betas",
        "0.5",
        "--steps",
        "10",
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_ne!(out.status.code(), Some(0), "{out:?}");
}
