use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spheroid"))
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.json");
    fs::write(&path, body).unwrap();
    path
}

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg(cmd)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

const SMALL: &str = r#"{
  "sweep": { "c_c": { "lo": 0.08, "hi": 0.12, "count": 3 }, "c_d": { "lo": 0.04, "hi": 0.06, "count": 3 }, "sigma": 0.9 },
  "optimizer": { "max_iter": 5 },
  "gradcheck": { "random_points": 2 },
  "observations": { "noise": { "level": 0.05 } }
}"#;

#[test]
fn missing_config_flag_is_a_usage_error() {
    let out = bin().arg("forward").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unreadable_or_invalid_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("forward", &dir.path().join("absent.json"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.json"));

    let cfg = write_config(dir.path(), r#"{"grid": {"n_y": 30, "dt": 0.01, "n_t": 50}, "mu": 3}"#);
    assert_eq!(run("forward", &cfg, dir.path(), &[]).status.code(), Some(2));

    let cfg = write_config(dir.path(), r#"{"optimizer": {"alpha": -1.0}}"#);
    assert_eq!(run("invert", &cfg, dir.path(), &[]).status.code(), Some(2));
}

#[test]
fn solver_failure_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    // Courant number well above one
    let cfg = write_config(dir.path(), r#"{"grid": {"n_y": 30, "dt": 0.5, "n_t": 4}}"#);
    let out = run("forward", &cfg, &dir.path().join("o"), &[]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn forward_writes_growing_radius() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "{}");
    let out_dir = dir.path().join("fwd");
    let out = run("forward", &cfg, &out_dir, &["--emit-adjoint"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(out_dir.join("radius.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t [-],S [r0],S_prime [r0]");
    let s: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(s.len(), 51);
    assert!(s.windows(2).all(|w| w[1] > w[0]));
    for f in [
        "density.csv",
        "nutrient.csv",
        "velocity.csv",
        "summary.json",
        "adjoint/lambda1.csv",
    ] {
        assert!(out_dir.join(f).is_file(), "{f}");
    }
}

#[test]
fn every_command_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    for cmd in ["forward", "generate", "sweep", "gradcheck", "invert"] {
        let (a, b) = (dir.path().join(format!("{cmd}_a")), dir.path().join(format!("{cmd}_b")));
        for out in [&a, &b] {
            let o = run(cmd, &cfg, out, &[]);
            let expected = if cmd == "gradcheck" && cfg!(feature = "inject-fault") {
                1
            } else {
                0
            };
            assert_eq!(
                o.status.code(),
                Some(expected),
                "{cmd}: {}",
                String::from_utf8_lossy(&o.stderr)
            );
        }
        let (fa, fb) = (read_dir_sorted(&a), read_dir_sorted(&b));
        assert!(!fa.is_empty());
        assert_eq!(fa, fb, "{cmd} output differs between runs");
    }
}

#[test]
fn seed_flag_changes_noisy_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run("generate", &cfg, &a, &["--seed", "1"]).status.success());
    assert!(run("generate", &cfg, &b, &["--seed", "2"]).status.success());
    assert_ne!(
        fs::read(a.join("observations.csv")).unwrap(),
        fs::read(b.join("observations.csv")).unwrap()
    );
}

#[test]
fn generated_data_can_be_loaded_back() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let data = dir.path().join("data");
    assert!(run("generate", &cfg, &data, &[]).status.success());
    let cfg = write_config(
        dir.path(),
        r#"{ "initial_condition": { "file": { "path": "data/initial_condition.json" } },
             "observations": { "file": "data/observations.csv" },
             "optimizer": { "max_iter": 3 } }"#,
    );
    let out = run("invert", &cfg, &dir.path().join("inv"), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[cfg(not(feature = "inject-fault"))]
#[test]
fn gradcheck_passes_on_the_default_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"gradcheck": {"random_points": 5}}"#);
    let out = run("gradcheck", &cfg, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("gradcheck.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["reports"].as_array().unwrap().len(), 6);
}

#[test]
fn invert_from_the_truth_converges_at_once() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"initial_guess": {"c_c": 0.1, "c_d": 0.05, "sigma": 0.9}}"#,
    );
    assert!(run("invert", &cfg, dir.path(), &[]).status.success());
    let report: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("result.json")).unwrap()).unwrap();
    assert_eq!(report["iterations"], 0);
    assert_eq!(report["stopped_by"][0], "functional");
    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(
        trace.lines().next().unwrap(),
        "k,c_c [-],c_d [-],sigma [-],J [-],gnorm [-],step [-]"
    );
    assert_eq!(trace.lines().count(), 2);
}

#[cfg(feature = "inject-fault")]
#[test]
fn injected_fault_fails_gradcheck() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "{}");
    let out = run("gradcheck", &cfg, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
}
