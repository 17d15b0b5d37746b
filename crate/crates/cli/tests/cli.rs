use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn gksl(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gksl")).args(args).arg("--out").arg(out).output().unwrap()
}

fn run_with(command: &str, config: &Path, extra: &[&str]) -> (Output, tempfile::TempDir) {
    let out = tempfile::tempdir().unwrap();
    let mut args = vec![command, "--config", config.to_str().unwrap()];
    args.extend_from_slice(extra);
    (gksl(&args, out.path()), out)
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("scenario.json");
    std::fs::write(&path, text).unwrap();
    path
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    (header, rows)
}

fn report(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

#[test]
fn propagate_dephasing_matches_closed_form() {
    let (output, out) = run_with("propagate", &scenario("dephasing.json"), &[]);
    assert_eq!(output.status.code(), Some(0));
    let (header, rows) = csv_rows(&out.path().join("propagate_m1.csv"));
    assert_eq!(header, ["t", "re[m1_1]", "im[m1_1]", "re[m1_2]", "im[m1_2]"]);
    assert_eq!(rows.len(), 51);
    for row in &rows {
        assert!((row[1] - 0.5 * (-row[0] / 2.0).exp()).abs() < 1e-14);
        assert_eq!(row[2], 0.0);
    }
    let (header, rows) = csv_rows(&out.path().join("propagate_m2.csv"));
    assert_eq!(header[1], "re[m2_1_1]");
    assert_eq!(header[7], "re[m2_2_2]");
    let last = rows.last().unwrap();
    assert!((last[1] - 0.25 * (-10.0f64).exp()).abs() < 1e-14);
    assert!((last[3] - 1.25).abs() < 1e-12);
    assert!((last[5] - 0.25).abs() < 1e-12);
    let text = std::fs::read_to_string(out.path().join("propagate_m1.csv")).unwrap();
    assert!(text.ends_with('\n') && !text.contains('\r'));
}

#[test]
fn propagate_uses_explicit_moments_and_reuse_step() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{"system": {"statistics": "boson", "modes": 1},
            "coefficients": [[[0, 1], [1, 0]]],
            "initial": {"state": {"kind": "vacuum"}, "moments": {"1": [[0.5, 0], [0.5, 0]]}},
            "times": {"stop": 2, "steps": 5, "reuse_step": true},
            "moment_orders": [1]}"#,
    );
    let (output, out) = run_with("propagate", &config, &[]);
    assert_eq!(output.status.code(), Some(0), "{}", String::from_utf8_lossy(&output.stderr));
    let (_, rows) = csv_rows(&out.path().join("propagate_m1.csv"));
    for row in rows {
        assert!((row[1] - 0.5 * (-row[0] / 2.0).exp()).abs() < 1e-14);
    }
}

#[test]
fn zero_coefficient_keeps_moments_constant() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{"system": {"statistics": "boson", "modes": 1},
            "coefficients": [[[0, 0], [0, 0]]],
            "initial": {"state": {"kind": "coherent", "alpha": [[0.3, 0.2]]}},
            "times": {"stop": 4, "steps": 9},
            "moment_orders": [1, 2],
            "oracle": {"cutoff": 25}}"#,
    );
    let (output, out) = run_with("propagate", &config, &[]);
    assert_eq!(output.status.code(), Some(0));
    for file in ["propagate_m1.csv", "propagate_m2.csv"] {
        let (_, rows) = csv_rows(&out.path().join(file));
        for row in &rows {
            assert_eq!(row[1..], rows[0][1..]);
        }
    }
}

#[test]
fn malformed_coefficient_exits_2() {
    let (output, _) = run_with("propagate", &scenario("malformed_k.json"), &[]);
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("K = K^T"));
}

#[test]
fn input_errors_exit_2() {
    let out = tempfile::tempdir().unwrap();
    assert_eq!(gksl(&["compare"], out.path()).status.code(), Some(2));
    assert_eq!(gksl(&["compare", "--config", "/nonexistent.json"], out.path()).status.code(), Some(2));
    let (output, _) = run_with("compare", &scenario("dephasing.json"), &["--jobs", "0"]);
    assert_eq!(output.status.code(), Some(2));
    let (output, _) = run_with("compare", &scenario("dephasing.json"), &["--tolerance", "-1"]);
    assert_eq!(output.status.code(), Some(2));
    let (output, _) = run_with("stationary", &scenario("dephasing.json"), &[]);
    assert_eq!(output.status.code(), Some(2));
    let bad = write_config(out.path(), "{\"system\": {\"statistics\": \"boson\"}}");
    let (output, _) = run_with("propagate", &bad, &[]);
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("modes"));
}

#[test]
fn resource_caps_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{"system": {"statistics": "fermion", "modes": 2},
            "random_coefficients": {"count": 1},
            "initial": {"state": {"kind": "vacuum"}},
            "times": {"stop": 1, "steps": 3},
            "moment_orders": [3],
            "oracle": {"moment_cap": 16}}"#,
    );
    let (output, _) = run_with("compare", &config, &[]);
    assert_eq!(output.status.code(), Some(3));
    let (output, _) = run_with("propagate", &config, &[]);
    assert_eq!(output.status.code(), Some(3));
}

#[test]
fn compare_examples() {
    let (output, out) = run_with("compare", &scenario("dephasing.json"), &[]);
    assert_eq!(output.status.code(), Some(0));
    let r = report(out.path(), "compare.json");
    assert_eq!(r["verdict"], "pass");
    assert!(r["orders"][0]["max_deviation"].as_f64().unwrap() < 1e-6);
    assert_eq!(r["orders"][0]["per_time"].as_array().unwrap().len(), 51);

    let (output, out) = run_with("compare", &scenario("dephasing_truncated.json"), &[]);
    assert_eq!(output.status.code(), Some(3));
    let r = report(out.path(), "compare.json");
    assert_eq!(r["verdict"], "truncation-alarm");
    assert!(r.get("orders").is_none());

    let (output, out) = run_with("compare", &scenario("fermion_random.json"), &[]);
    assert_eq!(output.status.code(), Some(0));
    assert_eq!(report(out.path(), "compare.json")["seed"], 7);
}

#[test]
fn compare_fails_on_impossible_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{"system": {"statistics": "boson", "modes": 1},
            "coefficients": [[[0, 1], [1, 0]]],
            "initial": {"state": {"kind": "coherent", "alpha": [[0.5, 0]]}},
            "times": {"stop": 2, "steps": 5},
            "moment_orders": [2],
            "oracle": {"cutoff": 30}}"#,
    );
    let (output, out) = run_with("compare", &config, &["--tolerance", "1e-300"]);
    assert_eq!(output.status.code(), Some(1));
    assert_eq!(report(out.path(), "compare.json")["verdict"], "fail");
}

#[test]
fn stationary_examples() {
    let (output, out) = run_with("stationary", &scenario("stationary_thermal.json"), &[]);
    assert_eq!(output.status.code(), Some(0));
    let r = report(out.path(), "stationary.json");
    assert_eq!(r["verdict"], "stationary");
    let s = r["log_normalization"][0].as_f64().unwrap();
    assert!((s - (0.5f64.exp() - (-0.5f64).exp()).ln()).abs() < 1e-12);
    assert!(r["oracle"]["generator_norm"].as_f64().unwrap() < 1e-8);
    assert_eq!(r["residuals"][0]["absolute"], 0.0);

    let (output, out) = run_with("stationary", &scenario("stationary_counterexample.json"), &[]);
    assert_eq!(output.status.code(), Some(1));
    assert_eq!(report(out.path(), "stationary.json")["verdict"], "not stationary");

    let (output, out) = run_with("stationary", &scenario("stationary_fermion_mixed.json"), &[]);
    assert_eq!(output.status.code(), Some(0));
    let r = report(out.path(), "stationary.json");
    assert!((r["log_normalization"][0].as_f64().unwrap() + 2f64.ln()).abs() < 1e-15);
}

#[test]
fn stationary_rejects_invalid_exponent() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{"system": {"statistics": "boson", "modes": 1},
            "coefficients": [[[0, 1], [1, 0]]],
            "gaussian": {"m": [[0, 1], [1, 0]], "oracle": false}}"#,
    );
    let (output, _) = run_with("stationary", &config, &[]);
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("negative definite"));
}

#[test]
fn oracle_and_lemmas_commands() {
    let (output, out) = run_with("oracle", &scenario("fermion_random.json"), &["--jobs", "2"]);
    assert_eq!(output.status.code(), Some(0));
    let r = report(out.path(), "oracle.json");
    let trajectory = r["trajectory"].as_array().unwrap();
    assert_eq!(trajectory.len(), 31);
    for point in trajectory {
        assert!((point["trace"][0].as_f64().unwrap() - 1.0).abs() < 1e-9);
    }
    assert!(out.path().join("oracle_m2.csv").exists());

    for (file, instances) in [("lemmas_fermion.json", "5"), ("lemmas_boson.json", "3")] {
        let (output, out) = run_with("verify-lemmas", &scenario(file), &["--instances", instances]);
        assert_eq!(output.status.code(), Some(0), "{file}");
        let r = report(out.path(), "lemmas.json");
        assert_eq!(r["verdict"], "pass");
        assert_eq!(r["identities"].as_array().unwrap().len(), 5);
    }
}

#[test]
fn seed_changes_random_output_deterministically() {
    let config = scenario("fermion_random.json");
    let read = |seed: &str| {
        let (output, out) = run_with("propagate", &config, &["--seed", seed]);
        assert_eq!(output.status.code(), Some(0));
        std::fs::read(out.path().join("propagate_m2.csv")).unwrap()
    };
    assert_eq!(read("1"), read("1"));
    assert_ne!(read("1"), read("2"));
}
