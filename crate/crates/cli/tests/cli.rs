//! End-to-end checks of the binary: exit codes, artifact shape, manifests,
//! and byte-identical reruns.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn advcal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_advcal"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.txt");
    fs::write(&path, body).unwrap();
    path.display().to_string()
}

#[test]
fn config_errors_exit_2_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "experiment = segments\ngamma = 1.5\n");
    let out = advcal(&["--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 2"), "{stderr}");

    let cfg = write_config(dir.path(), "experiment = segments\n[segments]\nsurrogates = foo()\n");
    let out = advcal(&["--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("foo"));

    let out = advcal(&[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn segments_run_is_byte_identical_and_manifested() {
    let dir = tempfile::tempdir().unwrap();
    let body = "\
experiment = segments
gamma = 0.1
n_samples = 20000
grid_n = 256
seed = 5
";
    let cfg = write_config(dir.path(), body);
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out_dir in [&out_a, &out_b] {
        let out = advcal(&["--config", &cfg, "--out", out_dir.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let csv_a = fs::read(out_a.join("segments.csv")).unwrap();
    let csv_b = fs::read(out_b.join("segments.csv")).unwrap();
    assert_eq!(csv_a, csv_b, "reruns must be byte-identical");

    let text = String::from_utf8(csv_a).unwrap();
    assert!(text.starts_with("surrogate,adv_risk,surrogate_risk,theta,calibrated,n,seed,stderr"));
    // The ramp row at rho = gamma_hat is exactly zero across the board.
    let phi2 = text.lines().find(|l| l.contains("rho=0.109")).unwrap();
    let fields: Vec<&str> = phi2.split(',').collect();
    assert_eq!(&fields[1..4], &["0", "0", "0"]);
    // Convex surrogates are flagged not calibrated, the clipped family is.
    let verdicts: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(4).unwrap())
        .collect();
    assert_eq!(verdicts, ["no", "yes", "yes", "no", "no", "yes"]);

    // The manifest lists every artifact and embeds a re-runnable config.
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_a.join("run_manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["experiment"], "segments");
    assert_eq!(manifest["seed"], 5);
    let outputs = manifest["outputs"].as_array().unwrap();
    assert!(!outputs.is_empty());
    for entry in outputs {
        assert!(Path::new(entry.as_str().unwrap()).exists());
    }
    let embedded = manifest["config"].as_str().unwrap();
    let rerun_cfg = write_config(dir.path(), embedded);
    let out_c = dir.path().join("c");
    let out = advcal(&["--config", &rerun_cfg, "--out", out_c.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(fs::read(out_c.join("segments.csv")).unwrap(), csv_b);
}

#[test]
fn calibration_report_h_lin_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let body = "\
experiment = calibration_report
gamma = 0.1

[calibration_report]
loss = rho_margin(rho=0.05)
class = h_lin
";
    let cfg = write_config(dir.path(), body);
    let out = advcal(&["--config", &cfg, "--out", dir.path().join("r").to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("r/calibration_report.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report["verdict"], "not_calibrated");
    assert_eq!(report["gamma"], 0.1);
    assert!(report["conditions"][0]["holds"] == false);
}

#[test]
fn calibration_report_h_nn_sup_ramp() {
    let dir = tempfile::tempdir().unwrap();
    let body = "\
experiment = calibration_report
gamma = 0.3

[calibration_report]
loss = rho_margin(rho=1.0)
class = h_nn
lambda = 2.0
w_bound = 1.5
units = 4
epsilons = 0.25
";
    let cfg = write_config(dir.path(), body);
    let out = advcal(&["--config", &cfg, "--out", dir.path().join("r").to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("r/calibration_report.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report["verdict"], "calibrated");
    assert!(report["deltas"][0].as_f64().unwrap() > 0.01);
}

#[test]
fn margin_oracle_passes_and_seed_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let body = "\
experiment = margin_oracle
gamma = 0.3

[margin_oracle]
cases = 40
dims = 2, 3
";
    let cfg = write_config(dir.path(), body);
    let out_dir = dir.path().join("m");
    let out = advcal(&[
        "--config",
        &cfg,
        "--seed",
        "9",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(out_dir.join("margin_oracle.csv")).unwrap();
    assert!(csv.starts_with("case,kind,dim,gamma"));
    assert_eq!(csv.lines().count(), 41);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("run_manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["seed"], 9);
}

#[test]
fn unit_circle_run_emits_table_and_bayes_row() {
    let dir = tempfile::tempdir().unwrap();
    let body = "\
experiment = unit_circle
gamma = 0.7071067811865476
n_samples = 50000
grid_n = 1024
seed = 42
";
    let cfg = write_config(dir.path(), body);
    let out_dir = dir.path().join("u");
    let out = advcal(&["--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let table = fs::read_to_string(out_dir.join("unit_circle.csv")).unwrap();
    assert!(table.starts_with("surrogate,adv_risk,theta,calibrated,n,seed,stderr"));
    // Convexity rules out hinge and logistic; the clipped pair is calibrated
    // at this budget.
    let verdicts: Vec<&str> = table
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(3).unwrap())
        .collect();
    assert_eq!(verdicts, ["no", "yes", "yes", "no"]);

    let bayes = fs::read_to_string(out_dir.join("unit_circle_bayes.csv")).unwrap();
    let row = bayes.lines().nth(1).unwrap();
    let risk: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
    assert!((risk - 0.5).abs() < 0.01, "bayes risk {risk}");
}

#[test]
fn consistency_run_emits_one_curve_per_surrogate() {
    let dir = tempfile::tempdir().unwrap();
    let body = "\
experiment = consistency_curve
gamma = 0.1
n_samples = 20000
grid_n = 256
seed = 3

[consistency_curve]
surrogates = rho_margin(rho=0.109), ramp_shifted
sizes = 50, 200
reps = 2
";
    let cfg = write_config(dir.path(), body);
    let out_dir = dir.path().join("c");
    let out = advcal(&["--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["consistency_rho_margin_rho_0_109_.csv", "consistency_ramp_shifted.csv"] {
        let text = fs::read_to_string(out_dir.join(name)).unwrap();
        assert!(text.starts_with("n,mean,std"), "{name}");
        assert_eq!(text.lines().count(), 3, "{name}");
    }
}

#[test]
fn jobs_flag_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let body = "\
experiment = segments
gamma = 0.1
n_samples = 20000
grid_n = 256
seed = 5
";
    let cfg = write_config(dir.path(), body);
    let out_a = dir.path().join("j1");
    let out_b = dir.path().join("j2");
    let run_a = advcal(&["--config", &cfg, "--jobs", "1", "--out", out_a.to_str().unwrap()]);
    let run_b = advcal(&["--config", &cfg, "--jobs", "2", "--out", out_b.to_str().unwrap()]);
    assert!(run_a.status.success() && run_b.status.success());
    assert_eq!(
        fs::read(out_a.join("segments.csv")).unwrap(),
        fs::read(out_b.join("segments.csv")).unwrap()
    );
}

#[test]
fn calibration_report_h_relu_curve_is_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let body = "\
experiment = calibration_report
gamma = 0.3

[calibration_report]
loss = rho_margin(rho=1.0)
class = h_relu
g_bound = 2.0
epsilons = 0.05, 0.1, 0.25, 0.5
";
    let cfg = write_config(dir.path(), body);
    let out = advcal(&["--config", &cfg, "--out", dir.path().join("r").to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("r/calibration_report.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report["verdict"], "calibrated");
    let deltas: Vec<f64> = report["deltas"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert!(deltas.windows(2).all(|w| w[0] <= w[1] + 1e-12), "{deltas:?}");
    assert!(deltas[0] > 0.0);
    assert_eq!(report["conditions"].as_array().unwrap().len(), 2);
}

#[test]
fn runtime_failures_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    // Unwritable output directory: the target is under a regular file.
    let blocker = dir.path().join("blocker");
    fs::write(&blocker, "x").unwrap();
    let body = "experiment = margin_oracle\n[margin_oracle]\ncases = 4\n";
    let cfg = write_config(dir.path(), body);
    let out = advcal(&[
        "--config",
        &cfg,
        "--out",
        blocker.join("sub").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));

    // A tolerance below float resolution makes the oracle cross-check fail.
    let body = "experiment = margin_oracle\n[margin_oracle]\ncases = 40\ntol = 1e-18\n";
    let cfg = write_config(dir.path(), body);
    let out = advcal(&["--config", &cfg, "--out", dir.path().join("t").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("disagrees"));
}

#[test]
fn experiment_flag_without_config_uses_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("o");
    let out = advcal(&[
        "--experiment",
        "margin_oracle",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("margin_oracle.csv").exists());
}
