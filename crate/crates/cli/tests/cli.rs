use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mpray_cli::config::{from_json, RunConfig, SystemSpec};
use mpray_cli::{CliError, EXIT_CHECK_FAILED, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE};
use serde_json::Value;

fn mpray(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mpray"))
        .args(args)
        .output()
        .expect("spawn mpray")
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path
}

fn config_pointer(text: &str) -> String {
    match from_json(text) {
        Err(CliError::Config { pointer, .. }) => pointer,
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn defaults_fill_missing_sections() {
    let cfg = from_json(r#"{"system": "SYS-E"}"#).unwrap();
    assert_eq!(cfg.seed, 42);
    assert_eq!(cfg.integrator.rtol, 1e-10);
    assert_eq!(cfg.integrator.atol, 1e-12);
    assert_eq!((cfg.grids.fan_positions, cfg.grids.fan_directions), (8, 8));
    assert_eq!(
        (cfg.grids.radial, cfg.grids.angular, cfg.grids.fiber),
        (32, 64, 64)
    );
    assert_eq!(cfg.verify.triples, 5);
    assert!(matches!(cfg.system, SystemSpec::Catalog(ref s) if s == "SYS-E"));
    assert_eq!(RunConfig::for_system("SYS-E").grids.radial, 32);
}

#[test]
fn inline_conformal_system_builds() {
    let cfg = from_json(
        r#"{"system": {"dim": 2, "metric": {"conformal": "exp(2*0.05*(x1^2+x2^2))"},
            "alpha": ["-0.1*x2", "0.1*x1"], "potential": "0.05*(x1^2+x2^2)"}}"#,
    )
    .unwrap();
    let sys = cfg.build_system().unwrap();
    assert_eq!(sys.dim, 2);
    assert_eq!(sys.radius, 1.0);
    assert_eq!(sys.energy, 0.5);
    assert!((sys.max_potential().unwrap() - 0.05).abs() < 1e-3);
}

#[test]
fn bad_expression_reports_its_pointer() {
    let cfg = from_json(r#"{"system": {"dim": 2, "metric": {"conformal": "1 + x1 *"}}}"#).unwrap();
    match cfg.build_system() {
        Err(CliError::Config { pointer, .. }) => assert_eq!(pointer, "/system/metric/conformal"),
        other => panic!("unexpected {other:?}"),
    }
    let cfg = from_json(
        r#"{"system": "SYS-E", "transform": {"triple": {"h": [["1","0"],["0","sin("]], "beta": ["0","0"], "v": "0"}}}"#,
    )
    .unwrap();
    match cfg.build_triple(2) {
        Err(CliError::Config { pointer, .. }) => assert_eq!(pointer, "/transform/triple/h/1/1"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn unknown_keys_are_rejected() {
    assert_eq!(
        config_pointer(r#"{"system": "SYS-E", "grids": {"radials": 4}}"#),
        "/grids/radials"
    );
    assert_eq!(
        config_pointer(r#"{"system": "SYS-E", "colour": 1}"#),
        "/colour"
    );
}

#[test]
fn invalid_grids_and_tolerances_are_rejected() {
    assert_eq!(
        config_pointer(r#"{"system": "SYS-E", "grids": {"fan_positions": 4}}"#),
        "/grids/fan_positions"
    );
    assert_eq!(
        config_pointer(r#"{"system": "SYS-E", "grids": {"fiber": 0}}"#),
        "/grids/fiber"
    );
    assert!(from_json(r#"{"system": "SYS-E", "integrator": {"rtol": 0.5}}"#).is_err());
    assert!(from_json(r#"{"system": "SYS-E", "integrator": {"atol": -1}}"#).is_err());
}

#[test]
fn help_lists_every_flag_and_subcommand() {
    let out = mpray(&["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for word in [
        "--config",
        "--out",
        "--seed",
        "--threads",
        "--deterministic",
        "verify",
        "integrate",
        "transform",
        "action",
        "santalo",
        "curvature",
    ] {
        assert!(text.contains(word), "help is missing {word}:\n{text}");
    }
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(mpray(&["verify"]).status.code(), Some(EXIT_USAGE));
    assert_eq!(mpray(&["bogus"]).status.code(), Some(EXIT_USAGE));
    let missing = dir.path().join("missing.json");
    assert_eq!(
        mpray(&["verify", "--config", missing.to_str().unwrap()])
            .status
            .code(),
        Some(EXIT_USAGE)
    );
    let cfg = write_config(dir.path(), r#"{"system": "SYS-E", "grid": {}}"#);
    let out = mpray(&["verify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(EXIT_USAGE));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`/grid`"));
}

#[test]
fn non_positive_definite_metric_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"system": {"dim": 2, "metric": {"full": [["1", "0"], ["0", "x1"]]}}}"#,
    );
    let out = mpray(&["integrate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(EXIT_USAGE));
    assert!(!out.stderr.is_empty());
}

#[test]
fn trapped_ray_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"system": "SYS-E", "integrator": {"t_max": 0.5}}"#,
    );
    let out = mpray(&["integrate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(EXIT_NUMERICAL));
}

#[test]
fn failed_check_exits_with_one() {
    // One radial and one fiber node are far too coarse for the Santalo check.
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"system": "SYS-E",
            "grids": {"radial": 1, "angular": 2, "fiber": 1, "santalo_positions": 8, "santalo_directions": 8},
            "verify": {"triples": 1, "rays": 2, "interior_points": 2, "pairs": 1, "perturbations": 1, "gauge_angles": 3}}"#,
    );
    let out_dir = dir.path().join("out");
    let out = mpray(&[
        "verify",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(EXIT_CHECK_FAILED));
    let record: Value =
        serde_json::from_slice(&std::fs::read(out_dir.join("record.json")).unwrap()).unwrap();
    assert_eq!(record["pass"], Value::Bool(false));
}

fn verify_summary(dir: &Path, seed: &str) -> Vec<(String, bool)> {
    let cfg = write_config(dir, r#"{"system": "SYS-B(0.2)"}"#);
    let out_dir = dir.join(format!("out-{seed}"));
    let out = mpray(&[
        "verify",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--seed",
        seed,
        "--threads",
        "2",
    ]);
    assert_eq!(
        out.status.code(),
        Some(EXIT_OK),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let record: Value =
        serde_json::from_slice(&std::fs::read(out_dir.join("record.json")).unwrap()).unwrap();
    assert_eq!(record["config"]["seed"].as_u64().unwrap().to_string(), seed);
    assert!(record["wall_time_seconds"].is_number());
    record["checks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| {
            (
                c["name"].as_str().unwrap().to_string(),
                c["pass"].as_bool().unwrap(),
            )
        })
        .collect()
}

#[test]
fn verdicts_do_not_depend_on_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = verify_summary(dir.path(), "42");
    let b = verify_summary(dir.path(), "7");
    assert_eq!(a, b);
    assert!(a.iter().all(|(_, pass)| *pass));
    assert_eq!(a.len(), 11);
}

const SMOKE_CONFIG: &str = r#"{
  "system": "SYS-E",
  "grids": {"fan_positions": 8, "fan_directions": 8, "radial": 8, "angular": 16, "fiber": 16,
            "santalo_positions": 16, "santalo_directions": 16,
            "curvature_positions": 8, "curvature_directions": 8},
  "integrate": {"x": [-1.0, 0.0], "direction": [1.0, 0.5]},
  "transform": {"triple": {"h": [["1 + x1^2", "0"], ["0", "1"]], "beta": ["x2", "0"], "v": "0.5"}},
  "action": {"count": 6}
}"#;

/// Compare against `tests/golden/NAME`; set `MPRAY_UPDATE_GOLDEN=1` to rewrite.
fn check_golden(name: &str, bytes: &[u8]) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name);
    if std::env::var_os("MPRAY_UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, bytes).unwrap();
        return;
    }
    let expected = std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert!(expected == bytes, "{name} differs from its golden file");
}

#[test]
fn smoke_outputs_match_golden_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMOKE_CONFIG);
    let cfg = cfg.to_str().unwrap();
    for (command, artifact) in [
        ("integrate", "trajectory.csv"),
        ("transform", "sinogram.csv"),
        ("action", "action_table.csv"),
        ("santalo", "santalo.json"),
        ("curvature", "curvature.json"),
    ] {
        let out_dir = dir.path().join(command);
        let out = mpray(&[
            command,
            "--config",
            cfg,
            "--out",
            out_dir.to_str().unwrap(),
            "--deterministic",
        ]);
        assert_eq!(
            out.status.code(),
            Some(EXIT_OK),
            "{command}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        check_golden(artifact, &std::fs::read(out_dir.join(artifact)).unwrap());
        check_golden(
            &format!("{command}_record.json"),
            &std::fs::read(out_dir.join("record.json")).unwrap(),
        );

        // Without --out the artifact goes to stdout unchanged.
        let out = mpray(&[command, "--config", cfg, "--deterministic"]);
        assert_eq!(out.stdout, std::fs::read(out_dir.join(artifact)).unwrap());
    }
}

#[test]
fn smoke_outputs_are_sensible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMOKE_CONFIG);
    let out = mpray(&["santalo", "--config", cfg.to_str().unwrap()]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let lhs = v["lhs"].as_f64().unwrap();
    assert!((lhs / (2.0 * std::f64::consts::PI.powi(2)) - 1.0).abs() < 5e-3);
    assert!(v["relative_gap"].as_f64().unwrap() < 5e-3);

    let out = mpray(&["curvature", "--config", cfg.to_str().unwrap()]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["value"].as_f64(), Some(0.0));
    assert_eq!(v["verdict"], Value::Bool(true));

    let out = mpray(&["action", "--config", cfg.to_str().unwrap()]);
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(csv.starts_with("theta,"));
    assert_eq!(csv.lines().count(), 7);
}
