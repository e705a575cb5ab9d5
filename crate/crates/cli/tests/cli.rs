//! Drives the `netuq` binary end to end.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn netuq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netuq"))
        .args(args)
        .env_remove("NETUQ_THREADS")
        .output()
        .expect("binary runs")
}

fn path_arg(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn composite_tables_are_bit_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    for out in [&first, &second] {
        let status = netuq(&[
            "composite",
            "--n-max",
            "3",
            "--reference-degree",
            "5",
            "--output",
            path_arg(out),
        ]);
        assert!(status.status.success(), "{status:?}");
    }
    let a = fs::read(first.join("composite.csv")).unwrap();
    let b = fs::read(second.join("composite.csv")).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("N,P1,Q1,Pp1,R,err_full,err_reduced,orth_err")
    );
    assert!(lines.next().unwrap().starts_with("1,5,16,3,5,"));
    assert_eq!(lines.count(), 2);
}

#[test]
fn heat_network_writes_table_monte_carlo_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("heat");
    let result = netuq(&[
        "heat-network",
        "--s-max",
        "2",
        "--mc-samples",
        "50",
        "--seed",
        "3",
        "--output",
        path_arg(&out),
    ]);
    assert!(result.status.success(), "{result:?}");
    let table = read(&out.join("heat_network.csv"));
    assert!(table.starts_with("s,P1,Q1,Pp1,R,solves_c1,solves_c2,time_c1,time_c2\n2,10,16,"));
    let mc = read(&out.join("heat_network_mc.csv"));
    assert!(mc.starts_with("s,samples,seed,mc_mean,"));
    let manifest: serde_json::Value =
        serde_json::from_str(&read(&out.join("manifest.json"))).unwrap();
    assert_eq!(manifest["config"]["problem"], "heat-network");
    assert_eq!(manifest["config"]["seed"], 3);
    assert_eq!(manifest["files"].as_array().unwrap().len(), 2);
}

#[test]
fn flags_override_the_configuration_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.conf");
    let out = dir.path().join("out");
    fs::write(
        &config,
        format!(
            "# composite sweep\nproblem = composite\nn_max = 3\nreference_degree = 4\nformat = csv\noutput = {}\n",
            out.display()
        ),
    )
    .unwrap();
    let result = netuq(&["run", "--config", path_arg(&config), "--format", "json"]);
    assert!(result.status.success(), "{result:?}");
    let rows: serde_json::Value = serde_json::from_str(&read(&out.join("composite.json"))).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 3);
    assert_eq!(rows[2]["N"], 3);

    let result = netuq(&["composite", "--config", path_arg(&config), "--n-max", "1"]);
    assert!(result.status.success(), "{result:?}");
    let text = read(&out.join("composite.csv"));
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn configuration_errors_exit_with_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let bad_range = netuq(&["composite", "--n-max", "9", "--output", path_arg(&out)]);
    assert_eq!(bad_range.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad_range.stderr).contains("n_max"));

    let config = dir.path().join("bad.conf");
    fs::write(&config, "problem = composite\nwidth = 3\n").unwrap();
    let unknown_key = netuq(&["run", "--config", path_arg(&config)]);
    assert_eq!(unknown_key.status.code(), Some(1));

    let missing = netuq(&["run", "--config", path_arg(&dir.path().join("absent.conf"))]);
    assert_eq!(missing.status.code(), Some(1));

    let threads = Command::new(env!("CARGO_BIN_EXE_netuq"))
        .args(["composite", "--n-max", "1", "--output", path_arg(&out)])
        .env("NETUQ_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(threads.status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn solver_failures_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    // a tolerance below the roundoff floor cannot be met
    let result = netuq(&[
        "heat-network",
        "--s-max",
        "2",
        "--newton-tol",
        "1e-30",
        "--output",
        path_arg(&out),
    ]);
    assert_eq!(result.status.code(), Some(2), "{result:?}");
}
