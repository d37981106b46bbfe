//! End-to-end checks of the command-line surface: exit codes, output
//! layout, reproducibility, and the scenario file round trip.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn netkin(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netkin"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn assert_code(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn validate_accepts_the_vendored_network_and_rejects_garbage() {
    let dir = tempfile::tempdir().unwrap();
    let vendored = concat!(env!("CARGO_MANIFEST_DIR"), "/data/lombardy_mobility.txt");
    let out = netkin(&["validate", "--matrix", vendored], dir.path());
    assert_code(&out, 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("ok=true"), "{stdout}");
    assert!(stdout.contains("irreducible=true"), "{stdout}");

    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "0.5 0.2\n0.4 0.2\n").unwrap();
    let out = netkin(&["validate", "--matrix", bad.to_str().unwrap()], dir.path());
    assert_code(&out, 1);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.starts_with("error=validation"), "{stderr}");

    // Row-stochastic orientation transposes on load.
    let rowwise = dir.path().join("rows.txt");
    fs::write(&rowwise, "0.9, 0.1\n0.3, 0.7\n").unwrap();
    let out = netkin(
        &["validate", "--matrix", rowwise.to_str().unwrap(), "--row-stochastic"],
        dir.path(),
    );
    assert_code(&out, 0);
}

#[test]
fn stationary_prints_the_fixed_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = netkin(&["stationary", "--preset", "test1_uncontrolled"], dir.path());
    assert_code(&out, 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    let first: f64 = stdout
        .lines()
        .nth(1)
        .and_then(|l| l.split(',').nth(1))
        .and_then(|v| v.parse().ok())
        .unwrap();
    assert!((first - 0.24359068537427908).abs() < 1e-9, "{stdout}");
}

#[test]
fn simulate_writes_byte_identical_outputs_and_a_manifest() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    for dir in [dir_a.path(), dir_b.path()] {
        let out = netkin(
            &["simulate", "--preset", "test2_full_control", "--out", dir.to_str().unwrap(), "--quiet"],
            dir,
        );
        assert_code(&out, 0);
    }
    let csv_a = fs::read(dir_a.path().join("test2_full_control_trajectory.csv")).unwrap();
    let csv_b = fs::read(dir_b.path().join("test2_full_control_trajectory.csv")).unwrap();
    assert_eq!(csv_a, csv_b, "trajectory CSVs must be byte-identical");

    let manifest =
        fs::read_to_string(dir_a.path().join("test2_full_control_manifest.txt")).unwrap();
    assert!(manifest.contains("version = "));
    assert!(manifest.contains("scenario = test2_full_control"));
    assert!(manifest.contains("output = "));
    assert!(manifest.contains("[model]"), "manifest embeds the resolved scenario");
    // No stray temporary files.
    for entry in fs::read_dir(dir_a.path()).unwrap() {
        let name = entry.unwrap().file_name();
        assert!(!name.to_string_lossy().ends_with(".tmp"), "{name:?}");
    }
}

#[test]
fn failed_runs_leave_no_manifest() {
    let dir = tempfile::tempdir().unwrap();
    // dt far beyond the Monte Carlo guard: a runtime failure (exit 2).
    let out = netkin(
        &[
            "simulate-mc",
            "--preset",
            "test1_uncontrolled",
            "--agents",
            "100",
            "--dt",
            "0.5",
            "--out",
            dir.path().to_str().unwrap(),
        ],
        dir.path(),
    );
    assert_code(&out, 2);
    assert!(
        !dir.path().join("test1_uncontrolled_manifest.txt").exists(),
        "failed run must not write a manifest"
    );
}

#[test]
fn seeded_particle_runs_reproduce() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    for dir in [dir_a.path(), dir_b.path()] {
        let out = netkin(
            &[
                "simulate-mc",
                "--preset",
                "test2_uncontrolled",
                "--agents",
                "5000",
                "--seed",
                "7",
                "--t-end",
                "5",
                "--out",
                dir.to_str().unwrap(),
                "--quiet",
            ],
            dir,
        );
        assert_code(&out, 0);
    }
    let a = fs::read(dir_a.path().join("test2_uncontrolled_mc.csv")).unwrap();
    let b = fs::read(dir_b.path().join("test2_uncontrolled_mc.csv")).unwrap();
    assert_eq!(a, b);
    // Standard-error columns are present.
    let header = String::from_utf8_lossy(&a).lines().next().unwrap().to_string();
    assert!(header.contains("rho_se_1") && header.contains("mom_se_5"), "{header}");
}

#[test]
fn replicas_fan_out_with_distinct_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = netkin(
        &[
            "simulate-mc",
            "--preset",
            "test1_uncontrolled",
            "--agents",
            "2000",
            "--seed",
            "3",
            "--t-end",
            "2",
            "--replicas",
            "3",
            "--workers",
            "3",
            "--out",
            dir.path().to_str().unwrap(),
            "--quiet",
        ],
        dir.path(),
    );
    assert_code(&out, 0);
    let r0 = fs::read(dir.path().join("test1_uncontrolled_mc_r0.csv")).unwrap();
    let r1 = fs::read(dir.path().join("test1_uncontrolled_mc_r1.csv")).unwrap();
    let r2 = fs::read(dir.path().join("test1_uncontrolled_mc_r2.csv")).unwrap();
    assert_ne!(r0, r1);
    assert_ne!(r1, r2);
}

#[test]
fn r0_reports_the_bracket_over_time_and_asymptotically() {
    let dir = tempfile::tempdir().unwrap();
    let out = netkin(
        &["r0", "--preset", "test2_uncontrolled", "--out", dir.path().to_str().unwrap(), "--quiet"],
        dir.path(),
    );
    assert_code(&out, 0);
    let csv = fs::read_to_string(dir.path().join("test2_uncontrolled_r0.csv")).unwrap();
    let last = csv.lines().last().unwrap();
    assert!(last.starts_with("asymptotic,"), "{last}");
    let upper: f64 = last.split(',').nth(2).unwrap().parse().unwrap();
    assert!(upper > 1.0, "uncontrolled upper bound {upper}");

    let out = netkin(
        &["r0", "--preset", "test2_full_control", "--out", dir.path().to_str().unwrap(), "--quiet"],
        dir.path(),
    );
    assert_code(&out, 0);
    let csv = fs::read_to_string(dir.path().join("test2_full_control_r0.csv")).unwrap();
    let last = csv.lines().last().unwrap();
    let lower: f64 = last.split(',').nth(1).unwrap().parse().unwrap();
    let upper: f64 = last.split(',').nth(2).unwrap().parse().unwrap();
    assert!(lower < 1.0 && upper < 1.0, "controlled bracket [{lower}, {upper}]");

    // The analysis rejects exchange-model scenarios.
    let out = netkin(&["r0", "--preset", "test1_uncontrolled"], dir.path());
    assert_code(&out, 1);
}

#[test]
fn compare_global_local_reports_the_decomposition() {
    let dir = tempfile::tempdir().unwrap();
    let out = netkin(
        &[
            "compare-global-local",
            "--preset",
            "test1_uncontrolled",
            "--out",
            dir.path().to_str().unwrap(),
            "--quiet",
        ],
        dir.path(),
    );
    assert_code(&out, 0);
    let csv = fs::read_to_string(dir.path().join("test1_uncontrolled_compare.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("t,u_global,utilde_1"));
    for line in csv.lines().skip(1) {
        let residual: f64 = line.split(',').last().unwrap().parse().unwrap();
        assert!(residual < 1e-13, "{line}");
    }
    // Single-node graph: the global control equals the lone targeted one.
    let scenario = dir.path().join("single.toml");
    fs::write(
        &scenario,
        r#"
name = "single"

[model]
variant = "exchange"
nu1 = [0.2]
nu2 = [0.9]
chi = 0.0
mu = 1.0

[matrix]
inline = [[1.0]]

[initial]
rho = [1.0]
m = [2.0]

[integration]
dt = 0.01
t_end = 1.0
record_every = 10
"#,
    )
    .unwrap();
    let out = netkin(
        &[
            "compare-global-local",
            "--scenario",
            scenario.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
            "--quiet",
        ],
        dir.path(),
    );
    assert_code(&out, 0);
    let csv = fs::read_to_string(dir.path().join("single_compare.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let mut fields = line.split(',');
        let u: f64 = fields.nth(1).unwrap().parse().unwrap();
        let ut: f64 = fields.next().unwrap().parse().unwrap();
        assert!((u - ut).abs() < 1e-15, "{line}");
    }
}

#[test]
fn scenario_files_load_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    // Round-trip a preset through a file, with the matrix externalized.
    let matrix = dir.path().join("net.csv");
    let mut rows = String::new();
    for row in netkin::scenario::five_node::P_ROWS {
        rows.push_str(&row.map(|v| v.to_string()).join(","));
        rows.push('\n');
    }
    fs::write(&matrix, rows).unwrap();
    let scenario = dir.path().join("run.toml");
    fs::write(
        &scenario,
        r#"
name = "file_run"

[model]
variant = "exchange"
nu1 = [0.25, 0.5, 0.15, 0.2, 0.75]
nu2 = [0.8, 0.5, 0.75, 0.1, 0.6]
chi = 1.0
mu = 1.0

[matrix]
file = "net.csv"

[initial]
rho = [3500, 1000, 3000, 500, 2000]
m = [2.0, 4.0, 0.1, 1.0, 1.5]
"#,
    )
    .unwrap();
    let out = netkin(
        &[
            "simulate",
            "--scenario",
            scenario.to_str().unwrap(),
            "--t-end",
            "5",
            "--out",
            dir.path().to_str().unwrap(),
            "--quiet",
        ],
        dir.path(),
    );
    assert_code(&out, 0);
    let manifest = fs::read_to_string(dir.path().join("file_run_manifest.txt")).unwrap();
    assert!(manifest.contains("normalized to fractions"), "population counts get normalized");

    // Unknown preset and missing scenario are validation failures.
    assert_code(&netkin(&["simulate", "--preset", "nope"], dir.path()), 1);
    assert_code(&netkin(&["simulate"], dir.path()), 1);
}
