use std::path::Path;
use std::process::{Command, Output};

use delay_hopf_cli::output::num;
use proptest::prelude::*;

const HUTCHINSON: &str = "\
model.lambda = 1.0
model.alpha = 0.0
model.tau = 2.0
domain.n_cells = 32
domain.bc = noflux
hopf.n_max = 1
simulate.t_end = 40
simulate.observe_every = 50
";

const DIRICHLET: &str = "\
model.lambda = 1.05
model.alpha = 0.0
domain.n_cells = 100
domain.bc = dirichlet
hopf.n_max = 2
sweep.offsets = 0.04, 0.01, 0.02, 0.08, 0.005
";

fn run(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_delay-hopf"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn table(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn column<'a>(header: &[String], row: &'a [String], name: &str) -> &'a str {
    &row[header.iter().position(|h| h == name).unwrap()]
}

#[test]
fn hopf_on_hutchinson_reproduces_the_scalar_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), HUTCHINSON, &["hopf"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (h, rows) = table(&dir.path().join("out/hopf.csv"));
    assert_eq!(h.len(), 11);
    let f = |name: &str| column(&h, &rows[0], name).parse::<f64>().unwrap();
    assert_eq!(f("lambda"), 1.0);
    assert!((f("nu") - 1.0).abs() < 1e-8);
    assert!((f("theta") - std::f64::consts::FRAC_PI_2).abs() < 1e-8);
    assert!((f("tau_n") - std::f64::consts::FRAC_PI_2).abs() < 1e-8);
    assert_eq!(column(&h, &rows[0], "verdict_at_tau"), "unstable(2)");
    assert_eq!(rows.len(), 2);
}

#[test]
fn normal_form_reports_forward_stable_orbits() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), DIRICHLET, &["normal-form"]);
    assert!(out.status.success());
    let (h, rows) = table(&dir.path().join("out/normalform.csv"));
    assert_eq!(rows.len(), 3);
    for row in &rows {
        assert_eq!(column(&h, row, "direction"), "forward");
        assert_eq!(column(&h, row, "stability"), "stable");
        assert!(column(&h, row, "Re_C1").parse::<f64>().unwrap() < 0.0);
    }
}

#[test]
fn sweep_rows_are_sorted_and_thread_independent() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(run(a.path(), DIRICHLET, &["sweep", "--threads", "1"]).status.success());
    assert!(run(b.path(), DIRICHLET, &["sweep", "--threads", "3", "--plot"]).status.success());
    for name in ["hopf.csv", "normalform.csv"] {
        let x = std::fs::read(a.path().join("out").join(name)).unwrap();
        let y = std::fs::read(b.path().join("out").join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
    let (h, rows) = table(&a.path().join("out/hopf.csv"));
    let keys: Vec<(f64, usize)> = rows
        .iter()
        .map(|r| (column(&h, r, "lambda").parse().unwrap(), column(&h, r, "n").parse().unwrap()))
        .collect();
    assert_eq!(keys.len(), 15);
    assert!(keys.windows(2).all(|w| w[0] < w[1]));
    for svg in ["tau_vs_lambda.svg", "c1_vs_lambda.svg"] {
        let text = std::fs::read_to_string(b.path().join("out").join(svg)).unwrap();
        assert_eq!(text.matches("<polyline").count(), 3);
    }
}

#[test]
fn simulate_writes_trajectory_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), HUTCHINSON, &["simulate", "--plot"]);
    assert!(out.status.success());
    let (h, rows) = table(&dir.path().join("out/sim.csv"));
    assert_eq!(h, ["t", "observable"]);
    // tau = 2 with 40 steps per delay: dt = 0.05, 800 steps to t = 40.
    assert_eq!(rows.len(), 801);
    let (h, snaps) = table(&dir.path().join("out/snapshots.csv"));
    assert_eq!(h, ["t", "x", "v"]);
    assert_eq!(snaps.len(), (800 / 50 + 1) * 33);
    assert!(dir.path().join("out/observable.svg").exists());
    assert!(String::from_utf8_lossy(&out.stdout).contains("verdict"));
}

#[test]
fn eigen_and_steady_tables() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(dir.path(), DIRICHLET, &["eigen"]).status.success());
    assert!(run(dir.path(), DIRICHLET, &["steady"]).status.success());
    let (h, rows) = table(&dir.path().join("out/eigen.csv"));
    assert_eq!(h, ["lambda_star", "lambda_2", "rayleigh_residual"]);
    let ls: f64 = rows[0][0].parse().unwrap();
    assert!((ls - 1.0).abs() < 1e-3);
    let (h, rows) = table(&dir.path().join("out/steady.csv"));
    assert_eq!(h, ["lambda", "beta", "expansion_error", "newton_iters", "residual"]);
    assert!(rows[0][4].parse::<f64>().unwrap() <= 1e-10);
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for bad in [
        "model.lambda = 1\nmodel.colour = red\n",
        "model.lambda = 1\nmodel.d = 1\nmodel.a = 0\nmodel.r = 1\n",
        // lambda below the principal eigenvalue.
        "model.lambda = 0.5\nmodel.alpha = 0\ndomain.bc = dirichlet\n",
    ] {
        let out = run(dir.path(), bad, &["steady"]);
        assert_eq!(out.status.code(), Some(2), "{bad}");
        assert!(!out.stderr.is_empty());
    }
    let out = Command::new(env!("CARGO_BIN_EXE_delay-hopf")).arg("hopf").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn raw_parameters_match_transformed_ones() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let raw = "model.d = 0.25\nmodel.a = 0.125\nmodel.r = 4\ndomain.n_cells = 50\nprofile.kind = cosine\nprofile.a0 = 0.3\n";
    let transformed =
        "model.lambda = 4\nmodel.alpha = 0.5\nmodel.tau = 1\ndomain.n_cells = 50\nprofile.kind = cosine\nprofile.a0 = 0.3\n";
    assert!(run(a.path(), raw, &["hopf"]).status.success());
    assert!(run(b.path(), transformed, &["hopf"]).status.success());
    assert_eq!(
        std::fs::read(a.path().join("out/hopf.csv")).unwrap(),
        std::fs::read(b.path().join("out/hopf.csv")).unwrap()
    );
}

#[test]
fn validate_prints_a_twelve_row_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_delay-hopf"))
        .args(["validate", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    let (h, rows) = table(&dir.path().join("validate.csv"));
    assert_eq!(h, ["check", "measured", "limit", "status"]);
    assert_eq!(rows.len(), 12);
    let all_pass = rows.iter().all(|r| r[3] == "pass");
    assert_eq!(out.status.code(), Some(if all_pass { 0 } else { 4 }));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("checks passed"));
}

proptest! {
    #[test]
    fn csv_numbers_round_trip(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        let s = num(x);
        prop_assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits());
        prop_assert!(!s.contains(',') && !s.contains('\n'));
    }
}
