use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use delay_hopf::dde_sim::{diagnose, simulate, History, SimConfig, Trajectory};
use delay_hopf::domain::{assemble, make_grid, DiscreteProblem};
use delay_hopf::eigen::{principal_eigenpair, rayleigh_identity_residual, second_eigenvalue, PrincipalPair};
use delay_hopf::hopf::{hopf_points, stability_verdict, HopfPoint};
use delay_hopf::normalform::{normal_form, NormalFormResult};
use delay_hopf::steady::{steady_state, SteadyState};
use rayon::prelude::*;

use crate::config::{RunConfig, SimDelay, SimHorizon, SweepGrid};
use crate::error::{CliError, CliResult};
use crate::output::{line_plot, num, write_file, Csv, Series};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Eigen,
    Steady,
    Hopf,
    NormalForm,
    Simulate,
    Sweep,
    Validate,
}

#[derive(Debug, Clone)]
pub struct Options {
    pub out: PathBuf,
    pub plot: bool,
}

/// Text for stdout plus any failed validation checks.
#[derive(Debug, Default)]
pub struct Report {
    pub text: String,
    pub violations: Vec<String>,
}

pub const HOPF_HEADER: &[&str] = &[
    "lambda", "nu", "theta", "h", "n", "tau_n", "Re_S_n", "Im_S_n", "Re_dmu", "Im_dmu", "verdict_at_tau",
];

pub const NORMALFORM_HEADER: &[&str] = &[
    "lambda", "n", "Re_g20", "Im_g20", "Re_g11", "Im_g11", "Re_g02", "Im_g02", "Re_g21", "Im_g21", "Re_C1",
    "Im_C1", "direction", "stability",
];

pub fn build_problem(cfg: &RunConfig) -> CliResult<DiscreteProblem> {
    let grid = make_grid(cfg.domain.length, cfg.domain.n_cells, cfg.domain.bc).map_err(CliError::core("domain"))?;
    assemble(&grid, &cfg.profile, cfg.model.alpha).map_err(CliError::core("domain"))
}

pub fn principal(problem: &DiscreteProblem) -> CliResult<PrincipalPair> {
    principal_eigenpair(problem).map_err(CliError::core("eigen"))
}

pub fn steady(problem: &DiscreteProblem, pair: &PrincipalPair, lambda: f64) -> CliResult<SteadyState> {
    steady_state(problem, pair, lambda).map_err(CliError::core("steady"))
}

pub fn ladder(
    problem: &DiscreteProblem,
    pair: &PrincipalPair,
    state: &SteadyState,
    n_max: usize,
) -> CliResult<Vec<HopfPoint>> {
    hopf_points(problem, pair, state, n_max).map_err(CliError::core("hopf"))
}

pub fn forms(
    problem: &DiscreteProblem,
    pair: &PrincipalPair,
    state: &SteadyState,
    ladder: &[HopfPoint],
) -> CliResult<Vec<NormalFormResult>> {
    ladder
        .iter()
        .map(|p| normal_form(problem, pair, state, p).map_err(CliError::core("normalform")))
        .collect()
}

pub fn hopf_row(lambda: f64, point: &HopfPoint, verdict: &str) -> Vec<String> {
    let t = &point.triplet;
    let s = point.s_n.unwrap_or_default();
    let d = point.dmu_dtau.unwrap_or_default();
    vec![
        num(lambda),
        num(t.nu),
        num(t.theta),
        num(t.h),
        point.n.to_string(),
        num(point.tau_n),
        num(s.re),
        num(s.im),
        num(d.re),
        num(d.im),
        verdict.to_string(),
    ]
}

pub fn normalform_row(lambda: f64, n: usize, nf: &NormalFormResult) -> Vec<String> {
    let mut row = vec![num(lambda), n.to_string()];
    for c in [nf.g20, nf.g11, nf.g02, nf.g21, nf.c1] {
        row.push(num(c.re));
        row.push(num(c.im));
    }
    row.push(nf.direction.to_string());
    row.push(nf.orbit_stability.to_string());
    row
}

fn verdict_at(tau: Option<f64>, ladder: &[HopfPoint]) -> String {
    tau.map_or_else(|| "na".to_string(), |t| stability_verdict(t, ladder).to_string())
}

pub fn sim_csv(traj: &Trajectory) -> Csv {
    let mut c = Csv::new(&["t", "observable"]);
    for (t, o) in traj.times.iter().zip(&traj.observable) {
        c.push(vec![num(*t), num(*o)]);
    }
    c
}

pub fn snapshots_csv(problem: &DiscreteProblem, traj: &Trajectory) -> Csv {
    let mut c = Csv::new(&["t", "x", "v"]);
    for (t, snap) in traj.snapshot_times.iter().zip(&traj.snapshots) {
        for (x, v) in problem.grid.nodes.iter().zip(problem.grid.to_nodes(snap)) {
            c.push(vec![num(*t), num(*x), num(v)]);
        }
    }
    c
}

pub fn observable_plot(traj: &Trajectory, title: &str) -> String {
    let stride = traj.times.len().div_ceil(2000).max(1);
    let series = Series {
        label: "observable".into(),
        points: traj
            .times
            .iter()
            .zip(&traj.observable)
            .step_by(stride)
            .map(|(t, o)| (*t, *o))
            .collect(),
    };
    line_plot(title, "t", "<phi, v - u>", &[series])
}

pub fn run(cmd: Command, cfg: Option<&RunConfig>, opts: &Options) -> CliResult<Report> {
    if cmd == Command::Validate {
        return crate::validate::run(&opts.out, opts.plot);
    }
    let cfg = cfg.ok_or_else(|| CliError::Config("--config is required for this command".into()))?;
    let out = opts.out.as_path();
    match cmd {
        Command::Eigen => eigen(cfg, out),
        Command::Steady => steady_cmd(cfg, out),
        Command::Hopf => hopf(cfg, out),
        Command::NormalForm => normal_form_cmd(cfg, out),
        Command::Simulate => simulate_cmd(cfg, out, opts.plot),
        Command::Sweep => sweep(cfg, out, opts.plot),
        Command::Validate => unreachable!(),
    }
}

fn eigen(cfg: &RunConfig, out: &Path) -> CliResult<Report> {
    let p = build_problem(cfg)?;
    let pair = principal(&p)?;
    let l2 = second_eigenvalue(&p, &pair).map_err(CliError::core("eigen"))?;
    let res = rayleigh_identity_residual(&p, &pair);
    let mut c = Csv::new(&["lambda_star", "lambda_2", "rayleigh_residual"]);
    c.push(vec![num(pair.lambda_star), num(l2), num(res)]);
    c.write(out, "eigen.csv")?;
    Ok(Report {
        text: format!("lambda_* = {} ({:?}), lambda_2 = {l2}\n", pair.lambda_star, pair.case_tag),
        ..Report::default()
    })
}

fn steady_cmd(cfg: &RunConfig, out: &Path) -> CliResult<Report> {
    let p = build_problem(cfg)?;
    let pair = principal(&p)?;
    let s = steady(&p, &pair, cfg.lambda()?)?;
    let mut c = Csv::new(&["lambda", "beta", "expansion_error", "newton_iters", "residual"]);
    c.push(vec![
        num(s.lambda),
        num(s.beta.unwrap_or(f64::NAN)),
        num(s.expansion_error.unwrap_or(f64::NAN)),
        s.newton_iters.to_string(),
        num(s.newton_residual),
    ]);
    c.write(out, "steady.csv")?;
    Ok(Report {
        text: format!(
            "steady state at lambda = {}: {} Newton iterations, residual {:e}\n",
            s.lambda, s.newton_iters, s.newton_residual
        ),
        ..Report::default()
    })
}

fn hopf(cfg: &RunConfig, out: &Path) -> CliResult<Report> {
    let p = build_problem(cfg)?;
    let pair = principal(&p)?;
    let lambda = cfg.lambda()?;
    let s = steady(&p, &pair, lambda)?;
    let lad = ladder(&p, &pair, &s, cfg.n_max)?;
    let verdict = verdict_at(cfg.model.tau, &lad);
    let mut c = Csv::new(HOPF_HEADER);
    let mut text = String::new();
    for point in &lad {
        c.push(hopf_row(lambda, point, &verdict));
        let _ = writeln!(text, "tau_{} = {}", point.n, point.tau_n);
    }
    c.write(out, "hopf.csv")?;
    Ok(Report { text, ..Report::default() })
}

fn normal_form_cmd(cfg: &RunConfig, out: &Path) -> CliResult<Report> {
    let p = build_problem(cfg)?;
    let pair = principal(&p)?;
    let lambda = cfg.lambda()?;
    let s = steady(&p, &pair, lambda)?;
    let lad = ladder(&p, &pair, &s, cfg.n_max)?;
    let nfs = forms(&p, &pair, &s, &lad)?;
    let mut c = Csv::new(NORMALFORM_HEADER);
    let mut text = String::new();
    for (point, nf) in lad.iter().zip(&nfs) {
        c.push(normalform_row(lambda, point.n, nf));
        let _ = writeln!(
            text,
            "n = {}: C1 = {}, {} / {}",
            point.n, nf.c1, nf.direction, nf.orbit_stability
        );
    }
    c.write(out, "normalform.csv")?;
    Ok(Report { text, ..Report::default() })
}

fn simulate_cmd(cfg: &RunConfig, out: &Path, plot: bool) -> CliResult<Report> {
    let p = build_problem(cfg)?;
    let pair = principal(&p)?;
    let lambda = cfg.lambda()?;
    let s = steady(&p, &pair, lambda)?;
    let lad = ladder(&p, &pair, &s, 0).ok();
    let tau = match cfg.sim.delay {
        Some(SimDelay::Absolute(t)) => t,
        Some(SimDelay::Factor(f)) => {
            let lad = lad
                .as_ref()
                .ok_or_else(|| CliError::Config("simulate.tau_factor needs a computable tau_0".into()))?;
            f * lad[0].tau_n
        }
        None => return Err(CliError::Config("simulate needs model.tau or simulate.tau_factor".into())),
    };
    let t_end = match cfg.sim.horizon {
        SimHorizon::Absolute(t) => t,
        SimHorizon::Delays(k) if tau > 0.0 => k * tau,
        SimHorizon::Delays(_) => {
            return Err(CliError::Config("simulate.t_end_delays needs tau > 0; set simulate.t_end".into()))
        }
    };
    let sc = SimConfig {
        problem: &p,
        steady: &s.u,
        direction: &pair.phi,
        lambda,
        tau,
        t_end,
        steps_per_delay: cfg.sim.steps_per_delay,
        history: History::SteadyPlusBump {
            epsilon: cfg.sim.epsilon,
            shape: cfg.sim.bump.clone(),
        },
        observe_every: cfg.sim.observe_every,
    };
    let traj = simulate(&sc).map_err(CliError::core("dde_sim"))?;
    sim_csv(&traj).write(out, "sim.csv")?;
    snapshots_csv(&p, &traj).write(out, "snapshots.csv")?;
    if plot {
        write_file(out, "observable.svg", &observable_plot(&traj, &format!("tau = {tau:.6}")))?;
    }
    let nu = lad.as_ref().map(|l| l[0].triplet.nu);
    let mut text = format!("tau = {tau}, dt = {}, {} steps\n", traj.dt, traj.steps);
    match diagnose(&traj, nu) {
        Ok(r) => {
            let _ = writeln!(text, "verdict: {}", r.verdict);
            if let Some(period) = r.measured_period {
                let _ = writeln!(text, "measured period: {period}");
            }
            if let Some(nu) = nu {
                let _ = writeln!(text, "linear period 2 pi / nu: {}", 2.0 * std::f64::consts::PI / nu);
            }
        }
        Err(e) => {
            let _ = writeln!(text, "no diagnosis: {e}");
        }
    }
    Ok(Report { text, ..Report::default() })
}

struct SweepPoint {
    lambda: f64,
    hopf: Vec<Vec<String>>,
    nf: Vec<Vec<String>>,
    tau: Vec<(usize, f64)>,
    c1: Vec<(usize, f64)>,
}

fn sweep(cfg: &RunConfig, out: &Path, plot: bool) -> CliResult<Report> {
    let p = build_problem(cfg)?;
    let pair = principal(&p)?;
    let lambdas: Vec<f64> = match &cfg.sweep {
        SweepGrid::Offsets(o) => o.iter().map(|d| pair.lambda_star + d).collect(),
        SweepGrid::Lambdas(l) => l.clone(),
    };
    let results: Vec<CliResult<SweepPoint>> = lambdas
        .par_iter()
        .map(|&lambda| {
            log::debug!("sweep point lambda = {lambda}");
            let s = steady(&p, &pair, lambda)?;
            let lad = ladder(&p, &pair, &s, cfg.n_max)?;
            let nfs = forms(&p, &pair, &s, &lad)?;
            let verdict = verdict_at(cfg.model.tau, &lad);
            Ok(SweepPoint {
                lambda,
                hopf: lad.iter().map(|pt| hopf_row(lambda, pt, &verdict)).collect(),
                nf: lad.iter().zip(&nfs).map(|(pt, nf)| normalform_row(lambda, pt.n, nf)).collect(),
                tau: lad.iter().map(|pt| (pt.n, pt.tau_n)).collect(),
                c1: lad.iter().zip(&nfs).map(|(pt, nf)| (pt.n, nf.c1.re)).collect(),
            })
        })
        .collect();
    let mut points = results.into_iter().collect::<CliResult<Vec<_>>>()?;
    points.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));

    let mut hopf_csv = Csv::new(HOPF_HEADER);
    let mut nf_csv = Csv::new(NORMALFORM_HEADER);
    for pt in &points {
        pt.hopf.iter().for_each(|r| hopf_csv.push(r.clone()));
        pt.nf.iter().for_each(|r| nf_csv.push(r.clone()));
    }
    hopf_csv.write(out, "hopf.csv")?;
    nf_csv.write(out, "normalform.csv")?;
    if plot {
        let by_n = |pick: fn(&SweepPoint) -> &Vec<(usize, f64)>, prefix: &str| -> Vec<Series> {
            (0..=cfg.n_max)
                .map(|n| Series {
                    label: format!("{prefix} n = {n}"),
                    points: points
                        .iter()
                        .filter_map(|pt| pick(pt).iter().find(|(k, _)| *k == n).map(|(_, v)| (pt.lambda, *v)))
                        .collect(),
                })
                .collect()
        };
        write_file(out, "tau_vs_lambda.svg", &line_plot("Hopf delays", "lambda", "tau_n", &by_n(|p| &p.tau, "tau")))?;
        write_file(out, "c1_vs_lambda.svg", &line_plot("First Lyapunov coefficient", "lambda", "Re C1", &by_n(|p| &p.c1, "C1")))?;
    }
    Ok(Report {
        text: format!("swept {} values of lambda, n = 0..={}\n", points.len(), cfg.n_max),
        ..Report::default()
    })
}
