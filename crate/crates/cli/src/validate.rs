//! Built-in cross-check suite: closed-form reductions, asymptotic limits,
//! convergence orders and prediction-versus-simulation runs.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;
use std::path::Path;

use delay_hopf::dde_sim::{diagnose, simulate, BumpShape, History, OscillationVerdict, SimConfig, Trajectory};
use delay_hopf::domain::{BoundaryCondition, DiscreteProblem, Profile};
use delay_hopf::eigen::{rayleigh_identity_residual, CaseTag, PrincipalPair};
use delay_hopf::hopf::{case_selector, h_theta_star, mbar, HopfPoint};
use delay_hopf::normalform::{Direction, NormalFormResult, OrbitStability};
use delay_hopf::steady::{beta_star, SteadyState};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::config::{DomainSpec, Model, RunConfig, SimHorizon, SimSpec, SweepGrid};
use crate::error::{CliError, CliResult};
use crate::output::{num, write_file, Csv};
use crate::run::{
    build_problem, forms, hopf_row, ladder, normalform_row, observable_plot, principal, sim_csv, steady, Report,
    HOPF_HEADER, NORMALFORM_HEADER,
};

/// One bound: `value <= limit`, or `value < limit` when `strict`.
#[derive(Debug, Clone, PartialEq)]
pub struct Part {
    pub what: String,
    pub value: f64,
    pub limit: f64,
    pub strict: bool,
}

impl Part {
    fn le(what: impl Into<String>, value: f64, limit: f64) -> Part {
        Part { what: what.into(), value, limit, strict: false }
    }
    fn lt(what: impl Into<String>, value: f64, limit: f64) -> Part {
        Part { what: what.into(), value, limit, strict: true }
    }
    fn holds(what: impl Into<String>, ok: bool) -> Part {
        Part::le(what, if ok { 0.0 } else { 1.0 }, 0.0)
    }
    pub fn passed(&self) -> bool {
        if self.strict {
            self.value < self.limit
        } else {
            self.value <= self.limit
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub outcome: Result<Vec<Part>, String>,
}

impl Check {
    pub fn passed(&self) -> bool {
        matches!(&self.outcome, Ok(parts) if parts.iter().all(Part::passed))
    }

    /// First failing part, otherwise the one closest to its limit.
    pub fn headline(&self) -> Option<&Part> {
        let parts = self.outcome.as_ref().ok()?;
        parts.iter().find(|p| !p.passed()).or_else(|| {
            parts.iter().max_by(|a, b| {
                let r = |p: &Part| if p.limit > 0.0 { p.value / p.limit } else { f64::NEG_INFINITY };
                r(a).total_cmp(&r(b))
            })
        })
    }
}

fn core(module: &'static str) -> impl FnOnce(delay_hopf::Error) -> String {
    move |e| format!("{module}: {e}")
}

fn cfg(bc: BoundaryCondition, n_cells: usize, profile: Profile, alpha: f64) -> RunConfig {
    RunConfig {
        model: Model { lambda: None, alpha, tau: None },
        domain: DomainSpec { length: PI, n_cells, bc },
        profile,
        n_max: 2,
        sim: SimSpec {
            delay: None,
            horizon: SimHorizon::Delays(60.0),
            steps_per_delay: 40,
            epsilon: 0.01,
            bump: BumpShape::Uniform,
            observe_every: 1,
        },
        sweep: SweepGrid::Offsets(vec![]),
        out_dir: None,
    }
}

fn problem(bc: BoundaryCondition, n_cells: usize, profile: Profile, alpha: f64) -> Result<DiscreteProblem, String> {
    build_problem(&cfg(bc, n_cells, profile, alpha)).map_err(|e| e.to_string())
}

fn text(e: CliError) -> String {
    e.to_string()
}

struct SeqPoint {
    offset: f64,
    state: SteadyState,
    ladder: Vec<HopfPoint>,
    forms: Vec<NormalFormResult>,
}

/// Constant-coefficient Dirichlet problem on `(0, pi)` at `lambda_* + offset`.
struct Sequence {
    problem: DiscreteProblem,
    pair: PrincipalPair,
    points: Vec<SeqPoint>,
}

const OFFSETS: [f64; 4] = [0.04, 0.02, 0.01, 0.005];

fn sequence() -> Result<Sequence, String> {
    let p = problem(BoundaryCondition::Dirichlet, 400, Profile::Constant(1.0), 0.0)?;
    let pair = principal(&p).map_err(text)?;
    let points = OFFSETS
        .par_iter()
        .map(|&offset| {
            let state = steady(&p, &pair, pair.lambda_star + offset).map_err(text)?;
            let ladder = ladder(&p, &pair, &state, 2).map_err(text)?;
            let forms = forms(&p, &pair, &state, &ladder).map_err(text)?;
            Ok(SeqPoint { offset, state, ladder, forms })
        })
        .collect::<Result<Vec<_>, String>>()?;
    Ok(Sequence { problem: p, pair, points })
}

impl Sequence {
    fn at(&self, offset: f64) -> &SeqPoint {
        self.points.iter().find(|p| p.offset == offset).expect("offset in sequence")
    }
}

fn hutchinson() -> Result<Vec<Part>, String> {
    let p = problem(BoundaryCondition::NoFlux, 64, Profile::Constant(1.0), 0.0)?;
    let pair = principal(&p).map_err(text)?;
    let s = steady(&p, &pair, 1.0).map_err(text)?;
    let lad = ladder(&p, &pair, &s, 0).map_err(text)?;
    let pt = &lad[0];
    let t = &pt.triplet;
    let ell: Complex64 = t.psi.iter().zip(&p.w).map(|(x, w)| x * x * w).sum();
    let s_exact = ell * Complex64::new(1.0, FRAC_PI_2);
    Ok(vec![
        Part::le("|nu - 1|", (t.nu - 1.0).abs(), 1e-8),
        Part::le("|theta - pi/2|", (t.theta - FRAC_PI_2).abs(), 1e-8),
        Part::le("|tau_0 - pi/2|", (pt.tau_n - FRAC_PI_2).abs(), 1e-8),
        Part::le("|S_0 - l(1 + i pi/2)|", (pt.s_n.unwrap_or_default() - s_exact).norm(), 1e-10),
        Part::le(
            "|Re dmu/dtau - 1/(1 + pi^2/4)|",
            (pt.dmu_dtau.unwrap_or_default().re - 1.0 / (1.0 + PI * PI / 4.0)).abs(),
            1e-6,
        ),
    ])
}

fn dirichlet_principal(seq: &Sequence) -> Result<Vec<Part>, String> {
    let b = beta_star(&seq.pair, &seq.problem).map_err(core("steady"))?;
    let (h, _) = h_theta_star(&seq.pair, &seq.problem);
    Ok(vec![
        Part::le("|lambda_* - 1|", (seq.pair.lambda_star - 1.0).abs(), 1e-4),
        Part::le("|beta_* - 3 pi/8|", (b - 3.0 * PI / 8.0).abs(), 1e-4),
        Part::le("|h_* - 1|", (h - 1.0).abs(), 1e-6),
    ])
}

fn frequency_limit(seq: &Sequence) -> Result<Vec<Part>, String> {
    let err = |off: f64| {
        let t = &seq.at(off).ladder[0].triplet;
        ((t.nu / off - 1.0).abs(), (t.theta - FRAC_PI_2).abs())
    };
    let (n1, t1) = err(0.01);
    let (n2, t2) = err(0.005);
    Ok(vec![
        Part::le("|nu/(lambda - lambda_*) - 1| at 0.01", n1, 0.1),
        Part::le("|theta - pi/2| at 0.01", t1, 0.1),
        Part::le("|nu error ratio - 1/2|", (n2 / n1 - 0.5).abs(), 0.1),
        Part::le("|theta error ratio - 1/2|", (t2 / t1 - 0.5).abs(), 0.1),
    ])
}

fn identities(seq: &Sequence) -> Result<Vec<Part>, String> {
    let mut parts = vec![Part::lt(
        "Rayleigh identity (Dirichlet)",
        rayleigh_identity_residual(&seq.problem, &seq.pair),
        1e-10,
    )];
    let nf = problem(BoundaryCondition::NoFlux, 200, Profile::Cosine { a0: -0.3, a1: 1.0, k: 1.0 }, 0.5)?;
    let nf_pair = principal(&nf).map_err(text)?;
    parts.push(Part::lt("Rayleigh identity (no-flux)", rayleigh_identity_residual(&nf, &nf_pair), 1e-10));
    let worst = seq
        .points
        .iter()
        .map(|p| p.ladder[0].triplet.frequency_identity)
        .fold(0.0, f64::max);
    parts.push(Part::lt("frequency identity", worst, 1e-8));
    let ones = vec![1.0; nf.unknowns()];
    let kernel = nf.a.matvec(&ones).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    parts.push(Part::le("no-flux stiffness on constants", kernel, 0.0));
    Ok(parts)
}

fn three(seq: &Sequence) -> [&SeqPoint; 3] {
    [seq.at(0.04), seq.at(0.02), seq.at(0.01)]
}

fn decreasing(what: String, values: [f64; 3]) -> Part {
    Part::lt(what, (values[1] / values[0]).max(values[2] / values[1]), 1.0)
}

fn sn_limit(seq: &Sequence) -> Result<Vec<Part>, String> {
    let mass: f64 = seq.pair.phi.iter().zip(&seq.problem.w).map(|(p, w)| p * p * w).sum();
    Ok((0..=2)
        .map(|n| {
            let limit = Complex64::new(1.0, FRAC_PI_2 + 2.0 * PI * n as f64) * mass;
            let errs = three(seq).map(|p| (p.ladder[n].s_n.unwrap_or_default() - limit).norm());
            decreasing(format!("S_{n} error ratio"), errs)
        })
        .collect())
}

fn transversality_limit(seq: &Sequence) -> Result<Vec<Part>, String> {
    let (h, _) = h_theta_star(&seq.pair, &seq.problem);
    let p = seq.at(0.01);
    Ok((0..=2)
        .map(|n| {
            let w = FRAC_PI_2 + 2.0 * PI * n as f64;
            let limit = h * h / (1.0 + w * w);
            let scaled = p.ladder[n].dmu_dtau.unwrap_or_default().re / (0.01 * 0.01);
            Part::le(format!("n = {n} relative error"), (scaled / limit - 1.0).abs(), 0.15)
        })
        .collect())
}

fn g11_scaling(seq: &Sequence) -> Result<Vec<Part>, String> {
    Ok((0..=2)
        .map(|n| decreasing(format!("|s g11| ratio, n = {n}"), three(seq).map(|p| (p.offset * p.forms[n].g11).norm())))
        .collect())
}

fn c1_sign(seq: &Sequence) -> Result<Vec<Part>, String> {
    let mut parts: Vec<Part> = three(seq)
        .iter()
        .map(|p| Part::lt(format!("Re(s^2 C1) at {}", p.offset), (p.offset * p.offset * p.forms[0].c1).re, 0.0))
        .collect();
    for p in three(seq) {
        let f = &p.forms[0];
        parts.push(Part::holds(
            format!("forward and stable at {}", p.offset),
            f.direction == Direction::Forward && f.orbit_stability == OrbitStability::Stable,
        ));
    }
    Ok(parts)
}

fn c_lambda_check(seq: &Sequence) -> Result<Vec<Part>, String> {
    let f = &seq.at(0.01).forms[0];
    let (Some(c), Some(l)) = (f.c_lambda_scaled, f.c_lambda_limit_beta) else {
        return Err("c_lambda diagnostic unavailable".into());
    };
    Ok(vec![Part::le("relative distance to 2i/(beta_*^2 (2i - 1))", (c - l).norm() / l.norm(), 0.15)])
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|i| if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h)).sum();
    (f(a) + f(b) + inner) * h / 3.0
}

struct SimRun {
    traj: Trajectory,
    verdict: OscillationVerdict,
    period: Option<f64>,
}

fn sim_run(p: &DiscreteProblem, pair: &PrincipalPair, state: &SteadyState, tau: f64, nu: f64) -> Result<SimRun, String> {
    let cfg = SimConfig {
        problem: p,
        steady: &state.u,
        direction: &pair.phi,
        lambda: state.lambda,
        tau,
        t_end: 60.0 * tau,
        steps_per_delay: 40,
        history: History::SteadyPlusBump { epsilon: 0.5, shape: BumpShape::Uniform },
        observe_every: 1,
    };
    let traj = simulate(&cfg).map_err(core("dde_sim"))?;
    let r = diagnose(&traj, Some(nu)).map_err(core("dde_sim"))?;
    Ok(SimRun { traj, verdict: r.verdict, period: r.measured_period })
}

fn case_two() -> Result<Vec<Part>, String> {
    let p = problem(BoundaryCondition::NoFlux, 100, Profile::Cosine { a0: 0.0, a1: 1.0, k: 1.0 }, 1.0)?;
    let tag = case_selector(&p).map_err(core("hopf"))?;
    let pair = principal(&p).map_err(text)?;
    let f = |g: fn(f64) -> f64| simpson(g, 0.0, PI, 20000);
    let mb = f(|x| x.cos() * x.cos().exp()) / f(|x| (2.0 * x.cos()).exp());
    let h0 = f(|x| x.cos() * x.cos().exp()) / f(|x| x.cos().exp());
    let state = steady(&p, &pair, 0.05).map_err(text)?;
    let lad = ladder(&p, &pair, &state, 0).map_err(text)?;
    let run = sim_run(&p, &pair, &state, 1.1 * lad[0].tau_n, lad[0].triplet.nu)?;
    Ok(vec![
        Part::holds("case selector gives case II", tag == CaseTag::NoFluxCaseII),
        Part::le("|mbar - quadrature|", (mbar(&p).map_err(core("hopf"))? - mb).abs(), 1e-6),
        Part::le("|h_0 - quadrature|", (h_theta_star(&pair, &p).0 - h0).abs(), 1e-6),
        Part::holds("sustained at 1.1 tau_0", run.verdict == OscillationVerdict::SustainedOscillation),
    ])
}

fn convergence_orders() -> Result<Vec<Part>, String> {
    let profile = Profile::Cosine { a0: 0.2, a1: 1.0, k: 1.0 };
    let coarse = problem(BoundaryCondition::Dirichlet, 50, profile.clone(), 0.5)?;
    let lambda = principal(&coarse).map_err(text)?.lambda_star + 0.1;
    let values = [50, 100, 200, 400]
        .par_iter()
        .map(|&n| {
            let p = problem(BoundaryCondition::Dirichlet, n, profile.clone(), 0.5)?;
            let pair = principal(&p).map_err(text)?;
            let s = steady(&p, &pair, lambda).map_err(text)?;
            let pt = ladder(&p, &pair, &s, 0).map_err(text)?.remove(0);
            Ok([pair.lambda_star, pt.triplet.nu, pt.tau_n])
        })
        .collect::<Result<Vec<_>, String>>()?;
    let mut parts: Vec<Part> = ["lambda_*", "nu", "tau_0"]
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let d = |i: usize| values[i][k] - values[i + 1][k];
            Part::le(format!("|{name} Richardson ratio - 4|"), (d(1) / d(2) - 4.0).abs(), 0.5)
        })
        .collect();

    let p = problem(BoundaryCondition::Dirichlet, 40, Profile::Sine { a0: -0.1, a1: 1.0, k: 1.0 }, 0.5)?;
    let pair = principal(&p).map_err(text)?;
    let s = steady(&p, &pair, pair.lambda_star + 0.5).map_err(text)?;
    let at = |k: usize| -> Result<f64, String> {
        let cfg = SimConfig {
            problem: &p,
            steady: &s.u,
            direction: &pair.phi,
            lambda: s.lambda,
            tau: 1.0,
            t_end: 5.0,
            steps_per_delay: k,
            history: History::SteadyPlusBump { epsilon: 0.3, shape: BumpShape::Sine { k: 2.0 } },
            observe_every: 1000,
        };
        let traj = simulate(&cfg).map_err(core("dde_sim"))?;
        Ok(*traj.observable.last().expect("nonempty"))
    };
    let (a, b, c) = (at(20)?, at(40)?, at(80)?);
    parts.push(Part::le("|observable dt-order - 2|", (((a - b) / (b - c)).log2() - 2.0).abs(), 0.3));
    Ok(parts)
}

fn simulation(out: &Path, plot: bool) -> Result<Vec<Part>, String> {
    let p = problem(BoundaryCondition::Dirichlet, 100, Profile::Constant(1.0), 0.0)?;
    let pair = principal(&p).map_err(text)?;
    let state = steady(&p, &pair, pair.lambda_star + 0.05).map_err(text)?;
    let lad = ladder(&p, &pair, &state, 0).map_err(text)?;
    let nf = forms(&p, &pair, &state, &lad).map_err(text)?.remove(0);
    let (tau0, nu) = (lad[0].tau_n, lad[0].triplet.nu);
    let below = sim_run(&p, &pair, &state, 0.9 * tau0, nu)?;
    let above = sim_run(&p, &pair, &state, 1.1 * tau0, nu)?;
    sim_csv(&above.traj).write(out, "sim.csv").map_err(text)?;
    if plot {
        write_file(out, "observable.svg", &observable_plot(&above.traj, "tau = 1.1 tau_0")).map_err(text)?;
    }
    let period_err = above.period.map_or(f64::INFINITY, |t| (t * nu / (2.0 * PI) - 1.0).abs());
    Ok(vec![
        Part::holds("decay at 0.9 tau_0", below.verdict == OscillationVerdict::Decay),
        Part::holds("sustained at 1.1 tau_0", above.verdict == OscillationVerdict::SustainedOscillation),
        Part::le("|period nu / 2 pi - 1|", period_err, 0.1),
        Part::holds(
            "forward and stable",
            nf.direction == Direction::Forward && nf.orbit_stability == OrbitStability::Stable,
        ),
    ])
}

pub const CHECKS: [&str; 12] = [
    "hutchinson_reduction",
    "dirichlet_principal",
    "frequency_limit",
    "identities",
    "s_n_limit",
    "transversality_limit",
    "g11_scaling",
    "c1_sign",
    "c_lambda_limit",
    "case_two",
    "convergence_orders",
    "simulation",
];

fn sequence_outputs(seq: &Sequence, out: &Path) -> CliResult<()> {
    let mut hopf = Csv::new(HOPF_HEADER);
    let mut nf = Csv::new(NORMALFORM_HEADER);
    let mut points: Vec<&SeqPoint> = seq.points.iter().collect();
    points.sort_by(|a, b| a.state.lambda.total_cmp(&b.state.lambda));
    for p in points {
        for (pt, f) in p.ladder.iter().zip(&p.forms) {
            hopf.push(hopf_row(p.state.lambda, pt, "na"));
            nf.push(normalform_row(p.state.lambda, pt.n, f));
        }
    }
    hopf.write(out, "hopf.csv")?;
    nf.write(out, "normalform.csv")
}

pub fn checks(out: &Path, plot: bool) -> CliResult<Vec<Check>> {
    let seq = sequence();
    if let Ok(seq) = &seq {
        sequence_outputs(seq, out)?;
    }
    let from_seq = |f: fn(&Sequence) -> Result<Vec<Part>, String>| match &seq {
        Ok(s) => f(s),
        Err(e) => Err(e.clone()),
    };
    let outcomes: Vec<Result<Vec<Part>, String>> = (0..CHECKS.len())
        .into_par_iter()
        .map(|i| match i {
            0 => hutchinson(),
            1 => from_seq(dirichlet_principal),
            2 => from_seq(frequency_limit),
            3 => from_seq(identities),
            4 => from_seq(sn_limit),
            5 => from_seq(transversality_limit),
            6 => from_seq(g11_scaling),
            7 => from_seq(c1_sign),
            8 => from_seq(c_lambda_check),
            9 => case_two(),
            10 => convergence_orders(),
            _ => simulation(out, plot),
        })
        .collect();
    Ok(CHECKS
        .iter()
        .zip(outcomes)
        .map(|(&name, outcome)| Check { name, outcome })
        .collect())
}

pub fn run(out: &Path, plot: bool) -> CliResult<Report> {
    let checks = checks(out, plot)?;
    let mut csv = Csv::new(&["check", "measured", "limit", "status"]);
    let mut text = String::new();
    let _ = writeln!(text, "{:<3} {:<22} {:>12} {:>12}  {:<6} detail", "#", "check", "measured", "limit", "status");
    let mut violations = Vec::new();
    for (i, c) in checks.iter().enumerate() {
        let status = if c.passed() { "pass" } else { "FAIL" };
        let (measured, limit, detail) = match (c.headline(), &c.outcome) {
            (Some(p), _) => (p.value, p.limit, p.what.clone()),
            (None, Err(e)) => (f64::NAN, f64::NAN, e.clone()),
            (None, Ok(_)) => (f64::NAN, f64::NAN, String::new()),
        };
        csv.push(vec![c.name.to_string(), num(measured), num(limit), status.to_string()]);
        let _ = writeln!(
            text,
            "{:<3} {:<22} {:>12.4e} {:>12.4e}  {:<6} {}",
            i + 1,
            c.name,
            measured,
            limit,
            status,
            detail
        );
        if !c.passed() {
            violations.push(format!("{}: {detail}", c.name));
        }
    }
    csv.write(out, "validate.csv")?;
    let _ = writeln!(text, "{} of {} checks passed", checks.iter().filter(|c| c.passed()).count(), checks.len());
    Ok(Report { text, violations })
}
