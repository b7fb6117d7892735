mod common;

use std::f64::consts::PI;

use common::*;
use delay_hopf::dde_sim::{diagnose, simulate, BumpShape, History, OscillationVerdict, SimConfig};
use delay_hopf::domain::{BoundaryCondition, Profile};
use delay_hopf::eigen::principal_eigenpair;
use delay_hopf::hopf::{stability_verdict, Verdict};
use delay_hopf::normalform::normal_form;
use delay_hopf::steady::steady_state;
use delay_hopf::Error;
use num_complex::Complex64;

/// RK4 for `v' = lambda v (1 - v(t - tau))` with constant history `v0`;
/// delayed values at half steps come from cubic Hermite interpolation.
fn scalar_dde(lambda: f64, tau: f64, v0: f64, t_end: f64, per_delay: usize) -> (f64, Vec<f64>) {
    let dt = tau / per_delay as f64;
    let steps = (t_end / dt).round() as usize;
    let rhs = |v: f64, d: f64| lambda * v * (1.0 - d);
    let mut v = vec![v0];
    let mut dv = vec![rhs(v0, v0)];
    let past = |v: &[f64], dv: &[f64], k: isize, half: bool| -> f64 {
        // Value at step k (+ 1/2 if half); history before 0 is constant.
        if k < 0 {
            return v0;
        }
        let k = k as usize;
        if !half {
            return v[k];
        }
        let (y0, y1, d0, d1) = (v[k], v[k + 1], dv[k] * dt, dv[k + 1] * dt);
        0.5 * (y0 + y1) + 0.125 * (d0 - d1)
    };
    for n in 0..steps {
        let k = n as isize - per_delay as isize;
        let d0 = past(&v, &dv, k, false);
        let dh = if k < 0 { v0 } else { past(&v, &dv, k, true) };
        let d1 = past(&v, &dv, k + 1, false);
        let y = v[n];
        let k1 = rhs(y, d0);
        let k2 = rhs(y + 0.5 * dt * k1, dh);
        let k3 = rhs(y + 0.5 * dt * k2, dh);
        let k4 = rhs(y + dt * k3, d1);
        let next = y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        let dnext = rhs(next, past(&v, &dv, k + 1, false));
        v.push(next);
        dv.push(dnext);
    }
    (dt, v)
}

fn peak_period(dt: f64, v: &[f64], from: usize) -> f64 {
    let peaks: Vec<usize> = (from.max(1)..v.len() - 1)
        .filter(|&i| v[i] > v[i - 1] && v[i] >= v[i + 1])
        .collect();
    (peaks[peaks.len() - 1] - peaks[0]) as f64 * dt / (peaks.len() - 1) as f64
}

#[test]
fn hutchinson_tracks_the_scalar_equation() {
    let p = hutchinson(16);
    let pair = principal_eigenpair(&p).unwrap();
    let s = steady_state(&p, &pair, 1.0).unwrap();
    let run = |k: usize| {
        let cfg = SimConfig {
            problem: &p,
            steady: &s.u,
            direction: &pair.phi,
            lambda: 1.0,
            tau: 1.0,
            t_end: 20.0,
            steps_per_delay: k,
            history: History::SteadyPlusBump { epsilon: 0.01, shape: BumpShape::Uniform },
            observe_every: 1,
        };
        simulate(&cfg).unwrap()
    };
    let (dt_o, oracle) = scalar_dde(1.0, 1.0, 1.01, 20.0, 400);
    let err = |k: usize| {
        let tr = run(k);
        let stride = (tr.dt / dt_o).round() as usize;
        tr.observable
            .iter()
            .enumerate()
            .map(|(i, o)| (o / PI - (oracle[i * stride] - 1.0)).abs())
            .fold(0.0, f64::max)
    };
    let (e1, e2) = (err(20), err(40));
    assert!(e1 < 1e-4, "{e1}");
    assert!((e1 / e2 - 4.0).abs() < 0.6, "{}", e1 / e2);
}

#[test]
fn hutchinson_stable_delay_decays_at_the_root_rate() {
    let p = hutchinson(16);
    let pair = principal_eigenpair(&p).unwrap();
    let s = steady_state(&p, &pair, 1.0).unwrap();
    let cfg = SimConfig {
        problem: &p,
        steady: &s.u,
        direction: &pair.phi,
        lambda: 1.0,
        tau: 1.0,
        t_end: 60.0,
        steps_per_delay: 40,
        history: History::SteadyPlusBump { epsilon: 0.01, shape: BumpShape::Uniform },
        observe_every: 10,
    };
    let r = diagnose(&simulate(&cfg).unwrap(), Some(1.0)).unwrap();
    assert_eq!(r.verdict, OscillationVerdict::Decay);
    // Rightmost root of mu = -e^{-mu}.
    let mut mu = Complex64::new(-0.3, 1.3);
    for _ in 0..50 {
        let f = mu + (-mu).exp();
        let df = 1.0 - (-mu).exp();
        mu -= f / df;
    }
    let rate = r.decay_rate.unwrap();
    assert!((rate / mu.re - 1.0).abs() < 0.05, "{rate} vs {}", mu.re);
    assert!((r.measured_period.unwrap() / (2.0 * PI / mu.im) - 1.0).abs() < 0.02);
}

#[test]
fn hutchinson_unstable_delay_sustains_the_scalar_orbit() {
    let p = hutchinson(16);
    let pair = principal_eigenpair(&p).unwrap();
    let s = steady_state(&p, &pair, 1.0).unwrap();
    let cfg = SimConfig {
        problem: &p,
        steady: &s.u,
        direction: &pair.phi,
        lambda: 1.0,
        tau: 2.0,
        t_end: 400.0,
        steps_per_delay: 40,
        history: History::SteadyPlusBump { epsilon: 0.01, shape: BumpShape::Uniform },
        observe_every: 10,
    };
    let r = diagnose(&simulate(&cfg).unwrap(), Some(1.0)).unwrap();
    assert_eq!(r.verdict, OscillationVerdict::SustainedOscillation);
    let (dt, v) = scalar_dde(1.0, 2.0, 1.01, 400.0, 400);
    let oracle = peak_period(dt, &v, v.len() / 2);
    assert!((r.measured_period.unwrap() / oracle - 1.0).abs() < 0.01);
}

#[test]
fn equilibrium_is_invariant() {
    let pl = pipeline(constant_dirichlet(60), 0.05, 0);
    let tau = 0.5 * pl.ladder[0].tau_n;
    let cfg = SimConfig {
        problem: &pl.problem,
        steady: &pl.state.u,
        direction: &pl.pair.phi,
        lambda: pl.state.lambda,
        tau,
        t_end: 50.0 * tau,
        steps_per_delay: 20,
        history: History::SteadyPlusBump { epsilon: 0.0, shape: BumpShape::Uniform },
        observe_every: 500,
    };
    let tr = simulate(&cfg).unwrap();
    assert!(tr.observable.iter().all(|o| o.abs() <= 1e-12));
    for snap in &tr.snapshots {
        assert!(max_abs_diff(snap, &pl.state.u) <= 1e-10);
    }
    assert_eq!(tr.snapshots.len(), tr.steps / 500 + 1);
}

#[test]
fn observable_converges_at_second_order_in_dt() {
    let p = problem(BoundaryCondition::Dirichlet, 40, Profile::Sine { a0: -0.1, a1: 1.0, k: 1.0 }, 0.5);
    let pair = principal_eigenpair(&p).unwrap();
    let s = steady_state(&p, &pair, pair.lambda_star + 0.5).unwrap();
    let at = |k: usize| {
        let cfg = SimConfig {
            problem: &p,
            steady: &s.u,
            direction: &pair.phi,
            lambda: s.lambda,
            tau: 1.0,
            t_end: 5.0,
            steps_per_delay: k,
            history: History::SteadyPlusBump { epsilon: 0.3, shape: BumpShape::Sine { k: 2.0 } },
            observe_every: 1,
        };
        *simulate(&cfg).unwrap().observable.last().unwrap()
    };
    let (a, b, c) = (at(20), at(40), at(80));
    let ratio = (a - b) / (b - c);
    assert!((ratio - 4.0).abs() < 0.3, "{ratio}");
}

#[test]
fn verdicts_agree_with_the_ladder() {
    let p = constant_dirichlet(60);
    let pair = principal_eigenpair(&p).unwrap();
    for d in [0.04, 0.05, 0.06] {
        let state = steady_state(&p, &pair, pair.lambda_star + d).unwrap();
        let ladder = delay_hopf::hopf::hopf_points(&p, &pair, &state, 1).unwrap();
        for frac in [0.8, 1.2, 1.4] {
            let tau = frac * ladder[0].tau_n;
            let cfg = SimConfig {
                problem: &p,
                steady: &state.u,
                direction: &pair.phi,
                lambda: state.lambda,
                tau,
                t_end: 60.0 * tau,
                steps_per_delay: 40,
                history: History::SteadyPlusBump { epsilon: 0.01, shape: BumpShape::Uniform },
                observe_every: 1000,
            };
            let r = diagnose(&simulate(&cfg).unwrap(), Some(ladder[0].triplet.nu)).unwrap();
            match stability_verdict(tau, &ladder) {
                Verdict::Stable => assert_eq!(r.verdict, OscillationVerdict::Decay, "d={d} frac={frac}"),
                Verdict::Unstable { .. } => assert!(
                    matches!(r.verdict, OscillationVerdict::Growth | OscillationVerdict::SustainedOscillation),
                    "d={d} frac={frac}: {r:?}"
                ),
                Verdict::HopfPoint { .. } => unreachable!(),
            }
        }
    }
}

#[test]
fn orbit_period_matches_the_normal_form_prediction() {
    let pl = pipeline(constant_dirichlet(100), 0.05, 0);
    let pt = &pl.ladder[0];
    let nf = normal_form(&pl.problem, &pl.pair, &pl.state, pt).unwrap();
    let tau = 1.1 * pt.tau_n;

    // Period of the bifurcating orbit in time rescaled by tau:
    // (2 pi / omega0)(1 + T2 eps^2) with eps^2 = (tau - tau0) / mu2.
    let nu = pt.triplet.nu;
    let dmu = pt.dmu_dtau.unwrap();
    let dsigma = Complex64::new(0.0, nu) + pt.tau_n * dmu;
    let omega0 = nu * pt.tau_n;
    let mu2 = -nf.c1.re / dsigma.re;
    let t2 = -(nf.c1.im + mu2 * dsigma.im) / omega0;
    let eps2 = (tau - pt.tau_n) / mu2;
    let predicted = 2.0 * PI / omega0 * (1.0 + t2 * eps2) * tau;

    let cfg = SimConfig {
        problem: &pl.problem,
        steady: &pl.state.u,
        direction: &pl.pair.phi,
        lambda: pl.state.lambda,
        tau,
        t_end: 60.0 * tau,
        steps_per_delay: 40,
        history: History::SteadyPlusBump { epsilon: 0.5, shape: BumpShape::Uniform },
        observe_every: 1000,
    };
    let r = diagnose(&simulate(&cfg).unwrap(), Some(nu)).unwrap();
    assert_eq!(r.verdict, OscillationVerdict::SustainedOscillation);
    let measured = r.measured_period.unwrap();
    assert!((measured / predicted - 1.0).abs() < 0.01, "{measured} vs {predicted}");
}

#[test]
fn rejects_coarse_delay_sampling() {
    let p = hutchinson(16);
    let u = vec![1.0; p.unknowns()];
    let cfg = SimConfig {
        problem: &p,
        steady: &u,
        direction: &u,
        lambda: 1.0,
        tau: 1.0,
        t_end: 10.0,
        steps_per_delay: 10,
        history: History::ConstantField(1.0),
        observe_every: 1,
    };
    assert!(matches!(simulate(&cfg), Err(Error::Config(_))));
}

#[test]
fn zero_delay_runs_the_logistic_flow() {
    let p = hutchinson(16);
    let u = vec![1.0; p.unknowns()];
    let cfg = SimConfig {
        problem: &p,
        steady: &u,
        direction: &u,
        lambda: 1.0,
        tau: 0.0,
        t_end: 2.0,
        steps_per_delay: 80,
        history: History::ConstantField(0.5),
        observe_every: 1,
    };
    let tr = simulate(&cfg).unwrap();
    let v = tr.snapshots.last().unwrap()[0];
    let exact = 1.0 / (1.0 + (-2.0f64).exp());
    assert!((v - exact).abs() < 1e-4, "{v} vs {exact}");
}

#[test]
fn case_two_orbit_is_sustained_past_onset() {
    let p = cosine_case_two(100);
    let pair = principal_eigenpair(&p).unwrap();
    let state = steady_state(&p, &pair, 0.05).unwrap();
    let ladder = delay_hopf::hopf::hopf_points(&p, &pair, &state, 0).unwrap();
    let nu = ladder[0].triplet.nu;
    let run = |frac: f64| {
        let tau = frac * ladder[0].tau_n;
        let cfg = SimConfig {
            problem: &p,
            steady: &state.u,
            direction: &pair.phi,
            lambda: 0.05,
            tau,
            t_end: 60.0 * tau,
            steps_per_delay: 40,
            history: History::SteadyPlusBump { epsilon: 0.5, shape: BumpShape::Uniform },
            observe_every: 1000,
        };
        diagnose(&simulate(&cfg).unwrap(), Some(nu)).unwrap().verdict
    };
    assert_eq!(run(0.9), OscillationVerdict::Decay);
    assert_eq!(run(1.1), OscillationVerdict::SustainedOscillation);
}
