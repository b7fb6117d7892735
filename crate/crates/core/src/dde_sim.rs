//! Method-of-lines integration of the delayed equation
//! `v_t = e^{-alpha m} (e^{alpha m} v_x)_x + lambda v (m - e^{alpha m} v(t - tau))`
//! and oscillation diagnostics on its output.
//!
//! Crank-Nicolson handles diffusion (one tridiagonal factorization reused for
//! every step); the delayed reaction term is advanced with second-order
//! Adams-Bashforth. With `dt = tau / K` the delayed state is always a stored
//! step, kept in a ring buffer of `K + 1` fields.

use crate::domain::{DiscreteProblem, Field};
use crate::error::{Error, Result};
use crate::linalg::Tridiag;

pub const MIN_STEPS_PER_DELAY: usize = 20;
pub const MAX_DT: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub enum BumpShape {
    Uniform,
    /// `sin(k pi x / length)`
    Sine { k: f64 },
    Custom(Field),
}

#[derive(Debug, Clone, PartialEq)]
pub enum History {
    /// Constant in time: `u (1 + epsilon bump)`.
    SteadyPlusBump { epsilon: f64, shape: BumpShape },
    ConstantField(f64),
}

#[derive(Debug, Clone)]
pub struct SimConfig<'a> {
    pub problem: &'a DiscreteProblem,
    /// Reference steady state; the observable measures departures from it.
    pub steady: &'a [f64],
    /// Projection direction of the observable, usually the principal eigenfunction.
    pub direction: &'a [f64],
    pub lambda: f64,
    pub tau: f64,
    pub t_end: f64,
    /// Requested `K`; raised when needed so that `dt <= 0.1`.
    pub steps_per_delay: usize,
    pub history: History,
    pub observe_every: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    /// Effective `K` after the step-size cap.
    pub steps_per_delay: usize,
    pub steps: usize,
    /// One entry per step, including `t = 0`.
    pub times: Vec<f64>,
    pub observable: Vec<f64>,
    pub snapshot_times: Vec<f64>,
    pub snapshots: Vec<Field>,
}

fn initial_field(config: &SimConfig<'_>) -> Result<Field> {
    let p = config.problem;
    Ok(match &config.history {
        History::ConstantField(c) => vec![*c; p.unknowns()],
        History::SteadyPlusBump { epsilon, shape } => {
            let bump: Vec<f64> = match shape {
                BumpShape::Uniform => vec![1.0; p.unknowns()],
                BumpShape::Sine { k } => p
                    .grid
                    .unknown_nodes()
                    .iter()
                    .map(|x| (k * std::f64::consts::PI * x / p.grid.length).sin())
                    .collect(),
                BumpShape::Custom(f) => {
                    p.check_len(f.len())?;
                    f.clone()
                }
            };
            config
                .steady
                .iter()
                .zip(&bump)
                .map(|(u, b)| u * (1.0 + epsilon * b))
                .collect()
        }
    })
}

/// Step size and effective `K`.
pub fn step_size(tau: f64, steps_per_delay: usize) -> (f64, usize) {
    if tau > 0.0 {
        let k = steps_per_delay.max((tau / MAX_DT).ceil() as usize);
        (tau / k as f64, k)
    } else {
        (MAX_DT * MIN_STEPS_PER_DELAY as f64 / steps_per_delay as f64, steps_per_delay)
    }
}

pub fn simulate(config: &SimConfig<'_>) -> Result<Trajectory> {
    let p = config.problem;
    let n = p.unknowns();
    p.check_len(config.steady.len())?;
    p.check_len(config.direction.len())?;
    if config.steps_per_delay < MIN_STEPS_PER_DELAY {
        return Err(Error::Config(format!(
            "steps per delay must be at least {MIN_STEPS_PER_DELAY}, got {}",
            config.steps_per_delay
        )));
    }
    if !(config.tau >= 0.0) || !(config.t_end > 0.0) || config.observe_every == 0 {
        return Err(Error::Config(
            "simulation needs tau >= 0, t_end > 0 and observe_every >= 1".into(),
        ));
    }
    let (dt, k) = step_size(config.tau, config.steps_per_delay);
    let steps = (config.t_end / dt).round() as usize;

    // Stepped in the deviation w = v - u from the supplied steady state:
    // (W + dt/2 A) w^{n+1} = (W - dt/2 A) w^n + dt (W R* + r0), r0 = W R(u, u) - A u.
    let lhs: Tridiag<f64> = p.a.to_sym().scaled(0.5 * dt).plus_diagonal(1.0, &p.w).to_general();
    let lu = lhs.factor();

    let lambda = config.lambda;
    let u = config.steady;
    let au = p.a.matvec(u);
    let mut r0: Field = (0..n)
        .map(|i| p.w[i] * lambda * u[i] * (p.m[i] - p.exp_am[i] * u[i]) - au[i])
        .collect();
    // A converged steady state is taken as an exact equilibrium.
    if r0.iter().zip(&p.quad).all(|(r, q)| (r / q).abs() <= crate::steady::NEWTON_TOL) {
        r0.iter_mut().for_each(|r| *r = 0.0);
    }
    // R(u + w, u + wd) - R(u, u).
    let reaction = |w: &[f64], wd: &[f64]| -> Field {
        (0..n)
            .map(|i| {
                let d = u[i] + wd[i];
                lambda * (p.m[i] * w[i] - p.exp_am[i] * (w[i] * d + u[i] * wd[i]))
            })
            .collect()
    };
    let observe = |w: &[f64]| -> f64 {
        w.iter()
            .zip(config.direction)
            .zip(&p.quad)
            .map(|((w, f), q)| f * w * q)
            .sum()
    };
    let to_state = |w: &[f64]| -> Field { w.iter().zip(u).map(|(w, u)| u + w).collect() };

    let w0: Field = initial_field(config)?.iter().zip(u).map(|(v, u)| v - u).collect();
    let delayed_lag = if config.tau > 0.0 { k } else { 0 };
    let slots = delayed_lag + 1;
    let mut ring = vec![w0.clone(); slots];
    let mut w = w0;
    let mut prev_r: Option<Field> = None;

    let mut times = Vec::with_capacity(steps + 1);
    let mut observable = Vec::with_capacity(steps + 1);
    let mut snapshot_times = Vec::new();
    let mut snapshots = Vec::new();
    times.push(0.0);
    observable.push(observe(&w));
    snapshot_times.push(0.0);
    snapshots.push(to_state(&w));
    let mut warned = false;

    for step in 0..steps {
        // Slot of w^{step - K}, about to be overwritten by w^{step + 1}.
        let delayed = &ring[(step + 1) % slots];
        let r = reaction(&w, if delayed_lag == 0 { &w } else { delayed });
        let r_star: Field = match &prev_r {
            Some(pr) => r.iter().zip(pr).map(|(a, b)| 1.5 * a - 0.5 * b).collect(),
            None => r.clone(),
        };
        let aw = p.a.matvec(&w);
        let mut rhs: Field = (0..n)
            .map(|i| p.w[i] * w[i] - 0.5 * dt * aw[i] + dt * (p.w[i] * r_star[i] + r0[i]))
            .collect();
        lu.solve_in_place(&mut rhs);
        w = rhs;
        prev_r = Some(r);
        let v = to_state(&w);

        let t = (step + 1) as f64 * dt;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::BlowUp(step as f64 * dt));
        }
        if !warned && v.iter().any(|&x| x < -1e-8) {
            log::warn!("solution became negative at t = {t}");
            warned = true;
        }
        ring[(step + 1) % slots].clone_from(&w);
        times.push(t);
        observable.push(observe(&w));
        if (step + 1) % config.observe_every == 0 {
            snapshot_times.push(t);
            snapshots.push(v);
        }
    }

    Ok(Trajectory {
        dt,
        steps_per_delay: k,
        steps,
        times,
        observable,
        snapshot_times,
        snapshots,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OscillationVerdict {
    Decay,
    SustainedOscillation,
    Growth,
    Inconclusive,
}

impl std::fmt::Display for OscillationVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OscillationVerdict::Decay => "decay",
            OscillationVerdict::SustainedOscillation => "sustained",
            OscillationVerdict::Growth => "growth",
            OscillationVerdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OscillationReport {
    pub verdict: OscillationVerdict,
    pub measured_period: Option<f64>,
    /// Slope of `ln(amplitude)` against time over the detected peaks.
    pub decay_rate: Option<f64>,
    pub amplitude_tail: f64,
    /// Geometric mean ratio of successive peak amplitudes over the last five peaks.
    pub amplitude_ratio: Option<f64>,
    /// `|measured / predicted - 1|` against `2 pi / nu`.
    pub period_error: Option<f64>,
    pub peaks: usize,
}

pub const MIN_TAIL_SAMPLES: usize = 100;

/// Classifies the second half of the observable.
pub fn diagnose(traj: &Trajectory, predicted_nu: Option<f64>) -> Result<OscillationReport> {
    let t_end = *traj.times.last().unwrap_or(&0.0);
    let start = traj.times.partition_point(|&t| t < 0.5 * t_end);
    let t = &traj.times[start..];
    let o = &traj.observable[start..];
    if o.len() < MIN_TAIL_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "{} samples in the second half, need {MIN_TAIL_SAMPLES}",
            o.len()
        )));
    }
    let initial = traj.observable.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let tail_start = o.len() - o.len() / 10;
    let tail_max = o[tail_start..].iter().fold(0.0f64, |a, b| a.max(b.abs()));

    // Peaks paired with the following trough give half peak-to-trough amplitudes.
    let mut peaks: Vec<(f64, f64)> = Vec::new();
    let mut pending: Option<(f64, f64)> = None;
    for i in 1..o.len() - 1 {
        if o[i] > o[i - 1] && o[i] >= o[i + 1] {
            pending = Some((refine_time(t, o, i), o[i]));
        } else if o[i] < o[i - 1] && o[i] <= o[i + 1] {
            if let Some((tp, vp)) = pending.take() {
                peaks.push((tp, 0.5 * (vp - o[i])));
            }
        }
    }
    let floor = 1e-12 * initial.max(f64::MIN_POSITIVE);
    peaks.retain(|&(_, a)| a > floor);

    let predicted = predicted_nu.map(|nu| 2.0 * std::f64::consts::PI / nu);
    if peaks.len() < 2 {
        let verdict = if tail_max < 1e-6 * initial || initial == 0.0 {
            OscillationVerdict::Decay
        } else {
            OscillationVerdict::Inconclusive
        };
        return Ok(OscillationReport {
            verdict,
            measured_period: None,
            decay_rate: None,
            amplitude_tail: tail_max,
            amplitude_ratio: None,
            period_error: None,
            peaks: peaks.len(),
        });
    }

    let spacings: Vec<f64> = peaks.windows(2).map(|w| w[1].0 - w[0].0).collect();
    let mean = spacings.iter().sum::<f64>() / spacings.len() as f64;
    let var = spacings.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / spacings.len() as f64;
    let dispersion = var.sqrt() / mean;

    let last = peaks.len() - 1;
    let m = last.min(4);
    let ratio = (peaks[last].1 / peaks[last - m].1).powf(1.0 / m as f64);

    let (sx, sy, sxx, sxy) = peaks.iter().fold((0.0, 0.0, 0.0, 0.0), |acc, &(x, a)| {
        let y = a.ln();
        (acc.0 + x, acc.1 + y, acc.2 + x * x, acc.3 + x * y)
    });
    let np = peaks.len() as f64;
    let slope = (np * sxy - sx * sy) / (np * sxx - sx * sx);

    let verdict = if peaks.len() >= 5 && (ratio - 1.0).abs() < 0.02 && dispersion < 0.05 {
        OscillationVerdict::SustainedOscillation
    } else if ratio < 0.98 {
        OscillationVerdict::Decay
    } else if ratio > 1.02 {
        OscillationVerdict::Growth
    } else {
        OscillationVerdict::Inconclusive
    };

    Ok(OscillationReport {
        verdict,
        measured_period: Some(mean),
        decay_rate: Some(slope),
        amplitude_tail: peaks[last].1,
        amplitude_ratio: Some(ratio),
        period_error: predicted.map(|p| (mean / p - 1.0).abs()),
        peaks: peaks.len(),
    })
}

/// Vertex of the parabola through three samples around a local extremum.
fn refine_time(t: &[f64], o: &[f64], i: usize) -> f64 {
    let (y0, y1, y2) = (o[i - 1], o[i], o[i + 1]);
    let den = y0 - 2.0 * y1 + y2;
    if den == 0.0 {
        return t[i];
    }
    let shift = (0.5 * (y0 - y2) / den).clamp(-1.0, 1.0);
    let h = if shift >= 0.0 { t[i + 1] - t[i] } else { t[i] - t[i - 1] };
    t[i] + shift * h
}
