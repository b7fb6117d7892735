//! Center-manifold reduction at a Hopf point: the second-order fields `E`,
//! `F`, the Taylor coefficients `g20, g11, g02, g21` of the reduced flow and
//! the first Lyapunov quantity `C1(0)`.
//!
//! Time is rescaled by `tau_n`, so the critical pair is `+-i nu tau_n` and
//! delayed quantities carry `e^{-+i nu tau_n}`.

use num_complex::Complex64;

use crate::domain::{ComplexField, DiscreteProblem};
use crate::eigen::{CaseTag, PrincipalPair};
use crate::error::{Error, Result};
use crate::hopf::HopfPoint;
use crate::linalg::{condition_estimate, norm_inf, Tridiag};
use crate::steady::{beta_star, SteadyState};

/// Condition estimates above this trigger a resonance warning.
pub const CONDITION_WARNING: f64 = 1e12;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrbitStability {
    Stable,
    Unstable,
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
        })
    }
}

impl std::fmt::Display for OrbitStability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OrbitStability::Stable => "stable",
            OrbitStability::Unstable => "unstable",
        })
    }
}

/// Solution of one of the second-order linear problems.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSolve {
    pub field: ComplexField,
    /// `||Delta x - b|| / (||Delta|| ||x|| + ||b||)`.
    pub relative_residual: f64,
    pub condition: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowOrder {
    pub g20: Complex64,
    pub g11: Complex64,
    pub g02: Complex64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WFields {
    pub w20_0: ComplexField,
    pub w20_m1: ComplexField,
    pub w11_0: ComplexField,
    pub w11_m1: ComplexField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalFormResult {
    pub g20: Complex64,
    pub g11: Complex64,
    pub g02: Complex64,
    pub g21: Complex64,
    pub e: ComplexField,
    pub f: ComplexField,
    pub w: WFields,
    pub c1: Complex64,
    pub direction: Direction,
    pub orbit_stability: OrbitStability,
    /// `(lambda - lambda_*) c_lambda` with
    /// `c_lambda = (lambda - lambda_*) <u, E> / <u, u>`; absent in case II.
    pub c_lambda_scaled: Option<Complex64>,
    /// `2i / (beta_*^2 (2i - 1))`, the limit of `c_lambda_scaled`.
    pub c_lambda_limit_beta: Option<Complex64>,
    /// The same constant with `alpha^2` in place of `beta_*^2`; only
    /// meaningful when `alpha != 0`.
    pub c_lambda_limit_alpha: Option<Complex64>,
    pub e_condition: f64,
    pub f_condition: f64,
}

/// Weak form of `e^{alpha m} Delta(lambda, mu, tau)`:
/// `-A + lambda (B - W2 u) - lambda e^{-mu tau} W2 u - mu W`.
pub fn delta_matrix(
    problem: &DiscreteProblem,
    state: &SteadyState,
    mu: Complex64,
    tau: f64,
) -> Tridiag<Complex64> {
    let lambda = state.lambda;
    let delay = (-mu * tau).exp();
    let diag: Vec<Complex64> = problem
        .b
        .iter()
        .zip(&problem.w2)
        .zip(&problem.w)
        .zip(&state.u)
        .map(|(((b, w2), w), u)| lambda * (b - w2 * u) - lambda * delay * (w2 * u) - mu * w)
        .collect();
    let mut m = problem.a.to_sym().scaled(-1.0).to_complex();
    m.add_diagonal(&diag);
    m
}

fn solve_delta(
    problem: &DiscreteProblem,
    state: &SteadyState,
    mu: Complex64,
    tau: f64,
    rhs: Vec<Complex64>,
    what: &'static str,
) -> Result<LinearSolve> {
    let m = delta_matrix(problem, state, mu, tau);
    let lu = m.factor();
    let condition = condition_estimate(&m, &lu);
    if condition > CONDITION_WARNING {
        log::warn!("{what}: condition estimate {condition:e}, near resonance");
    }
    let rhs_norm = norm_inf(&rhs);
    if rhs_norm == 0.0 {
        return Ok(LinearSolve {
            field: rhs,
            relative_residual: 0.0,
            condition,
        });
    }
    let field = lu.solve(&rhs);
    let r = m.matvec(&field);
    // Normwise backward error; Delta is nearly singular along phi close to
    // the threshold, so the plain ratio to ||rhs|| would be meaningless.
    let relative_residual = norm_inf(
        &r.iter().zip(&rhs).map(|(a, b)| a - b).collect::<Vec<_>>(),
    ) / (m.norm_inf() * norm_inf(&field) + rhs_norm);
    if !(relative_residual <= 1e-10) {
        return Err(Error::NonConvergence {
            stage: what,
            iterations: 1,
            history: vec![relative_residual],
        });
    }
    Ok(LinearSolve {
        field,
        relative_residual,
        condition,
    })
}

/// `Delta(lambda, 2 i nu, tau_n) E = 2 lambda e^{-i nu tau_n} e^{alpha m} psi^2`.
pub fn solve_e(problem: &DiscreteProblem, state: &SteadyState, point: &HopfPoint) -> Result<LinearSolve> {
    let t = &point.triplet;
    problem.check_len(t.psi.len())?;
    let c = 2.0 * state.lambda * Complex64::from_polar(1.0, -t.nu * point.tau_n);
    let rhs = t.psi.iter().zip(&problem.w2).map(|(p, w2)| c * p * p * w2).collect();
    solve_delta(problem, state, 2.0 * I * t.nu, point.tau_n, rhs, "E solve")
}

/// `Delta(lambda, 0, tau_n) F = lambda (e^{-i nu tau_n} + e^{i nu tau_n}) e^{alpha m} |psi|^2`.
pub fn solve_f(problem: &DiscreteProblem, state: &SteadyState, point: &HopfPoint) -> Result<LinearSolve> {
    let t = &point.triplet;
    problem.check_len(t.psi.len())?;
    let c = state.lambda * 2.0 * (t.nu * point.tau_n).cos();
    let rhs = t
        .psi
        .iter()
        .zip(&problem.w2)
        .map(|(p, w2)| Complex64::new(c * p.norm_sqr() * w2, 0.0))
        .collect();
    solve_delta(problem, state, Complex64::new(0.0, 0.0), point.tau_n, rhs, "F solve")
}

fn require_s_n(point: &HopfPoint) -> Result<Complex64> {
    point
        .s_n
        .ok_or_else(|| Error::Assumption(format!("S_{} has not been computed", point.n)))
}

/// `sum_i e^{2 alpha m} f(psi_i) g_i` over the unknowns.
fn w2_integral<F>(problem: &DiscreteProblem, psi: &[Complex64], f: F) -> Complex64
where
    F: Fn(usize, Complex64) -> Complex64,
{
    psi.iter()
        .zip(&problem.w2)
        .enumerate()
        .map(|(i, (p, w2))| f(i, *p) * w2)
        .sum()
}

pub fn g_low(problem: &DiscreteProblem, state: &SteadyState, point: &HopfPoint) -> Result<LowOrder> {
    let s = require_s_n(point)?;
    let t = &point.triplet;
    problem.check_len(t.psi.len())?;
    let lt = state.lambda * point.tau_n;
    let em = Complex64::from_polar(1.0, -t.nu * point.tau_n);
    let ep = em.conj();
    let psi = &t.psi;
    let cube = w2_integral(problem, psi, |_, p| p * p * p);
    let mixed = w2_integral(problem, psi, |_, p| p * p.norm_sqr());
    let conj2 = w2_integral(problem, psi, |_, p| p * p.conj() * p.conj());
    Ok(LowOrder {
        g20: -2.0 * lt / s * em * cube,
        g11: -(lt / s * (ep + em)) * mixed,
        g02: -2.0 * lt / s * ep * conj2,
    })
}

/// `w20(theta)` and `w11(theta)` at `theta = 0` and `theta = -1`.
pub fn w_fields(point: &HopfPoint, g: &LowOrder, e: &[Complex64], f: &[Complex64]) -> WFields {
    let t = &point.triplet;
    let nt = t.nu * point.tau_n;
    let w20 = |theta: f64| -> ComplexField {
        let p = Complex64::from_polar(1.0, nt * theta);
        let e2 = Complex64::from_polar(1.0, 2.0 * nt * theta);
        t.psi
            .iter()
            .zip(e)
            .map(|(psi, e)| {
                I * g.g20 / nt * psi * p + I * g.g02.conj() / (3.0 * nt) * (psi * p).conj() + e * e2
            })
            .collect()
    };
    let w11 = |theta: f64| -> ComplexField {
        let p = Complex64::from_polar(1.0, nt * theta);
        t.psi
            .iter()
            .zip(f)
            .map(|(psi, f)| -I * g.g11 / nt * psi * p + I * g.g11.conj() / nt * (psi * p).conj() + f)
            .collect()
    };
    WFields {
        w20_0: w20(0.0),
        w20_m1: w20(-1.0),
        w11_0: w11(0.0),
        w11_m1: w11(-1.0),
    }
}

/// Returns `(g21, C1(0))`.
pub fn g21_and_c1(
    problem: &DiscreteProblem,
    state: &SteadyState,
    point: &HopfPoint,
    w: &WFields,
    g: &LowOrder,
) -> Result<(Complex64, Complex64)> {
    let s = require_s_n(point)?;
    let t = &point.triplet;
    let psi = &t.psi;
    let lt = state.lambda * point.tau_n;
    let nt = t.nu * point.tau_n;
    let em = Complex64::from_polar(1.0, -nt);
    let ep = em.conj();

    let sq_w11_m1 = w2_integral(problem, psi, |i, p| p * p * w.w11_m1[i]);
    let abs_w20_m1 = w2_integral(problem, psi, |i, p| p.norm_sqr() * w.w20_m1[i]);
    let abs_w20_0 = w2_integral(problem, psi, |i, p| p.norm_sqr() * w.w20_0[i]);
    let sq_w11_0 = w2_integral(problem, psi, |i, p| p * p * w.w11_0[i]);

    let g21 = -2.0 * lt / s * sq_w11_m1 - lt / s * abs_w20_m1 - lt / s * ep * abs_w20_0
        - 2.0 * lt / s * em * sq_w11_0;
    let c1 = I / (2.0 * nt)
        * (g.g11 * g.g20 - 2.0 * g.g11.norm_sqr() - g.g02.norm_sqr() / 3.0)
        + g21 / 2.0;
    Ok((g21, c1))
}

pub fn classify(c1: Complex64, dmu_dtau: Complex64) -> Result<(Direction, OrbitStability)> {
    if !(dmu_dtau.re > 0.0) {
        return Err(Error::Transversality(dmu_dtau.re));
    }
    let direction = if -c1.re / dmu_dtau.re > 0.0 {
        Direction::Forward
    } else {
        Direction::Backward
    };
    let stability = if c1.re < 0.0 {
        OrbitStability::Stable
    } else {
        OrbitStability::Unstable
    };
    Ok((direction, stability))
}

/// Whole reduction at one Hopf point. `point` must carry `S_n` and
/// `d mu / d tau`.
pub fn normal_form(
    problem: &DiscreteProblem,
    pair: &PrincipalPair,
    state: &SteadyState,
    point: &HopfPoint,
) -> Result<NormalFormResult> {
    let dmu = point
        .dmu_dtau
        .ok_or_else(|| Error::Assumption(format!("d mu/d tau at n = {} has not been computed", point.n)))?;
    let e = solve_e(problem, state, point)?;
    let f = solve_f(problem, state, point)?;
    let g = g_low(problem, state, point)?;
    let w = w_fields(point, &g, &e.field, &f.field);
    let (g21, c1) = g21_and_c1(problem, state, point, &w, &g)?;
    let (direction, orbit_stability) = classify(c1, dmu)?;

    let (mut scaled, mut limit_beta, mut limit_alpha) = (None, None, None);
    if pair.case_tag != CaseTag::NoFluxCaseII {
        let s = state.lambda - pair.lambda_star;
        let ue: Complex64 = state
            .u
            .iter()
            .zip(&e.field)
            .zip(&problem.quad)
            .map(|((u, e), q)| e * (u * q))
            .sum();
        let uu: f64 = state.u.iter().zip(&problem.quad).map(|(u, q)| u * u * q).sum();
        let c_lambda = s * ue / uu;
        scaled = Some(s * c_lambda);
        let shape = 2.0 * I / (2.0 * I - 1.0);
        let b = beta_star(pair, problem)?;
        limit_beta = Some(shape / (b * b));
        if problem.alpha != 0.0 {
            limit_alpha = Some(shape / (problem.alpha * problem.alpha));
        }
    }

    Ok(NormalFormResult {
        g20: g.g20,
        g11: g.g11,
        g02: g.g02,
        g21,
        e: e.field,
        f: f.field,
        w,
        c1,
        direction,
        orbit_stability,
        c_lambda_scaled: scaled,
        c_lambda_limit_beta: limit_beta,
        c_lambda_limit_alpha: limit_alpha,
        e_condition: e.condition,
        f_condition: f.condition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{assemble, make_grid, BoundaryCondition, Profile};
    use crate::eigen::principal_eigenpair;
    use crate::hopf::hopf_points;
    use crate::steady::steady_state;

    #[test]
    fn hutchinson_e_and_f() {
        let p = assemble(
            &make_grid(2.0, 20, BoundaryCondition::NoFlux).unwrap(),
            &Profile::Constant(1.0),
            0.0,
        )
        .unwrap();
        let pair = principal_eigenpair(&p).unwrap();
        let s = steady_state(&p, &pair, 1.0).unwrap();
        let ladder = hopf_points(&p, &pair, &s, 0).unwrap();
        let e = solve_e(&p, &s, &ladder[0]).unwrap();
        let f = solve_f(&p, &s, &ladder[0]).unwrap();
        // (2 i nu + lambda e^{-2 i nu tau}) E = 2 lambda e^{-i nu tau} with nu tau = pi/2.
        let expected = 2.0 * I / (2.0 * I - 1.0);
        assert!(e.field.iter().all(|v| (v - expected).norm() < 1e-12));
        assert!(f.field.iter().all(|v| v.norm() < 1e-12));
    }
}
