//! Purely imaginary characteristic roots `mu = i nu` of the linearization at
//! the steady state, the ladder of critical delays
//! `tau_n = (theta + 2 n pi) / nu`, and the crossing data at each rung.
//!
//! With `e^{-i nu tau}` replaced by `e^{-i theta}`, the characteristic
//! equation becomes a complex-symmetric tridiagonal eigenproblem
//! `M(theta) psi = mu W psi`. We solve `Re mu(theta) = 0` by Newton in
//! `theta`, tracking the eigenpair with Rayleigh-quotient iteration.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use crate::domain::{BoundaryCondition, ComplexField, DiscreteProblem};
use crate::eigen::{CaseTag, PrincipalPair};
use crate::error::{Error, Result};
use crate::linalg::{norm_inf, Tridiag};
use crate::steady::SteadyState;

/// `|int m e^{alpha m}|` below this cannot be assigned a no-flux case.
pub const CASE_TOLERANCE: f64 = 1e-10;
/// Two delays closer than this (relative) are treated as equal.
pub const HOPF_POINT_TOLERANCE: f64 = 1e-12;

const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn case_selector(problem: &DiscreteProblem) -> Result<CaseTag> {
    if problem.grid.bc == BoundaryCondition::Dirichlet {
        return Ok(CaseTag::Dirichlet);
    }
    let s = problem.weighted_mass();
    if s.abs() < CASE_TOLERANCE {
        return Err(Error::AmbiguousCase(s));
    }
    Ok(if s < 0.0 {
        CaseTag::NoFluxCaseI
    } else {
        CaseTag::NoFluxCaseII
    })
}

/// `int m e^{alpha m} / int e^{2 alpha m}`, the small-`lambda` limit of the
/// steady state in case II.
pub fn mbar(problem: &DiscreteProblem) -> Result<f64> {
    if case_selector(problem)? != CaseTag::NoFluxCaseII {
        return Err(Error::WrongCase("m-bar is only defined in no-flux case II".into()));
    }
    Ok(problem.weighted_mass() / problem.w2.iter().sum::<f64>())
}

/// Limits `h = lim nu / (lambda - lambda_*)` and `theta = pi/2` at the base
/// point.
pub fn h_theta_star(pair: &PrincipalPair, problem: &DiscreteProblem) -> (f64, f64) {
    let h = match pair.case_tag {
        CaseTag::NoFluxCaseII => problem.weighted_mass() / problem.w.iter().sum::<f64>(),
        _ => {
            let phi = &pair.phi;
            let num: f64 = phi.iter().zip(&problem.b).map(|(p, b)| b * p * p).sum();
            let den: f64 = phi.iter().zip(&problem.w).map(|(p, w)| w * p * p).sum();
            num / den
        }
    };
    (h, FRAC_PI_2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CharTriplet {
    pub lambda: f64,
    pub lambda_star: f64,
    pub nu: f64,
    /// In `[0, 2 pi)`.
    pub theta: f64,
    /// Normalized so that `<phi, psi>` is real and positive and
    /// `||psi|| = ||phi||` in plain quadrature.
    pub psi: ComplexField,
    /// `nu / (lambda - lambda_*)`.
    pub h: f64,
    /// `<phi, psi> / <phi, phi>`.
    pub r: f64,
    /// `(psi - r phi) / (lambda - lambda_*)`.
    pub z: ComplexField,
    /// Strong-form residual of the characteristic equation.
    pub residual: f64,
    /// `|nu <psi, psi>_1 - lambda sin(theta) <psi, e^{2 alpha m} u psi>|`.
    pub frequency_identity: f64,
    pub newton_iters: usize,
}

/// Complex-symmetric pieces of the characteristic operator in weak form:
/// `M(theta) = C0 - e^{-i theta} diag(D)`.
struct CharOperator {
    c0: Tridiag<f64>,
    d: Vec<f64>,
    w: Vec<f64>,
}

impl CharOperator {
    fn new(problem: &DiscreteProblem, state: &SteadyState) -> Self {
        let lambda = state.lambda;
        let react: Vec<f64> = problem
            .b
            .iter()
            .zip(&problem.w2)
            .zip(&state.u)
            .map(|((b, w2), u)| lambda * (b - w2 * u))
            .collect();
        let c0 = problem.a.to_sym().scaled(-1.0).plus_diagonal(1.0, &react).to_general();
        let d = problem
            .w2
            .iter()
            .zip(&state.u)
            .map(|(w2, u)| lambda * w2 * u)
            .collect();
        Self {
            c0,
            d,
            w: problem.w.clone(),
        }
    }

    /// `M(theta) - sigma W`.
    fn shifted(&self, theta: f64, sigma: Complex64) -> Tridiag<Complex64> {
        let e = Complex64::from_polar(1.0, -theta);
        let c = |v: &[f64]| v.iter().map(|&x| Complex64::new(x, 0.0)).collect::<Vec<_>>();
        let diag = self
            .c0
            .diag
            .iter()
            .zip(&self.d)
            .zip(&self.w)
            .map(|((c, d), w)| *c - e * d - sigma * w)
            .collect();
        Tridiag::new(c(&self.c0.sub), diag, c(&self.c0.sup))
    }

    fn apply(&self, theta: f64, sigma: Complex64, x: &[Complex64]) -> Vec<Complex64> {
        self.shifted(theta, sigma).matvec(x)
    }

    fn rayleigh(&self, theta: f64, psi: &[Complex64]) -> Complex64 {
        let mpsi = self.apply(theta, Complex64::new(0.0, 0.0), psi);
        let num: Complex64 = psi.iter().zip(&mpsi).map(|(a, b)| a * b).sum();
        let den: Complex64 = psi.iter().zip(&self.w).map(|(a, w)| a * a * w).sum();
        num / den
    }

    /// Relative residual `||M psi - mu W psi|| / ||M psi||`.
    fn relative_residual(&self, theta: f64, mu: Complex64, psi: &[Complex64]) -> f64 {
        let r = self.apply(theta, mu, psi);
        let m = self.apply(theta, Complex64::new(0.0, 0.0), psi);
        norm_inf(&r) / norm_inf(&m).max(f64::MIN_POSITIVE)
    }

    /// Rayleigh-quotient iteration for the eigenpair of `M(theta)` nearest
    /// `sigma`, started from `psi`.
    fn rqi(&self, theta: f64, mut sigma: Complex64, psi: &[Complex64]) -> (Complex64, Vec<Complex64>) {
        let mut psi = psi.to_vec();
        for _ in 0..30 {
            let lu = self.shifted(theta, sigma).factor();
            let mut y: Vec<Complex64> = psi.iter().zip(&self.w).map(|(p, w)| p * w).collect();
            lu.solve_in_place(&mut y);
            let nrm = crate::linalg::norm2(&y);
            if !nrm.is_finite() || nrm == 0.0 {
                break;
            }
            // Keep the phase anchored to the sum so iterates do not rotate.
            let s: Complex64 = y.iter().sum();
            let phase = if s.norm() > 0.0 { s.conj() / s.norm() } else { Complex64::new(1.0, 0.0) };
            for v in y.iter_mut() {
                *v *= phase / nrm;
            }
            psi = y;
            let next = self.rayleigh(theta, &psi);
            let converged = (next - sigma).norm() <= 1e-15 * next.norm().max(1e-300)
                || self.relative_residual(theta, next, &psi) < 1e-15;
            sigma = next;
            if converged {
                break;
            }
        }
        (sigma, psi)
    }

    /// `d mu / d theta = psi^T (i e^{-i theta} D) psi / psi^T W psi`.
    fn dmu_dtheta(&self, theta: f64, psi: &[Complex64]) -> Complex64 {
        let e = I * Complex64::from_polar(1.0, -theta);
        let num: Complex64 = psi.iter().zip(&self.d).map(|(p, d)| p * p * d).sum();
        let den: Complex64 = psi.iter().zip(&self.w).map(|(p, w)| p * p * w).sum();
        e * num / den
    }
}

pub fn char_triplet(
    problem: &DiscreteProblem,
    pair: &PrincipalPair,
    state: &SteadyState,
) -> Result<CharTriplet> {
    problem.check_len(pair.phi.len())?;
    problem.check_len(state.u.len())?;
    let lambda = state.lambda;
    let ls = pair.lambda_star;
    let offset = lambda - ls;
    if !(offset > 0.0) {
        return Err(Error::Assumption(format!(
            "lambda = {lambda} must exceed lambda_* = {ls}"
        )));
    }
    let (h_base, theta_base) = h_theta_star(pair, problem);
    let op = CharOperator::new(problem, state);

    let mut theta = theta_base;
    let mut sigma = Complex64::new(0.0, offset * h_base);
    let mut psi: Vec<Complex64> = pair.phi.iter().map(|&p| Complex64::new(p, 0.0)).collect();
    let mut history = Vec::new();
    let mut iters = 0;
    let mut converged = false;
    for it in 0..50 {
        iters = it + 1;
        let (mu, v) = op.rqi(theta, sigma, &psi);
        psi = v;
        sigma = mu;
        history.push(mu.re.abs());
        let slope = op.dmu_dtheta(theta, &psi).re;
        if slope == 0.0 || !slope.is_finite() {
            break;
        }
        let step = (-mu.re / slope).clamp(-0.5, 0.5);
        theta += step;
        // Quadratic convergence: once the step is this small the next one is
        // below the rounding floor of Re mu.
        if step.abs() <= 1e-10 * theta.abs().max(1.0) {
            let (mu, v) = op.rqi(theta, sigma, &psi);
            psi = v;
            sigma = mu;
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            stage: "characteristic system",
            iterations: iters,
            history,
        });
    }
    let nu = sigma.im;
    if !(nu > 0.0) {
        return Err(Error::NonPositiveFrequency(nu));
    }
    let theta = theta.rem_euclid(2.0 * PI);

    // Phase and scale normalization against phi in plain quadrature.
    let q = &problem.quad;
    let c: Complex64 = psi.iter().zip(&pair.phi).zip(q).map(|((p, f), w)| p * f * w).sum();
    let rot = c.conj() / c.norm();
    let pp: f64 = pair.phi.iter().zip(q).map(|(f, w)| f * f * w).sum();
    let ss: f64 = psi.iter().zip(q).map(|(p, w)| p.norm_sqr() * w).sum();
    let scale = (pp / ss).sqrt();
    for p in psi.iter_mut() {
        *p *= rot * scale;
    }

    let mu = Complex64::new(0.0, nu);
    let res = op.apply(theta, mu, &psi);
    let residual = res
        .iter()
        .zip(q)
        .map(|(r, w)| r.norm() / w)
        .fold(0.0, f64::max);

    let r = psi
        .iter()
        .zip(&pair.phi)
        .zip(q)
        .map(|((p, f), w)| p.re * f * w)
        .sum::<f64>()
        / pp;
    let z = psi
        .iter()
        .zip(&pair.phi)
        .map(|(p, f)| (p - r * f) / offset)
        .collect();

    let lhs: f64 = psi.iter().zip(&problem.w).map(|(p, w)| p.norm_sqr() * w).sum();
    let rhs: f64 = psi
        .iter()
        .zip(&problem.w2)
        .zip(&state.u)
        .map(|((p, w2), u)| p.norm_sqr() * w2 * u)
        .sum();
    let frequency_identity = (nu * lhs - lambda * theta.sin() * rhs).abs();

    Ok(CharTriplet {
        lambda,
        lambda_star: ls,
        nu,
        theta,
        psi,
        h: nu / offset,
        r,
        z,
        residual,
        frequency_identity,
        newton_iters: iters,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HopfPoint {
    pub n: usize,
    pub tau_n: f64,
    pub s_n: Option<Complex64>,
    pub dmu_dtau: Option<Complex64>,
    pub triplet: CharTriplet,
}

pub fn tau_ladder(triplet: &CharTriplet, n_max: usize) -> Vec<HopfPoint> {
    (0..=n_max)
        .map(|n| HopfPoint {
            n,
            tau_n: (triplet.theta + 2.0 * PI * n as f64) / triplet.nu,
            s_n: None,
            dmu_dtau: None,
            triplet: triplet.clone(),
        })
        .collect()
}

/// `P = int e^{2 alpha m} u psi^2` (unconjugated).
fn delayed_pairing(problem: &DiscreteProblem, state: &SteadyState, psi: &[Complex64]) -> Complex64 {
    psi.iter()
        .zip(&problem.w2)
        .zip(&state.u)
        .map(|((p, w2), u)| p * p * (w2 * u))
        .sum()
}

/// `S_n = int e^{alpha m} psi^2 - lambda tau_n e^{-i theta} int e^{2 alpha m} u psi^2`.
pub fn s_n(problem: &DiscreteProblem, state: &SteadyState, point: &HopfPoint) -> Result<Complex64> {
    let t = &point.triplet;
    problem.check_len(t.psi.len())?;
    let q: Complex64 = t.psi.iter().zip(&problem.w).map(|(p, w)| p * p * w).sum();
    let p = delayed_pairing(problem, state, &t.psi);
    let s = q - state.lambda * point.tau_n * Complex64::from_polar(1.0, -t.theta) * p;
    let scale: f64 = t.psi.iter().zip(&problem.w).map(|(p, w)| p.norm_sqr() * w).sum();
    if s.norm() < 1e-8 * scale {
        return Err(Error::Degeneracy(s.norm()));
    }
    Ok(s)
}

/// Crossing velocity `d mu / d tau` of the root `i nu` at `tau_n`,
/// `i nu lambda e^{-i theta} P / S_n`.
pub fn transversality(
    problem: &DiscreteProblem,
    state: &SteadyState,
    point: &HopfPoint,
) -> Result<Complex64> {
    let s = match point.s_n {
        Some(s) => s,
        None => s_n(problem, state, point)?,
    };
    let t = &point.triplet;
    let p = delayed_pairing(problem, state, &t.psi);
    let d = I * t.nu * state.lambda * Complex64::from_polar(1.0, -t.theta) * p / s;
    if !(d.re > 0.0) {
        return Err(Error::Transversality(d.re));
    }
    Ok(d)
}

/// Full ladder with `S_n` and `d mu / d tau` filled in.
pub fn hopf_points(
    problem: &DiscreteProblem,
    pair: &PrincipalPair,
    state: &SteadyState,
    n_max: usize,
) -> Result<Vec<HopfPoint>> {
    let triplet = char_triplet(problem, pair, state)?;
    let mut ladder = tau_ladder(&triplet, n_max);
    for point in ladder.iter_mut() {
        point.s_n = Some(s_n(problem, state, point)?);
        point.dmu_dtau = Some(transversality(problem, state, point)?);
    }
    Ok(ladder)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Stable,
    /// `count` characteristic roots in the right half-plane.
    Unstable { count: usize },
    HopfPoint { n: usize },
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Stable => write!(f, "stable"),
            Verdict::Unstable { count } => write!(f, "unstable({count})"),
            Verdict::HopfPoint { n } => write!(f, "hopf({n})"),
        }
    }
}

/// Stability of the steady state at delay `tau` from the ladder: stable
/// below `tau_0`, and `2(n+1)` unstable roots on `(tau_n, tau_{n+1}]`.
/// Rungs past the end of `ladder` are extrapolated from its triplet.
pub fn stability_verdict(tau: f64, ladder: &[HopfPoint]) -> Verdict {
    let Some(first) = ladder.first() else {
        return Verdict::Stable;
    };
    let t = &first.triplet;
    let k = ((t.nu * tau - t.theta) / (2.0 * PI)).round();
    if k >= 0.0 {
        let tau_k = (t.theta + 2.0 * PI * k) / t.nu;
        if (tau - tau_k).abs() <= HOPF_POINT_TOLERANCE * tau_k.max(1.0) {
            return Verdict::HopfPoint { n: k as usize };
        }
    }
    if tau < first.tau_n {
        return Verdict::Stable;
    }
    let crossed = ((t.nu * tau - t.theta) / (2.0 * PI)).ceil().max(0.0) as usize;
    Verdict::Unstable { count: 2 * crossed }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{assemble, make_grid, Profile};
    use crate::eigen::principal_eigenpair;
    use crate::steady::steady_state;

    fn hutchinson(lambda: f64) -> (DiscreteProblem, PrincipalPair, SteadyState) {
        let p = assemble(
            &make_grid(PI, 40, BoundaryCondition::NoFlux).unwrap(),
            &Profile::Constant(1.0),
            0.0,
        )
        .unwrap();
        let pair = principal_eigenpair(&p).unwrap();
        let s = steady_state(&p, &pair, lambda).unwrap();
        (p, pair, s)
    }

    #[test]
    fn hutchinson_triplet() {
        let (p, pair, s) = hutchinson(1.0);
        let t = char_triplet(&p, &pair, &s).unwrap();
        assert!((t.nu - 1.0).abs() < 1e-12);
        assert!((t.theta - FRAC_PI_2).abs() < 1e-12);
        assert!(t.psi.iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-12));
        assert!(t.residual < 1e-10);
        let ladder = tau_ladder(&t, 1);
        assert!((ladder[0].tau_n - FRAC_PI_2).abs() < 1e-12);
        assert!((ladder[1].tau_n - 2.5 * PI).abs() < 1e-12);
    }

    #[test]
    fn hutchinson_verdicts() {
        let (p, pair, s) = hutchinson(1.0);
        let ladder = hopf_points(&p, &pair, &s, 2).unwrap();
        assert_eq!(stability_verdict(1.0, &ladder), Verdict::Stable);
        assert_eq!(stability_verdict(2.0, &ladder), Verdict::Unstable { count: 2 });
        assert_eq!(stability_verdict(9.0, &ladder), Verdict::Unstable { count: 4 });
        assert_eq!(stability_verdict(15.0, &ladder), Verdict::Unstable { count: 6 });
        assert_eq!(stability_verdict(ladder[0].tau_n, &ladder), Verdict::HopfPoint { n: 0 });
    }

    #[test]
    fn mbar_requires_case_two() {
        let p = assemble(
            &make_grid(PI, 40, BoundaryCondition::Dirichlet).unwrap(),
            &Profile::Constant(1.0),
            0.0,
        )
        .unwrap();
        assert!(matches!(mbar(&p), Err(Error::WrongCase(_))));
    }

    #[test]
    fn ambiguous_case_rejected() {
        let p = assemble(
            &make_grid(PI, 40, BoundaryCondition::NoFlux).unwrap(),
            &Profile::Cosine { a0: 0.0, a1: 1.0, k: 1.0 },
            0.0,
        )
        .unwrap();
        assert!(matches!(case_selector(&p), Err(Error::AmbiguousCase(_))));
    }
}
