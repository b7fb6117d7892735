//! Positive steady state of
//! `(e^{alpha m} u')' + lambda e^{alpha m} u (m - e^{alpha m} u) = 0`
//! and its bifurcation expansion `u = beta (lambda - lambda_*) [phi + (lambda - lambda_*) xi]`.

use crate::domain::{DiscreteProblem, Field};
use crate::eigen::{CaseTag, PrincipalPair};
use crate::error::{Error, Result};
use crate::hopf::mbar;
use crate::linalg::{norm_inf, SymTridiag, Tridiag};

pub const NEWTON_MAX_ITERS: usize = 50;
pub const NEWTON_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub lambda: f64,
    pub lambda_star: f64,
    pub case_tag: CaseTag,
    pub u: Field,
    /// `<phi, u> / ((lambda - lambda_*) <phi, phi>)`; absent in case II.
    pub beta: Option<f64>,
    /// Remainder of the expansion, orthogonal to `phi`; absent in case II.
    pub xi: Option<Field>,
    pub newton_residual: f64,
    pub newton_iters: usize,
    pub residual_history: Vec<f64>,
    pub expansion_error: Option<f64>,
}

fn require_positive_lambda_star(pair: &PrincipalPair) -> Result<()> {
    if pair.case_tag == CaseTag::NoFluxCaseII || pair.lambda_star <= 0.0 {
        return Err(Error::WrongCase(
            "expansion data needs a positive principal eigenvalue".into(),
        ));
    }
    Ok(())
}

/// `int m e^{alpha m} phi^2 / (lambda_* int e^{2 alpha m} phi^3)`.
pub fn beta_star(pair: &PrincipalPair, problem: &DiscreteProblem) -> Result<f64> {
    require_positive_lambda_star(pair)?;
    problem.check_len(pair.phi.len())?;
    let phi = &pair.phi;
    let num: f64 = phi.iter().zip(&problem.b).map(|(p, b)| b * p * p).sum();
    let den: f64 = phi.iter().zip(&problem.w2).map(|(p, w)| w * p * p * p).sum();
    Ok(num / (pair.lambda_star * den))
}

/// Solution of a singular system `(A - lambda_* B) xi = g` on the complement
/// of `phi`.
#[derive(Debug, Clone, PartialEq)]
pub struct BorderedSolution {
    pub xi: Field,
    /// Coefficient of `phi` removed from the strong-form right-hand side to
    /// make it consistent.
    pub multiplier: f64,
    /// Strong-form residual `||(A - lambda_* B) xi - g||_inf / quad`.
    pub residual: f64,
}

/// Solves `(A - lambda_* B) xi = g - mu quad phi`, `<phi, xi> = 0`, where
/// `g` is a weak-form right-hand side.
///
/// The bordered matrix is never formed. `A - lambda_* B` is positive
/// semidefinite with kernel `phi`, so deleting the row and column where `phi`
/// peaks leaves two nonsingular tridiagonal blocks; the kernel component is
/// restored by projection afterwards.
pub fn bordered_solve(
    problem: &DiscreteProblem,
    pair: &PrincipalPair,
    g: &[f64],
) -> Result<BorderedSolution> {
    problem.check_len(g.len())?;
    let phi = &pair.phi;
    let q = &problem.quad;
    let n = phi.len();

    let qphi: Vec<f64> = phi.iter().zip(q).map(|(p, w)| p * w).collect();
    let phi_qphi: f64 = phi.iter().zip(&qphi).map(|(a, b)| a * b).sum();
    let multiplier = phi.iter().zip(g).map(|(a, b)| a * b).sum::<f64>() / phi_qphi;
    let rhs: Vec<f64> = g.iter().zip(&qphi).map(|(gi, c)| gi - multiplier * c).collect();

    let p = problem
        .a
        .to_sym()
        .plus_diagonal(-pair.lambda_star, &problem.b);
    let k = phi
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc })
        .0;

    let mut xi = vec![0.0; n];
    let block = |lo: usize, hi: usize, xi: &mut [f64]| -> Result<()> {
        if lo >= hi {
            return Ok(());
        }
        let sub = SymTridiag {
            diag: p.diag[lo..hi].to_vec(),
            off: p.off[lo..hi - 1].to_vec(),
        };
        let m: Tridiag<f64> = sub.to_general();
        let x = crate::linalg::solve_tridiag(&m, &rhs[lo..hi], "bordered steady-state solve")?;
        xi[lo..hi].copy_from_slice(&x);
        Ok(())
    };
    block(0, k, &mut xi)?;
    block(k + 1, n, &mut xi)?;

    let c = xi.iter().zip(&qphi).map(|(a, b)| a * b).sum::<f64>() / phi_qphi;
    for (x, p) in xi.iter_mut().zip(phi) {
        *x -= c * p;
    }

    let pxi = problem.a.matvec(&xi);
    let residual = pxi
        .iter()
        .zip(&xi)
        .zip(&problem.b)
        .zip(&rhs)
        .zip(q)
        .map(|((((a, x), b), r), w)| ((a - pair.lambda_star * b * x - r) / w).abs())
        .fold(0.0, f64::max);
    Ok(BorderedSolution {
        xi,
        multiplier,
        residual,
    })
}

/// Second-order expansion field: `L xi = -phi (m e^{alpha m} - lambda_* beta e^{2 alpha m} phi)`,
/// `<phi, xi> = 0`.
pub fn xi_star(pair: &PrincipalPair, problem: &DiscreteProblem, beta_star: f64) -> Result<Field> {
    require_positive_lambda_star(pair)?;
    problem.check_len(pair.phi.len())?;
    let g: Vec<f64> = pair
        .phi
        .iter()
        .zip(&problem.b)
        .zip(&problem.w2)
        .map(|((p, b), w2)| b * p - pair.lambda_star * beta_star * w2 * p * p)
        .collect();
    let strong: Vec<f64> = g.iter().zip(&problem.quad).map(|(a, w)| a / w).collect();
    let scale = norm_inf(&strong).max(f64::MIN_POSITIVE);
    let sol = bordered_solve(problem, pair, &g)?;
    let limit = 1e-8 * scale;
    if sol.multiplier.abs() > limit {
        return Err(Error::Inconsistent {
            multiplier: sol.multiplier,
            limit,
        });
    }
    if sol.residual > 1e-9 * scale.max(1.0) {
        return Err(Error::NonConvergence {
            stage: "expansion field solve",
            iterations: 1,
            history: vec![sol.residual],
        });
    }
    Ok(sol.xi)
}

/// Weak-form residual `-A u + lambda (B u - W2 u^2)`.
fn weak_residual(problem: &DiscreteProblem, lambda: f64, u: &[f64]) -> Vec<f64> {
    let au = problem.a.matvec(u);
    au.iter()
        .zip(u)
        .zip(&problem.b)
        .zip(&problem.w2)
        .map(|(((a, x), b), w2)| -a + lambda * (b * x - w2 * x * x))
        .collect()
}

/// Residual in strong-form units (divided by the quadrature weights).
pub fn scaled_residual(problem: &DiscreteProblem, lambda: f64, u: &[f64]) -> f64 {
    weak_residual(problem, lambda, u)
        .iter()
        .zip(&problem.quad)
        .map(|(r, w)| (r / w).abs())
        .fold(0.0, f64::max)
}

fn newton(problem: &DiscreteProblem, lambda: f64, seed: Field) -> Result<(Field, usize, Vec<f64>)> {
    let a = problem.a.to_sym();
    let mut u = seed;
    let mut res = scaled_residual(problem, lambda, &u);
    let mut history = vec![res];
    for iter in 0..NEWTON_MAX_ITERS {
        if res <= 1e-3 * NEWTON_TOL {
            return Ok((u, iter, history));
        }
        let jac_diag: Vec<f64> = problem
            .b
            .iter()
            .zip(&problem.w2)
            .zip(&u)
            .map(|((b, w2), x)| b - 2.0 * w2 * x)
            .collect();
        // J = -A + lambda diag(B - 2 W2 u); solve (A - lambda diag) delta = F.
        let m = a.plus_diagonal(-lambda, &jac_diag).to_general();
        let f = weak_residual(problem, lambda, &u);
        let delta = crate::linalg::solve_tridiag(&m, &f, "steady-state Newton step")?;

        let mut t = 1.0;
        let (next, next_res) = loop {
            let cand: Vec<f64> = u.iter().zip(&delta).map(|(x, d)| x + t * d).collect();
            let r = scaled_residual(problem, lambda, &cand);
            if r < res || t < 1.0 / 1024.0 {
                break (cand, r);
            }
            t *= 0.5;
        };
        let step = t * norm_inf(&delta);
        let stalled = next_res >= res;
        u = next;
        res = next_res.min(res);
        history.push(next_res);
        let small_step = step <= 1e-14 * norm_inf(&u).max(f64::MIN_POSITIVE);
        if res <= NEWTON_TOL && (small_step || stalled) {
            return Ok((u, iter + 1, history));
        }
    }
    if res <= NEWTON_TOL {
        return Ok((u, NEWTON_MAX_ITERS, history));
    }
    Err(Error::NonConvergence {
        stage: "steady-state Newton",
        iterations: NEWTON_MAX_ITERS,
        history,
    })
}

/// Seed near the bifurcation: the two-term expansion, or `mbar` in Case II.
fn local_seed(problem: &DiscreteProblem, pair: &PrincipalPair, lambda: f64) -> Result<Field> {
    let n = problem.unknowns();
    Ok(match pair.case_tag {
        CaseTag::NoFluxCaseII => vec![mbar(problem)?; n],
        _ => {
            let b0 = beta_star(pair, problem)?;
            let xi0 = xi_star(pair, problem, b0)?;
            let s = lambda - pair.lambda_star;
            pair.phi
                .iter()
                .zip(&xi0)
                .map(|(p, x)| b0 * s * (p + s * x))
                .collect()
        }
    })
}

type NewtonOutcome = (Field, usize, Vec<f64>);

/// Newton from `seed`, rejecting the trivial branch and sign changes beyond roundoff.
fn positive_newton(problem: &DiscreteProblem, lambda: f64, seed: Field) -> Result<NewtonOutcome> {
    let scale = norm_inf(&seed);
    let out = newton(problem, lambda, seed)?;
    let u = &out.0;
    let top = norm_inf(u);
    if top <= 1e-3 * scale {
        return Err(Error::Positivity(format!(
            "Newton fell onto the trivial branch at lambda = {lambda}"
        )));
    }
    // Values within roundoff of zero occur where the population is exponentially small.
    if let Some((i, v)) = u.iter().enumerate().find(|(_, v)| !(**v > -1e-12 * top)) {
        return Err(Error::Positivity(format!(
            "steady state is {v:e} at unknown {i} for lambda = {lambda}"
        )));
    }
    Ok(out)
}

/// Local seed first, then the large-lambda profile `max(m, 0) e^{-alpha m}`,
/// then natural continuation up from a point close to `lambda_*`.
fn solve_branch(problem: &DiscreteProblem, pair: &PrincipalPair, lambda: f64) -> Result<NewtonOutcome> {
    let first = match positive_newton(problem, lambda, local_seed(problem, pair, lambda)?) {
        Ok(out) => return Ok(out),
        Err(e) => e,
    };
    let limit: Field = problem
        .m
        .iter()
        .zip(&problem.exp_am)
        .map(|(m, e)| m.max(0.0) / e)
        .collect();
    if let Ok(out) = positive_newton(problem, lambda, limit) {
        return Ok(out);
    }
    let ls = pair.lambda_star;
    let base = if ls > 0.0 { ls } else { 0.0 };
    let mut start = None;
    for j in 1..=30 {
        let l = base + (lambda - base) * 0.5f64.powi(j);
        if let Ok(out) = positive_newton(problem, l, local_seed(problem, pair, l)?) {
            start = Some((l, out));
            break;
        }
    }
    let Some((mut l, mut out)) = start else {
        return Err(first);
    };
    let mut total = out.1;
    while l < lambda {
        let next = (base + (l - base) * 1.5).min(lambda);
        let step = positive_newton(problem, next, out.0.clone())?;
        total += step.1;
        out = step;
        l = next;
    }
    out.1 = total;
    Ok(out)
}

pub fn steady_state(
    problem: &DiscreteProblem,
    pair: &PrincipalPair,
    lambda: f64,
) -> Result<SteadyState> {
    problem.check_len(pair.phi.len())?;
    let ls = pair.lambda_star;
    if !(lambda > ls) {
        return Err(Error::Assumption(format!(
            "lambda = {lambda} must exceed lambda_* = {ls}"
        )));
    }

    let (u, newton_iters, residual_history) = solve_branch(problem, pair, lambda)?;
    let newton_residual = scaled_residual(problem, lambda, &u);

    let mut state = SteadyState {
        lambda,
        lambda_star: ls,
        case_tag: pair.case_tag,
        u,
        beta: None,
        xi: None,
        newton_residual,
        newton_iters,
        residual_history,
        expansion_error: None,
    };
    if pair.case_tag != CaseTag::NoFluxCaseII {
        let s = lambda - ls;
        let q = &problem.quad;
        let pu: f64 = pair.phi.iter().zip(&state.u).zip(q).map(|((p, x), w)| p * x * w).sum();
        let pp: f64 = pair.phi.iter().zip(q).map(|(p, w)| p * p * w).sum();
        let beta = pu / (s * pp);
        let xi = state
            .u
            .iter()
            .zip(&pair.phi)
            .map(|(x, p)| (x / (beta * s) - p) / s)
            .collect();
        state.beta = Some(beta);
        state.xi = Some(xi);
        state.expansion_error = expansion_error(&state, pair);
    }
    Ok(state)
}

/// `||u - beta (lambda - lambda_*) [phi + (lambda - lambda_*) xi]||_inf`.
pub fn expansion_error(state: &SteadyState, pair: &PrincipalPair) -> Option<f64> {
    let beta = state.beta?;
    let xi = state.xi.as_ref()?;
    let s = state.lambda - pair.lambda_star;
    Some(
        state
            .u
            .iter()
            .zip(&pair.phi)
            .zip(xi)
            .map(|((u, p), x)| (u - beta * s * (p + s * x)).abs())
            .fold(0.0, f64::max),
    )
}
