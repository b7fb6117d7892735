//! Principal eigenpair of `-(e^{alpha m} v')' = lambda m e^{alpha m} v`.
//!
//! The weight `m e^{alpha m}` is indefinite, so the pencil `(A, B)` is not
//! definite. Instead we track `kappa(lambda)`, the smallest eigenvalue of the
//! definite pencil `(A - lambda B, W)`. It is concave in `lambda`, and the
//! principal eigenvalue is its first positive root.

use crate::domain::DiscreteProblem;
use crate::error::{Error, Result};
use crate::hopf::case_selector;
use crate::linalg::{norm_inf, SymTridiag};

/// Largest upper bracket tried before giving up.
pub const BRACKET_CAP: f64 = 1_048_576.0;

/// Spectra with `lambda_2` below this are reported as degenerate.
pub const SECOND_EIGENVALUE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaseTag {
    Dirichlet,
    /// No-flux with `int m e^{alpha m} < 0`: positive principal eigenvalue.
    NoFluxCaseI,
    /// No-flux with `int m e^{alpha m} > 0`: `lambda_* = 0`, constant eigenfunction.
    NoFluxCaseII,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalPair {
    pub lambda_star: f64,
    /// Strictly positive, normalized to `max phi = 1`.
    pub phi: Vec<f64>,
    pub rayleigh_residual: f64,
    pub case_tag: CaseTag,
}

fn shifted_pencil(problem: &DiscreteProblem, lambda: f64) -> SymTridiag {
    problem.a.to_sym().plus_diagonal(-lambda, &problem.b)
}

/// Smallest eigenvalue of `(A - lambda B) v = kappa W v`.
pub fn kappa(problem: &DiscreteProblem, lambda: f64) -> f64 {
    shifted_pencil(problem, lambda).weighted(&problem.w).kth_eigenvalue(0)
}

/// Scale of `W^{-1} A`, used to make root-finding tolerances relative.
fn operator_scale(problem: &DiscreteProblem) -> f64 {
    let a = problem.a.to_sym();
    a.diag
        .iter()
        .zip(&problem.w)
        .map(|(d, w)| d / w)
        .fold(0.0, f64::max)
        .max(1.0)
}

pub fn principal_eigenpair(problem: &DiscreteProblem) -> Result<PrincipalPair> {
    if !(problem.max_m() > 0.0) {
        return Err(Error::Assumption(format!(
            "max m = {} must be positive",
            problem.max_m()
        )));
    }
    let case_tag = case_selector(problem)?;
    if case_tag == CaseTag::NoFluxCaseII {
        return Ok(PrincipalPair {
            lambda_star: 0.0,
            phi: vec![1.0; problem.unknowns()],
            rayleigh_residual: 0.0,
            case_tag,
        });
    }

    let scale = operator_scale(problem);
    let tol = 1e-12 * scale;
    let mut trace = Vec::new();

    // Bracket by doubling.
    let mut lo = 0.0;
    let mut hi = 1.0;
    loop {
        let k = kappa(problem, hi);
        trace.push((hi, k));
        if k < 0.0 {
            break;
        }
        lo = hi;
        hi *= 2.0;
        if hi > BRACKET_CAP {
            return Err(Error::Bracket {
                cap: BRACKET_CAP,
                trace,
            });
        }
    }

    // Bisection down to a modest relative width, keeping lo > 0.
    let mut f_hi = kappa(problem, hi);
    let mut f_lo = if lo > 0.0 { kappa(problem, lo) } else { f64::NAN };
    for _ in 0..200 {
        if lo > 0.0 && hi - lo <= 1e-3 * lo {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let f = kappa(problem, mid);
        if f >= 0.0 {
            lo = mid;
            f_lo = f;
        } else {
            hi = mid;
            f_hi = f;
        }
    }

    // Safeguarded secant inside the bracket.
    let mut root = hi;
    let mut converged = false;
    let mut history = Vec::new();
    for _ in 0..100 {
        let cand = if f_lo.is_finite() && f_lo != f_hi {
            hi - f_hi * (hi - lo) / (f_hi - f_lo)
        } else {
            0.5 * (lo + hi)
        };
        let x = if cand > lo && cand < hi { cand } else { 0.5 * (lo + hi) };
        let f = kappa(problem, x);
        history.push(f.abs());
        root = x;
        if f.abs() < tol || hi - lo <= 4.0 * f64::EPSILON * hi {
            converged = true;
            break;
        }
        if f >= 0.0 {
            lo = x;
            f_lo = f;
        } else {
            hi = x;
            f_hi = f;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            stage: "principal eigenvalue root-find",
            iterations: history.len(),
            history,
        });
    }

    let (lambda_star, phi) = polish(problem, root)?;
    if let Some((i, v)) = phi.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::Positivity(format!(
            "principal eigenfunction is {v:e} at unknown {i}"
        )));
    }
    let mut pair = PrincipalPair {
        lambda_star,
        phi,
        rayleigh_residual: 0.0,
        case_tag,
    };
    pair.rayleigh_residual = rayleigh_identity_residual(problem, &pair);
    Ok(pair)
}

/// Eigenvector at the root, then Rayleigh-quotient refinement of the
/// pencil `(A, B)`.
fn polish(problem: &DiscreteProblem, lambda0: f64) -> Result<(f64, Vec<f64>)> {
    let s = shifted_pencil(problem, lambda0).weighted(&problem.w);
    let k0 = s.kth_eigenvalue(0);
    let y = s.eigenvector(k0);
    let mut v: Vec<f64> = y.iter().zip(&problem.w).map(|(a, w)| a / w.sqrt()).collect();
    normalize_positive(&mut v);

    let a = problem.a.to_sym();
    let mut lambda = lambda0;
    for _ in 0..8 {
        let av = problem.a.matvec(&v);
        let bv: Vec<f64> = v.iter().zip(&problem.b).map(|(x, b)| x * b).collect();
        let vav: f64 = v.iter().zip(&av).map(|(x, y)| x * y).sum();
        let vbv: f64 = v.iter().zip(&bv).map(|(x, y)| x * y).sum();
        if !(vbv > 0.0) {
            return Err(Error::Assumption(
                "principal eigenfunction has non-positive weighted mass".into(),
            ));
        }
        lambda = vav / vbv;
        let r: Vec<f64> = av.iter().zip(&bv).map(|(x, y)| x - lambda * y).collect();
        if norm_inf(&r) <= 1e-14 * norm_inf(&av) {
            break;
        }
        let lu = a.plus_diagonal(-lambda, &problem.b).to_general().factor();
        let mut x = bv;
        lu.solve_in_place(&mut x);
        v = x;
        normalize_positive(&mut v);
    }
    Ok((lambda, v))
}

fn normalize_positive(v: &mut [f64]) {
    let sign = if v.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    let max = v.iter().map(|x| sign * x).fold(f64::NEG_INFINITY, f64::max);
    for x in v.iter_mut() {
        *x *= sign / max;
    }
}

/// `|lambda_* <phi, B phi> - <phi, A phi>| / <phi, A phi>`; zero when both
/// sides vanish.
pub fn rayleigh_identity_residual(problem: &DiscreteProblem, pair: &PrincipalPair) -> f64 {
    let phi = &pair.phi;
    let aphi = problem.a.matvec(phi);
    let paf: f64 = phi.iter().zip(&aphi).map(|(x, y)| x * y).sum();
    let pbf: f64 = phi.iter().zip(&problem.b).map(|(x, b)| x * x * b).sum();
    let diff = (pair.lambda_star * pbf - paf).abs();
    if paf == 0.0 {
        diff
    } else {
        diff / paf
    }
}

/// `||A phi - lambda_* B phi||_inf / ||A phi||_inf`.
pub fn eigen_residual(problem: &DiscreteProblem, pair: &PrincipalPair) -> f64 {
    let aphi = problem.a.matvec(&pair.phi);
    let r: Vec<f64> = aphi
        .iter()
        .zip(&pair.phi)
        .zip(&problem.b)
        .map(|((a, p), b)| a - pair.lambda_star * b * p)
        .collect();
    let scale = norm_inf(&aphi);
    if scale == 0.0 {
        norm_inf(&r)
    } else {
        norm_inf(&r) / scale
    }
}

/// Second-smallest eigenvalue of `(A - lambda_* B) v = lambda_2 W v`, i.e.
/// of `-L` in the `e^{alpha m}`-weighted sense.
pub fn second_eigenvalue(problem: &DiscreteProblem, pair: &PrincipalPair) -> Result<f64> {
    let s = shifted_pencil(problem, pair.lambda_star).weighted(&problem.w);
    let l2 = s.kth_eigenvalue(1);
    if l2 <= SECOND_EIGENVALUE_FLOOR {
        return Err(Error::DegenerateSpectrum(l2));
    }
    Ok(l2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{assemble, make_grid, BoundaryCondition, Profile};
    use std::f64::consts::PI;

    fn problem(bc: BoundaryCondition, n: usize, m: Profile, alpha: f64) -> DiscreteProblem {
        assemble(&make_grid(PI, n, bc).unwrap(), &m, alpha).unwrap()
    }

    #[test]
    fn constant_dirichlet_eigenpair() {
        let p = problem(BoundaryCondition::Dirichlet, 400, Profile::Constant(1.0), 0.0);
        let pair = principal_eigenpair(&p).unwrap();
        assert_eq!(pair.case_tag, CaseTag::Dirichlet);
        assert!((pair.lambda_star - 1.0).abs() < 1e-4);
        let err = pair
            .phi
            .iter()
            .zip(p.grid.unknown_nodes())
            .map(|(f, x)| (f - x.sin()).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-4, "phi vs sin: {err}");
        assert!(pair.rayleigh_residual < 1e-10);
        assert!(eigen_residual(&p, &pair) < 1e-9);
    }

    #[test]
    fn case_two_returns_zero_and_constant() {
        let p = problem(
            BoundaryCondition::NoFlux,
            100,
            Profile::Cosine { a0: 0.0, a1: 1.0, k: 1.0 },
            1.0,
        );
        let pair = principal_eigenpair(&p).unwrap();
        assert_eq!(pair.case_tag, CaseTag::NoFluxCaseII);
        assert_eq!(pair.lambda_star, 0.0);
        assert!(pair.phi.iter().all(|&v| v == 1.0));
        assert_eq!(rayleigh_identity_residual(&p, &pair), 0.0);
    }

    #[test]
    fn case_one_has_positive_principal_eigenvalue() {
        let p = problem(
            BoundaryCondition::NoFlux,
            200,
            Profile::Cosine { a0: -0.2, a1: 1.0, k: 1.0 },
            0.0,
        );
        let pair = principal_eigenpair(&p).unwrap();
        assert_eq!(pair.case_tag, CaseTag::NoFluxCaseI);
        assert!(pair.lambda_star > 0.0);
        assert!(pair.phi.iter().all(|&v| v > 0.0));
        assert!(pair.rayleigh_residual < 1e-10);
        assert!(eigen_residual(&p, &pair) < 1e-9);
    }

    #[test]
    fn assumption_gate() {
        let p = problem(BoundaryCondition::Dirichlet, 50, Profile::Constant(-1.0), 0.0);
        assert!(matches!(principal_eigenpair(&p), Err(Error::Assumption(_))));
    }

    #[test]
    fn second_eigenvalues_of_constant_problems() {
        let p = problem(BoundaryCondition::Dirichlet, 400, Profile::Constant(1.0), 0.0);
        let pair = principal_eigenpair(&p).unwrap();
        assert!((second_eigenvalue(&p, &pair).unwrap() - 3.0).abs() < 1e-3);

        let p = problem(BoundaryCondition::NoFlux, 400, Profile::Constant(1.0), 0.0);
        let pair = principal_eigenpair(&p).unwrap();
        assert_eq!(pair.case_tag, CaseTag::NoFluxCaseII);
        assert!((second_eigenvalue(&p, &pair).unwrap() - 1.0).abs() < 1e-3);
    }
}
