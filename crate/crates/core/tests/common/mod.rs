#![allow(dead_code)]

use std::f64::consts::PI;

use delay_hopf::domain::{assemble, make_grid, BoundaryCondition, DiscreteProblem, Profile};
use delay_hopf::eigen::{principal_eigenpair, PrincipalPair};
use delay_hopf::hopf::{hopf_points, HopfPoint};
use delay_hopf::steady::{steady_state, SteadyState};
use nalgebra::DMatrix;

pub fn problem(bc: BoundaryCondition, n: usize, m: Profile, alpha: f64) -> DiscreteProblem {
    assemble(&make_grid(PI, n, bc).unwrap(), &m, alpha).unwrap()
}

pub fn constant_dirichlet(n: usize) -> DiscreteProblem {
    problem(BoundaryCondition::Dirichlet, n, Profile::Constant(1.0), 0.0)
}

pub fn hutchinson(n: usize) -> DiscreteProblem {
    problem(BoundaryCondition::NoFlux, n, Profile::Constant(1.0), 0.0)
}

pub fn cosine_case_two(n: usize) -> DiscreteProblem {
    problem(
        BoundaryCondition::NoFlux,
        n,
        Profile::Cosine { a0: 0.0, a1: 1.0, k: 1.0 },
        1.0,
    )
}

pub struct Pipeline {
    pub problem: DiscreteProblem,
    pub pair: PrincipalPair,
    pub state: SteadyState,
    pub ladder: Vec<HopfPoint>,
}

/// Eigenpair, steady state at `lambda_* + offset` and the ladder up to `n_max`.
pub fn pipeline(problem: DiscreteProblem, offset: f64, n_max: usize) -> Pipeline {
    let pair = principal_eigenpair(&problem).unwrap();
    let state = steady_state(&problem, &pair, pair.lambda_star + offset).unwrap();
    let ladder = hopf_points(&problem, &pair, &state, n_max).unwrap();
    Pipeline {
        problem,
        pair,
        state,
        ladder,
    }
}

pub fn dense_stiffness(p: &DiscreteProblem) -> DMatrix<f64> {
    let s = p.a.to_sym();
    let n = s.diag.len();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            s.diag[i]
        } else if i + 1 == j {
            s.off[i]
        } else if j + 1 == i {
            s.off[j]
        } else {
            0.0
        }
    })
}

/// Composite Simpson rule on `[a, b]` with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let x = a + i as f64 * h;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    s * h / 3.0
}

pub fn quad_dot(p: &DiscreteProblem, a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).zip(&p.quad).map(|((x, y), w)| x * y * w).sum()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
