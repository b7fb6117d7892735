mod common;

use std::f64::consts::{FRAC_PI_2, PI};

use common::*;
use delay_hopf::domain::{BoundaryCondition, DiscreteProblem, Profile, Stiffness};
use delay_hopf::hopf::s_n;
use delay_hopf::normalform::{g_low, normal_form, w_fields, Direction, OrbitStability};
use num_complex::Complex64;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Scalar normal form of `v' = -lambda v(t - tau) (1 + v)` at its first Hopf
/// point, from the same center-manifold formulas with every field constant.
fn scalar_c1() -> Complex64 {
    let th = FRAC_PI_2;
    let lt = FRAC_PI_2;
    let s = 1.0 - lt * Complex64::from_polar(1.0, -th);
    let em = Complex64::from_polar(1.0, -th);
    let ep = em.conj();
    let g20 = -2.0 * lt / s * em;
    let g11 = -(lt / s) * (ep + em);
    let g02 = -2.0 * lt / s * ep;
    let e = 2.0 * em / (-(Complex64::from_polar(1.0, -2.0 * th)) - 2.0 * I);
    let f = Complex64::new(-(ep + em).re, 0.0);
    let p = |t: f64| Complex64::from_polar(1.0, th * t);
    let w20 = |t: f64| I * g20 / th * p(t) + I * g02.conj() / (3.0 * th) * p(t).conj() + e * p(2.0 * t);
    let w11 = |t: f64| -I * g11 / th * p(t) + I * g11.conj() / th * p(t).conj() + f;
    let g21 = -2.0 * lt / s * w11(-1.0) - lt / s * w20(-1.0) - lt / s * ep * w20(0.0)
        - 2.0 * lt / s * em * w11(0.0);
    I / (2.0 * th) * (g11 * g20 - 2.0 * g11.norm_sqr() - g02.norm_sqr() / 3.0) + g21 / 2.0
}

#[test]
fn hutchinson_matches_wright_amplitude_law() {
    // Wright's equation y' = -a y(t-1)(1+y) has bifurcating orbits of
    // amplitude sqrt(40 (a - pi/2) / (3 pi - 2)); with the crossing speed
    // Re dsigma/da = (pi/2)/(1 + pi^2/4) this fixes Re C1.
    let wright = -(3.0 * PI - 2.0) / 10.0 * FRAC_PI_2 / (1.0 + PI * PI / 4.0);
    for lambda in [0.5, 1.0, 3.0] {
        let pl = pipeline(hutchinson(32), lambda, 0);
        let nf = normal_form(&pl.problem, &pl.pair, &pl.state, &pl.ladder[0]).unwrap();
        assert!((nf.c1.re - wright).abs() < 1e-6, "{} vs {wright}", nf.c1.re);
        assert!((nf.c1 - scalar_c1()).norm() < 1e-10);
        assert_eq!(nf.direction, Direction::Forward);
        assert_eq!(nf.orbit_stability, OrbitStability::Stable);
        let expected_e = 2.0 * I / (2.0 * I - 1.0);
        assert!(nf.e.iter().all(|v| (v - expected_e).norm() < 1e-12));
        assert!(nf.f.iter().all(|v| v.norm() < 1e-12));
    }
}

#[test]
fn hutchinson_low_order_coefficients() {
    let pl = pipeline(hutchinson(32), 1.0, 0);
    let pt = &pl.ladder[0];
    let g = g_low(&pl.problem, &pl.state, pt).unwrap();
    let expected = -PI * (-I) / (1.0 + I * FRAC_PI_2);
    assert!((g.g20 - expected).norm() < 1e-12);
    let s = pt.s_n.unwrap();
    assert!((g.g02 - g.g20.conj() * s.conj() / s).norm() < 1e-12);
}

#[test]
fn low_order_coefficients_scale_with_psi() {
    let pl = pipeline(constant_dirichlet(100), 0.05, 0);
    let pt = pl.ladder[0].clone();
    let base = g_low(&pl.problem, &pl.state, &pt).unwrap();

    let mut doubled = pt.clone();
    for v in doubled.triplet.psi.iter_mut() {
        *v *= 2.0;
    }
    // With S_n held fixed the coefficients are cubic in psi ...
    let held = g_low(&pl.problem, &pl.state, &doubled).unwrap();
    assert!((held.g20.norm() / base.g20.norm() - 8.0).abs() < 1e-10);
    // ... and recomputing S_n (quadratic in psi) leaves them linear.
    doubled.s_n = Some(s_n(&pl.problem, &pl.state, &doubled).unwrap());
    let renorm = g_low(&pl.problem, &pl.state, &doubled).unwrap();
    assert!((renorm.g20.norm() / base.g20.norm() - 2.0).abs() < 1e-10);
}

#[test]
fn w_fields_at_the_endpoints() {
    let pl = pipeline(
        problem(BoundaryCondition::Dirichlet, 60, Profile::Sine { a0: -0.2, a1: 1.0, k: 1.0 }, 0.4),
        0.08,
        1,
    );
    let pt = &pl.ladder[1];
    let nf = normal_form(&pl.problem, &pl.pair, &pl.state, pt).unwrap();
    let g = g_low(&pl.problem, &pl.state, pt).unwrap();
    let nt = pt.triplet.nu * pt.tau_n;
    for (i, psi) in pt.triplet.psi.iter().enumerate() {
        let w20_0 = I * g.g20 / nt * psi + I * g.g02.conj() / (3.0 * nt) * psi.conj() + nf.e[i];
        assert!((w20_0 - nf.w.w20_0[i]).norm() < 1e-12 * w20_0.norm().max(1.0));
        let (c, s) = (nt.cos(), nt.sin());
        let back = Complex64::new(c, -s);
        let w20_m1 = I * g.g20 / nt * psi * back
            + I * g.g02.conj() / (3.0 * nt) * (psi * back).conj()
            + nf.e[i] * back * back;
        assert!((w20_m1 - nf.w.w20_m1[i]).norm() < 1e-12 * w20_m1.norm().max(1.0));
        let w11_m1 = -I * g.g11 / nt * psi * back + I * g.g11.conj() / nt * (psi * back).conj() + nf.f[i];
        assert!((w11_m1 - nf.w.w11_m1[i]).norm() < 1e-12 * w11_m1.norm().max(1.0));
    }
    // With g11 switched off w11 is exactly F.
    let zero = delay_hopf::normalform::LowOrder { g11: Complex64::new(0.0, 0.0), ..g };
    let w = w_fields(pt, &zero, &nf.e, &nf.f);
    assert_eq!(w.w11_0, nf.f);
    assert_eq!(w.w11_m1, nf.f);
}

#[test]
fn near_threshold_asymptotics() {
    let p = constant_dirichlet(200);
    let mut last_g11 = f64::INFINITY;
    let mut last_f = f64::INFINITY;
    for d in [0.04, 0.02, 0.01] {
        let pl = pipeline(p.clone(), d, 0);
        let nf = normal_form(&pl.problem, &pl.pair, &pl.state, &pl.ladder[0]).unwrap();
        let g11 = (d * nf.g11).norm();
        assert!(g11 < last_g11);
        last_g11 = g11;
        // F = eta / (lambda - lambda_*) with eta -> 0.
        let f = d * nf.f.iter().fold(0.0f64, |m, v| m.max(v.norm()));
        assert!(f < last_f);
        last_f = f;
        assert!((d * d * nf.g21).re < 0.0);
        assert!((d * d * nf.c1).re < 0.0);
        assert_eq!(nf.direction, Direction::Forward);
        assert_eq!(nf.orbit_stability, OrbitStability::Stable);
    }
}

#[test]
fn scaled_c_lambda_limit() {
    let pl = pipeline(constant_dirichlet(400), 0.01, 0);
    let nf = normal_form(&pl.problem, &pl.pair, &pl.state, &pl.ladder[0]).unwrap();
    let beta = 3.0 * PI / 8.0;
    let target = 2.0 * I / (beta * beta * (2.0 * I - 1.0));
    assert!((target - Complex64::new(0.5764, -0.2882)).norm() < 1e-3);
    let got = nf.c_lambda_scaled.unwrap();
    assert!((got - target).norm() < 0.15 * target.norm(), "{got} vs {target}");
    assert!((nf.c_lambda_limit_beta.unwrap() - target).norm() < 1e-3);
    assert!(nf.c_lambda_limit_alpha.is_none());
}

fn doubled_weights(p: &DiscreteProblem) -> DiscreteProblem {
    let mut q = p.clone();
    let twice = |v: &mut Vec<f64>| v.iter_mut().for_each(|x| *x *= 2.0);
    twice(&mut q.quad);
    twice(&mut q.w);
    twice(&mut q.b);
    twice(&mut q.w2);
    q.a = Stiffness {
        faces: p.a.faces.iter().map(|c| 2.0 * c).collect(),
        left: 2.0 * p.a.left,
        right: 2.0 * p.a.right,
    };
    q
}

#[test]
fn c1_is_invariant_under_weight_doubling() {
    let p = problem(BoundaryCondition::Dirichlet, 80, Profile::Sine { a0: -0.1, a1: 1.0, k: 1.0 }, 0.5);
    let a = pipeline(p.clone(), 0.05, 0);
    let b = pipeline(doubled_weights(&p), 0.05, 0);
    let ca = normal_form(&a.problem, &a.pair, &a.state, &a.ladder[0]).unwrap().c1;
    let cb = normal_form(&b.problem, &b.pair, &b.state, &b.ladder[0]).unwrap().c1;
    assert!((ca - cb).norm() < 1e-9 * ca.norm(), "{ca} vs {cb}");
}

#[test]
fn classification_is_stable_under_refinement() {
    let flags = |n| {
        let pl = pipeline(
            problem(BoundaryCondition::Dirichlet, n, Profile::Sine { a0: -0.1, a1: 1.0, k: 1.0 }, 0.5),
            0.03,
            1,
        );
        pl.ladder
            .iter()
            .map(|pt| {
                let nf = normal_form(&pl.problem, &pl.pair, &pl.state, pt).unwrap();
                (nf.direction, nf.orbit_stability, nf.c1)
            })
            .collect::<Vec<_>>()
    };
    let c = flags(100);
    let f = flags(200);
    for (x, y) in c.iter().zip(&f) {
        assert_eq!((x.0, x.1), (y.0, y.1));
        assert!((x.2 - y.2).norm() < 1e-2 * y.2.norm());
    }
}
