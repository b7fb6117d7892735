//! Tridiagonal kernels shared by the eigen, steady-state, characteristic and
//! time-stepping code. Everything here is O(n) in the number of unknowns.

use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Field scalar: `f64` or `Complex64`.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + PartialEq
    + std::fmt::Debug
    + Send
    + Sync
    + 'static
{
    const ZERO: Self;
    fn modulus(self) -> f64;
    fn from_real(x: f64) -> Self;
}

impl Scalar for f64 {
    const ZERO: Self = 0.0;
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn from_real(x: f64) -> Self {
        x
    }
}

impl Scalar for Complex64 {
    const ZERO: Self = Complex64::new(0.0, 0.0);
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
}

/// General tridiagonal matrix: `sub[i]` is entry (i+1, i), `sup[i]` is (i, i+1).
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiag<T> {
    pub sub: Vec<T>,
    pub diag: Vec<T>,
    pub sup: Vec<T>,
}

impl<T: Scalar> Tridiag<T> {
    pub fn new(sub: Vec<T>, diag: Vec<T>, sup: Vec<T>) -> Self {
        debug_assert_eq!(sub.len() + 1, diag.len().max(1));
        debug_assert_eq!(sup.len() + 1, diag.len().max(1));
        Self { sub, diag, sup }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let n = self.len();
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc = acc + self.sub[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                acc = acc + self.sup[i] * x[i + 1];
            }
            y.push(acc);
        }
        y
    }

    /// Adds `diag_shift` to the diagonal in place.
    pub fn add_diagonal(&mut self, diag_shift: &[T]) {
        for (d, s) in self.diag.iter_mut().zip(diag_shift) {
            *d = *d + *s;
        }
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i].modulus();
                if i > 0 {
                    s += self.sub[i - 1].modulus();
                }
                if i + 1 < n {
                    s += self.sup[i].modulus();
                }
                s
            })
            .fold(0.0, f64::max)
    }

    pub fn factor(&self) -> TridiagLu<T> {
        TridiagLu::new(self)
    }
}

/// LU factorization with partial pivoting (the `gttrf` layout).
#[derive(Debug, Clone)]
pub struct TridiagLu<T> {
    dl: Vec<T>,
    d: Vec<T>,
    du: Vec<T>,
    du2: Vec<T>,
    swapped: Vec<bool>,
    min_pivot: f64,
}

impl<T: Scalar> TridiagLu<T> {
    fn new(m: &Tridiag<T>) -> Self {
        let n = m.len();
        let mut dl = m.sub.clone();
        let mut d = m.diag.clone();
        let mut du = m.sup.clone();
        let mut du2 = vec![T::ZERO; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        let scale = m.norm_inf().max(f64::MIN_POSITIVE);

        for i in 0..n.saturating_sub(1) {
            if d[i].modulus() >= dl[i].modulus() {
                if d[i].modulus() != 0.0 {
                    let fact = dl[i] / d[i];
                    dl[i] = fact;
                    d[i + 1] = d[i + 1] - fact * du[i];
                }
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -(fact * du[i + 1]);
                }
                swapped[i] = true;
            }
        }
        // Exactly singular pivots are nudged; inverse iteration relies on
        // solving with a (nearly) singular matrix.
        let tiny = f64::EPSILON * scale;
        let mut min_pivot = f64::INFINITY;
        for p in d.iter_mut() {
            let a = p.modulus();
            min_pivot = min_pivot.min(a);
            if a == 0.0 {
                *p = T::from_real(tiny);
            }
        }
        Self {
            dl,
            d,
            du,
            du2,
            swapped,
            min_pivot: min_pivot / scale,
        }
    }

    /// Smallest pivot modulus relative to the matrix norm.
    pub fn relative_min_pivot(&self) -> f64 {
        self.min_pivot
    }

    pub fn solve_in_place(&self, b: &mut [T]) {
        let n = self.d.len();
        if n == 0 {
            return;
        }
        for i in 0..n - 1 {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.dl[i] * b[i];
            } else {
                b[i + 1] = b[i + 1] - self.dl[i] * b[i];
            }
        }
        b[n - 1] = b[n - 1] / self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Solves `m x = b`, failing when a pivot underflows relative to the matrix
/// norm.
pub fn solve_tridiag<T: Scalar>(m: &Tridiag<T>, b: &[T], what: &'static str) -> Result<Vec<T>> {
    let lu = m.factor();
    if lu.relative_min_pivot() < 1e3 * f64::EPSILON * f64::EPSILON {
        return Err(Error::Singular(what));
    }
    Ok(lu.solve(b))
}

/// Cheap lower bound on the 2-norm condition number: a few steps of
/// inverse power iteration against the infinity norm of the matrix.
pub fn condition_estimate<T: Scalar>(m: &Tridiag<T>, lu: &TridiagLu<T>) -> f64 {
    let n = m.len();
    if n == 0 {
        return 1.0;
    }
    let mut x: Vec<T> = (0..n)
        .map(|i| T::from_real(1.0 + 0.5 * ((i as f64) * 0.7).sin()))
        .collect();
    let mut growth = 0.0;
    for _ in 0..4 {
        let nx = norm2(&x);
        lu.solve_in_place(&mut x);
        let ny = norm2(&x);
        if !ny.is_finite() {
            return f64::INFINITY;
        }
        growth = ny / nx;
        for v in x.iter_mut() {
            *v = *v / T::from_real(ny);
        }
    }
    growth * m.norm_inf()
}

pub fn norm2<T: Scalar>(x: &[T]) -> f64 {
    x.iter().map(|v| v.modulus() * v.modulus()).sum::<f64>().sqrt()
}

pub fn norm_inf<T: Scalar>(x: &[T]) -> f64 {
    x.iter().map(|v| v.modulus()).fold(0.0, f64::max)
}

/// Symmetric tridiagonal matrix with real entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        self.to_general().matvec(x)
    }

    pub fn to_general(&self) -> Tridiag<f64> {
        Tridiag::new(self.off.clone(), self.diag.clone(), self.off.clone())
    }

    pub fn to_complex(&self) -> Tridiag<Complex64> {
        let c = |v: &Vec<f64>| v.iter().map(|&x| Complex64::new(x, 0.0)).collect::<Vec<_>>();
        Tridiag::new(c(&self.off), c(&self.diag), c(&self.off))
    }

    /// `self + s * diag(d)`.
    pub fn plus_diagonal(&self, s: f64, d: &[f64]) -> SymTridiag {
        SymTridiag {
            diag: self.diag.iter().zip(d).map(|(a, b)| a + s * b).collect(),
            off: self.off.clone(),
        }
    }

    pub fn scaled(&self, s: f64) -> SymTridiag {
        SymTridiag {
            diag: self.diag.iter().map(|a| s * a).collect(),
            off: self.off.iter().map(|a| s * a).collect(),
        }
    }

    /// Congruence `W^{-1/2} T W^{-1/2}` for a positive diagonal `w`.
    pub fn weighted(&self, w: &[f64]) -> SymTridiag {
        let n = self.len();
        SymTridiag {
            diag: (0..n).map(|i| self.diag[i] / w[i]).collect(),
            off: (0..n.saturating_sub(1))
                .map(|i| self.off[i] / (w[i] * w[i + 1]).sqrt())
                .collect(),
        }
    }

    /// Number of eigenvalues strictly below `x` (Sturm sequence count).
    pub fn count_below(&self, x: f64) -> usize {
        let n = self.len();
        let scale = self.gershgorin_radius().max(f64::MIN_POSITIVE);
        let tiny = f64::EPSILON * scale * 1e-3;
        let mut count = 0;
        let mut q = 1.0;
        for i in 0..n {
            let b2 = if i > 0 { self.off[i - 1] * self.off[i - 1] } else { 0.0 };
            q = self.diag[i] - x - if i > 0 { b2 / q } else { 0.0 };
            if q == 0.0 {
                q = -tiny;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut r = 0.0;
            if i > 0 {
                r += self.off[i - 1].abs();
            }
            if i + 1 < n {
                r += self.off[i].abs();
            }
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    fn gershgorin_radius(&self) -> f64 {
        let (lo, hi) = self.gershgorin();
        lo.abs().max(hi.abs())
    }

    /// The `k`-th smallest eigenvalue (0-based) by Sturm bisection.
    pub fn kth_eigenvalue(&self, k: usize) -> f64 {
        assert!(k < self.len(), "eigenvalue index out of range");
        let (mut lo, mut hi) = self.gershgorin();
        let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo <= 2.0 * f64::EPSILON * scale {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Eigenvector for a known (accurate) eigenvalue by inverse iteration.
    pub fn eigenvector(&self, eigenvalue: f64) -> Vec<f64> {
        let n = self.len();
        let shifted = self.plus_diagonal(-eigenvalue, &vec![1.0; n]).to_general();
        let lu = shifted.factor();
        let mut x: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.1 * ((i as f64 + 1.0) * 0.37).sin())
            .collect();
        for _ in 0..3 {
            lu.solve_in_place(&mut x);
            let nx = norm2(&x);
            for v in x.iter_mut() {
                *v /= nx;
            }
        }
        x
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Unconjugated bilinear form `sum a_i w_i b_i`.
pub fn bilinear(a: &[Complex64], w: &[f64], b: &[Complex64]) -> Complex64 {
    a.iter()
        .zip(w)
        .zip(b)
        .map(|((x, wi), y)| *x * *y * *wi)
        .sum()
}
