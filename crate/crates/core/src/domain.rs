//! One-dimensional grid, growth-rate profiles and the discrete flux-form
//! operator `-(e^{alpha m} u')'` together with its quadrature weights.
//!
//! All matrices are in weak (row-multiplied-by-quadrature-weight) form, so
//! `<u, A u>` approximates `int e^{alpha m} |u'|^2` and the weights
//! `W`, `B`, `W2` are diagonal.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::SymTridiag;

/// Flux-form stiffness matrix of `-(e^{alpha m} u')'`.
///
/// `faces[j]` is the conductance `e^{alpha m(x_{j+1/2})}/h` between unknowns
/// `j` and `j+1`; the boundary entries are the conductances to the pinned
/// Dirichlet values (zero for no-flux).
#[derive(Debug, Clone, PartialEq)]
pub struct Stiffness {
    pub faces: Vec<f64>,
    pub left: f64,
    pub right: f64,
}

impl Stiffness {
    pub fn len(&self) -> usize {
        self.faces.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Applies the operator face by face, so constants are annihilated
    /// exactly when both boundary conductances vanish.
    pub fn matvec(&self, u: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut y = vec![0.0; n];
        y[0] += self.left * u[0];
        y[n - 1] += self.right * u[n - 1];
        for (j, c) in self.faces.iter().enumerate() {
            let flux = c * (u[j] - u[j + 1]);
            y[j] += flux;
            y[j + 1] -= flux;
        }
        y
    }

    pub fn to_sym(&self) -> SymTridiag {
        let n = self.len();
        let diag = (0..n)
            .map(|j| {
                let l = if j == 0 { self.left } else { self.faces[j - 1] };
                let r = if j + 1 == n { self.right } else { self.faces[j] };
                l + r
            })
            .collect();
        SymTridiag {
            diag,
            off: self.faces.iter().map(|c| -c).collect(),
        }
    }
}

/// Real nodal values on the unknowns of a grid.
pub type Field = Vec<f64>;
/// Complex nodal values on the unknowns of a grid.
pub type ComplexField = Vec<Complex64>;

/// Smallest grid accepted by [`assemble`].
pub const MIN_ASSEMBLY_CELLS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryCondition {
    Dirichlet,
    NoFlux,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub length: f64,
    pub n_cells: usize,
    pub nodes: Vec<f64>,
    pub spacing: f64,
    pub bc: BoundaryCondition,
}

impl Grid {
    /// Number of unknowns: interior nodes for Dirichlet, all nodes for no-flux.
    pub fn unknowns(&self) -> usize {
        match self.bc {
            BoundaryCondition::Dirichlet => self.n_cells - 1,
            BoundaryCondition::NoFlux => self.n_cells + 1,
        }
    }

    /// Index of the first unknown node.
    pub fn first_unknown(&self) -> usize {
        match self.bc {
            BoundaryCondition::Dirichlet => 1,
            BoundaryCondition::NoFlux => 0,
        }
    }

    /// Node coordinates of the unknowns.
    pub fn unknown_nodes(&self) -> &[f64] {
        let first = self.first_unknown();
        &self.nodes[first..first + self.unknowns()]
    }

    /// Trapezoid weights on the unknowns.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let h = self.spacing;
        let first = self.first_unknown();
        (first..first + self.unknowns())
            .map(|i| if i == 0 || i == self.n_cells { 0.5 * h } else { h })
            .collect()
    }

    /// Lifts unknown values to all nodes, inserting the Dirichlet zeros.
    pub fn to_nodes(&self, values: &[f64]) -> Vec<f64> {
        match self.bc {
            BoundaryCondition::NoFlux => values.to_vec(),
            BoundaryCondition::Dirichlet => {
                let mut out = Vec::with_capacity(self.n_cells + 1);
                out.push(0.0);
                out.extend_from_slice(values);
                out.push(0.0);
                out
            }
        }
    }
}

pub fn make_grid(length: f64, n_cells: usize, bc: BoundaryCondition) -> Result<Grid> {
    if !(length > 0.0) || !length.is_finite() {
        return Err(Error::Config(format!("domain length must be positive, got {length}")));
    }
    if n_cells < 2 {
        return Err(Error::Config(format!("grid too coarse: {n_cells} cells")));
    }
    let spacing = length / n_cells as f64;
    let nodes = (0..=n_cells).map(|i| i as f64 * spacing).collect();
    Ok(Grid {
        length,
        n_cells,
        nodes,
        spacing,
        bc,
    })
}

/// Growth-rate profile `m(x)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Constant(f64),
    /// `a0 + a1 cos(k pi x / length)`
    Cosine { a0: f64, a1: f64, k: f64 },
    /// `a0 + a1 sin(k pi x / length)`
    Sine { a0: f64, a1: f64, k: f64 },
    /// Values at the grid nodes, piecewise-linear in between.
    Tabulated(Vec<f64>),
}

impl Profile {
    pub fn eval(&self, x: f64, length: f64) -> f64 {
        match self {
            Profile::Constant(c) => *c,
            Profile::Cosine { a0, a1, k } => a0 + a1 * (k * PI * x / length).cos(),
            Profile::Sine { a0, a1, k } => a0 + a1 * (k * PI * x / length).sin(),
            Profile::Tabulated(values) => {
                let n = values.len() - 1;
                let s = (x / length * n as f64).clamp(0.0, n as f64);
                let i = (s.floor() as usize).min(n.saturating_sub(1));
                let t = s - i as f64;
                values[i] * (1.0 - t) + values[(i + 1).min(n)] * t
            }
        }
    }

    fn check(&self, grid: &Grid) -> Result<()> {
        if let Profile::Tabulated(values) = self {
            if values.len() != grid.n_cells + 1 {
                return Err(Error::Config(format!(
                    "tabulated profile has {} values, grid has {} nodes",
                    values.len(),
                    grid.n_cells + 1
                )));
            }
        }
        Ok(())
    }
}

/// Weighting used by [`DiscreteProblem::inner`].
#[derive(Debug, Clone, Copy)]
pub enum Weight<'a> {
    Plain,
    /// `e^{alpha m}`, the duality product.
    Exp,
    /// `e^{2 alpha m}`.
    Exp2,
    /// `e^{2 alpha m} u` for a steady state `u`.
    SteadyWeighted(&'a [f64]),
}

#[derive(Debug, Clone)]
pub struct DiscreteProblem {
    pub grid: Grid,
    pub alpha: f64,
    pub profile: Profile,
    /// `m` at every grid node.
    pub m_nodes: Vec<f64>,
    /// `m` at the unknowns.
    pub m: Vec<f64>,
    /// `e^{alpha m}` at the unknowns.
    pub exp_am: Vec<f64>,
    /// Trapezoid weights at the unknowns.
    pub quad: Vec<f64>,
    /// Stiffness matrix of `-(e^{alpha m} u')'`.
    pub a: Stiffness,
    /// `e^{alpha m} w`.
    pub w: Vec<f64>,
    /// `m e^{alpha m} w`.
    pub b: Vec<f64>,
    /// `e^{2 alpha m} w`.
    pub w2: Vec<f64>,
}

pub fn assemble(grid: &Grid, m: &Profile, alpha: f64) -> Result<DiscreteProblem> {
    if grid.n_cells < MIN_ASSEMBLY_CELLS {
        return Err(Error::Config(format!(
            "grid too coarse for assembly: {} cells (minimum {MIN_ASSEMBLY_CELLS})",
            grid.n_cells
        )));
    }
    if !alpha.is_finite() {
        return Err(Error::Config("alpha must be finite".into()));
    }
    m.check(grid)?;
    let h = grid.spacing;
    let len = grid.length;
    let m_nodes: Vec<f64> = grid.nodes.iter().map(|&x| m.eval(x, len)).collect();
    let mid_coeff: Vec<f64> = (0..grid.n_cells)
        .map(|i| {
            let mm = match m {
                Profile::Tabulated(v) => 0.5 * (v[i] + v[i + 1]),
                _ => m.eval((i as f64 + 0.5) * h, len),
            };
            (alpha * mm).exp()
        })
        .collect();

    let first = grid.first_unknown();
    let n = grid.unknowns();
    let faces: Vec<f64> = (0..n - 1).map(|j| mid_coeff[first + j] / h).collect();
    let stiffness = match grid.bc {
        BoundaryCondition::Dirichlet => Stiffness {
            faces,
            left: mid_coeff[0] / h,
            right: mid_coeff[grid.n_cells - 1] / h,
        },
        BoundaryCondition::NoFlux => Stiffness {
            faces,
            left: 0.0,
            right: 0.0,
        },
    };

    let quad = grid.trapezoid_weights();
    let m_unk: Vec<f64> = m_nodes[first..first + n].to_vec();
    let exp_am: Vec<f64> = m_unk.iter().map(|&v| (alpha * v).exp()).collect();
    let w: Vec<f64> = exp_am.iter().zip(&quad).map(|(e, q)| e * q).collect();
    let b: Vec<f64> = w.iter().zip(&m_unk).map(|(wi, mi)| wi * mi).collect();
    let w2: Vec<f64> = w.iter().zip(&exp_am).map(|(wi, e)| wi * e).collect();

    Ok(DiscreteProblem {
        grid: grid.clone(),
        alpha,
        profile: m.clone(),
        m_nodes,
        m: m_unk,
        exp_am,
        quad,
        a: stiffness,
        w,
        b,
        w2,
    })
}

impl DiscreteProblem {
    pub fn unknowns(&self) -> usize {
        self.grid.unknowns()
    }

    pub fn check_len(&self, len: usize) -> Result<()> {
        if len != self.unknowns() {
            return Err(Error::GridMismatch {
                expected: self.unknowns(),
                got: len,
            });
        }
        Ok(())
    }

    /// Per-unknown quadrature weight for the requested weighting.
    pub fn weights(&self, weight: Weight<'_>) -> Result<Vec<f64>> {
        Ok(match weight {
            Weight::Plain => self.quad.clone(),
            Weight::Exp => self.w.clone(),
            Weight::Exp2 => self.w2.clone(),
            Weight::SteadyWeighted(u) => {
                self.check_len(u.len())?;
                self.w2.iter().zip(u).map(|(a, b)| a * b).collect()
            }
        })
    }

    /// Trapezoid quadrature of `weight * u v`.
    pub fn inner(&self, u: &[f64], v: &[f64], weight: Weight<'_>) -> Result<f64> {
        self.check_len(u.len())?;
        self.check_len(v.len())?;
        let w = self.weights(weight)?;
        Ok(u.iter().zip(v).zip(&w).map(|((a, b), c)| a * b * c).sum())
    }

    /// Trapezoid quadrature of `weight * conj(u) v`.
    pub fn inner_c(&self, u: &[Complex64], v: &[Complex64], weight: Weight<'_>) -> Result<Complex64> {
        self.check_len(u.len())?;
        self.check_len(v.len())?;
        let w = self.weights(weight)?;
        Ok(u.iter()
            .zip(v)
            .zip(&w)
            .map(|((a, b), c)| a.conj() * b * c)
            .sum())
    }

    /// `sum_i m(x_i) e^{alpha m(x_i)} w_i`, the sign that splits the
    /// no-flux cases.
    pub fn weighted_mass(&self) -> f64 {
        self.b.iter().sum()
    }

    /// Maximum of `m` over all grid nodes.
    pub fn max_m(&self) -> f64 {
        self.m_nodes.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Model parameters after the change of variables `lambda = 1/d`,
/// `alpha = a/d`, `tau = d r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transformed {
    pub lambda: f64,
    pub alpha: f64,
    pub tau: f64,
}

/// Parameters of the original model: diffusion `d`, advection `a`, delay `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Raw {
    pub d: f64,
    pub a: f64,
    pub r: f64,
}

pub fn transform_parameters(raw: Raw) -> Result<Transformed> {
    if !(raw.d > 0.0) {
        return Err(Error::Config(format!("diffusion d must be positive, got {}", raw.d)));
    }
    if !(raw.r >= 0.0) {
        return Err(Error::Config(format!("delay r must be non-negative, got {}", raw.r)));
    }
    Ok(Transformed {
        lambda: 1.0 / raw.d,
        alpha: raw.a / raw.d,
        tau: raw.d * raw.r,
    })
}

pub fn inverse_transform(t: Transformed) -> Result<Raw> {
    if !(t.lambda > 0.0) {
        return Err(Error::Config(format!("lambda must be positive, got {}", t.lambda)));
    }
    if !(t.tau >= 0.0) {
        return Err(Error::Config(format!("tau must be non-negative, got {}", t.tau)));
    }
    let d = 1.0 / t.lambda;
    Ok(Raw {
        d,
        a: t.alpha * d,
        r: t.tau / d,
    })
}
