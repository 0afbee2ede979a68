//! Manufactured solutions, right-hand sides and discretisation errors.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::basis::NodalBasis1D;
use crate::error::{Error, Result};
use crate::fields::{CellField, NormKind};
use crate::mesh::Mesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    /// `u = prod_a sin(2 pi x_a)`.
    SinProduct,
    /// `u = x(1-x) y(1-y) (2 G_1 - G_2)` with two Gaussian bumps (2D only).
    TwoPeak,
    /// `u = 0`, `f = 0`.
    Zero,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::SinProduct => "sin_product",
            ProblemKind::TwoPeak => "two_peak",
            ProblemKind::Zero => "zero",
        }
    }
}

impl std::str::FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "sin_product" => Ok(ProblemKind::SinProduct),
            "two_peak" => Ok(ProblemKind::TwoPeak),
            "zero" => Ok(ProblemKind::Zero),
            other => Err(Error::InvalidArgument(format!("unknown problem '{other}'"))),
        }
    }
}

/// Parameters of one Gaussian bump of the two-peak solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub x0: f64,
    pub y0: f64,
    pub sigma: f64,
}

pub const PEAKS: [Peak; 2] = [
    Peak {
        x0: 0.3,
        y0: 0.4,
        sigma: 0.2,
    },
    Peak {
        x0: 0.8,
        y0: 0.6,
        sigma: 0.1,
    },
];

/// Weights of the bumps in `2 G_1 - G_2`.
const PEAK_WEIGHTS: [f64; 2] = [2.0, -1.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturedProblem {
    kind: ProblemKind,
    dim: usize,
}

impl ManufacturedProblem {
    pub fn new(kind: ProblemKind, dim: usize) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::InvalidArgument(format!("dimension {dim} not supported")));
        }
        if kind == ProblemKind::TwoPeak && dim != 2 {
            return Err(Error::InvalidArgument("the two-peak problem is two-dimensional".into()));
        }
        Ok(Self { kind, dim })
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn exact(&self, x: &[f64]) -> f64 {
        match self.kind {
            ProblemKind::Zero => 0.0,
            ProblemKind::SinProduct => x[..self.dim].iter().map(|&t| (2.0 * PI * t).sin()).product(),
            ProblemKind::TwoPeak => {
                let (q, _, _) = bubble(x[0], x[1]);
                q * peaks(x[0], x[1]).0
            }
        }
    }

    /// `f = -Laplace(u)`.
    pub fn rhs(&self, x: &[f64]) -> f64 {
        match self.kind {
            ProblemKind::Zero => 0.0,
            ProblemKind::SinProduct => self.dim as f64 * 4.0 * PI * PI * self.exact(x),
            ProblemKind::TwoPeak => {
                let (q, gq, lq) = bubble(x[0], x[1]);
                let (g, gg, lg) = peaks(x[0], x[1]);
                -(lq * g + 2.0 * (gq[0] * gg[0] + gq[1] * gg[1]) + q * lg)
            }
        }
    }
}

/// `q = x(1-x) y(1-y)` with gradient and Laplacian.
fn bubble(x: f64, y: f64) -> (f64, [f64; 2], f64) {
    let (qx, qy) = (x * (1.0 - x), y * (1.0 - y));
    let grad = [(1.0 - 2.0 * x) * qy, qx * (1.0 - 2.0 * y)];
    (qx * qy, grad, -2.0 * qy - 2.0 * qx)
}

/// `g = 2 G_1 - G_2` with gradient and Laplacian.
fn peaks(x: f64, y: f64) -> (f64, [f64; 2], f64) {
    let mut g = 0.0;
    let mut grad = [0.0; 2];
    let mut lap = 0.0;
    for (p, w) in PEAKS.iter().zip(PEAK_WEIGHTS) {
        let (dx, dy) = (x - p.x0, y - p.y0);
        let s2 = p.sigma * p.sigma;
        let r2 = dx * dx + dy * dy;
        let e = (-r2 / (2.0 * s2)).exp();
        g += w * e;
        grad[0] -= w * e * dx / s2;
        grad[1] -= w * e * dy / s2;
        lap += w * e * (r2 / (s2 * s2) - 2.0 / s2);
    }
    (g, grad, lap)
}

/// `b_{K,i} = int_K phi_i f` by the basis's tensor quadrature.
pub fn build_rhs(problem: &ManufacturedProblem, mesh: &Mesh, basis: &NodalBasis1D) -> CellField {
    let dim = mesh.dim();
    let h = mesh.h();
    let n1 = basis.len();
    let nc = n1.pow(dim as u32);
    let rule = basis.quadrature();
    let q = rule.len();
    // phi[k][i]: basis i at quadrature point k
    let phi: Vec<Vec<f64>> = rule.points.iter().map(|&x| basis.eval_all(x)).collect();
    let vol = h.powi(dim as i32);
    let mut b = CellField::zeros(mesh.num_cells(), nc);
    let mut x = [0.0; 3];
    for pos in 0..mesh.num_cells() {
        let origin = mesh.cell_origin(mesh.cell_at(pos));
        let bk = b.cell_mut(pos);
        for t in 0..q.pow(dim as u32) {
            let mut qi = [0usize; 3];
            let mut rest = t;
            let mut w = vol;
            for a in 0..dim {
                qi[a] = rest % q;
                rest /= q;
                w *= rule.weights[qi[a]];
                x[a] = origin[a] + h * rule.points[qi[a]];
            }
            let fw = w * problem.rhs(&x[..dim]);
            if fw == 0.0 {
                continue;
            }
            for (i, bi) in bk.iter_mut().enumerate() {
                let mut v = fw;
                let mut rest = i;
                for qa in qi.iter().take(dim) {
                    v *= phi[*qa][rest % n1];
                    rest /= n1;
                }
                *bi += v;
            }
        }
    }
    b
}

/// Nodal interpolation of `f` into a cell field.
pub fn interpolate(mesh: &Mesh, basis: &NodalBasis1D, f: impl Fn(&[f64]) -> f64) -> CellField {
    let dim = mesh.dim();
    let h = mesh.h();
    let n1 = basis.len();
    let nc = n1.pow(dim as u32);
    let nodes = basis.nodes();
    let mut u = CellField::zeros(mesh.num_cells(), nc);
    let mut x = [0.0; 3];
    for pos in 0..mesh.num_cells() {
        let origin = mesh.cell_origin(mesh.cell_at(pos));
        for (i, ui) in u.cell_mut(pos).iter_mut().enumerate() {
            let mut rest = i;
            for a in 0..dim {
                x[a] = origin[a] + h * nodes[rest % n1];
                rest /= n1;
            }
            *ui = f(&x[..dim]);
        }
    }
    u
}

pub fn interpolate_exact(problem: &ManufacturedProblem, mesh: &Mesh, basis: &NodalBasis1D) -> CellField {
    interpolate(mesh, basis, |x| problem.exact(x))
}

/// Discretisation error against the nodal interpolant of the exact solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorNorms {
    pub l2: f64,
    pub linf: f64,
    /// False when the reference is zero and the norms are absolute.
    pub relative: bool,
}

pub fn discretisation_error(
    u: &CellField,
    problem: &ManufacturedProblem,
    mesh: &Mesh,
    basis: &NodalBasis1D,
) -> ErrorNorms {
    let reference = interpolate_exact(problem, mesh, basis);
    let diff = u.difference(&reference);
    let (r2, ri) = (reference.norm(NormKind::L2), reference.norm(NormKind::Linf));
    if r2 == 0.0 {
        return ErrorNorms {
            l2: diff.norm(NormKind::L2),
            linf: diff.norm(NormKind::Linf),
            relative: false,
        };
    }
    ErrorNorms {
        l2: diff.norm(NormKind::L2) / r2,
        linf: diff.norm(NormKind::Linf) / ri,
        relative: true,
    }
}

/// Least-squares slope of `log e` over `log h`.
pub fn fit_slope(h: &[f64], e: &[f64]) -> f64 {
    assert_eq!(h.len(), e.len());
    let n = h.len() as f64;
    let xs: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
