//! One-dimensional nodal machinery on the reference interval [0, 1].
//!
//! Every local operator of the DG discretisation is a tensor product of the
//! small matrices built here, so this module is the only place where
//! polynomials are evaluated or integrated.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest polynomial degree supported by the nodal bases.
pub const MAX_DEGREE: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    /// Gauss-Legendre nodes (interior points only).
    #[serde(rename = "legendre")]
    GaussLegendre,
    /// Gauss-Lobatto nodes (includes both endpoints).
    #[serde(rename = "lobatto")]
    GaussLobatto,
}

impl BasisKind {
    pub fn name(self) -> &'static str {
        match self {
            BasisKind::GaussLegendre => "legendre",
            BasisKind::GaussLobatto => "lobatto",
        }
    }
}

impl std::str::FromStr for BasisKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "legendre" | "gauss-legendre" => Ok(BasisKind::GaussLegendre),
            "lobatto" | "gauss-lobatto" => Ok(BasisKind::GaussLobatto),
            other => Err(Error::InvalidArgument(format!("unknown basis '{other}'"))),
        }
    }
}

/// A quadrature rule on [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// Gauss-Legendre rule with `n` points, exact for degree `2n - 1`.
    pub fn gauss_legendre(n: usize) -> Self {
        let (x, w) = gauss_legendre_reference(n);
        Self {
            points: x.iter().map(|&t| 0.5 * (t + 1.0)).collect(),
            weights: w.iter().map(|&t| 0.5 * t).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Lagrange basis of degree `p` on [0, 1] through Gauss-Legendre or
/// Gauss-Lobatto nodes, together with the assembly quadrature.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalBasis1D {
    kind: BasisKind,
    degree: usize,
    nodes: Vec<f64>,
    /// Barycentric-style denominators `prod_{j != i} (x_i - x_j)`.
    denominators: Vec<f64>,
    quadrature: QuadratureRule,
}

impl NodalBasis1D {
    pub fn new(kind: BasisKind, degree: usize) -> Result<Self> {
        if degree == 0 || degree > MAX_DEGREE {
            return Err(Error::InvalidArgument(format!(
                "polynomial degree {degree} outside supported range 1..={MAX_DEGREE}"
            )));
        }
        let reference = match kind {
            BasisKind::GaussLegendre => gauss_legendre_reference(degree + 1).0,
            BasisKind::GaussLobatto => gauss_lobatto_reference(degree + 1),
        };
        let nodes: Vec<f64> = reference.iter().map(|&t| 0.5 * (t + 1.0)).collect();
        let denominators = (0..nodes.len())
            .map(|i| {
                (0..nodes.len())
                    .filter(|&j| j != i)
                    .map(|j| nodes[i] - nodes[j])
                    .product()
            })
            .collect();
        Ok(Self {
            kind,
            degree,
            nodes,
            denominators,
            // p + 2 Gauss-Legendre points integrate degree 2p + 3 exactly,
            // enough for every mass/stiffness product of either basis.
            quadrature: QuadratureRule::gauss_legendre(degree + 2),
        })
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of nodes, `p + 1`.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn quadrature(&self) -> &QuadratureRule {
        &self.quadrature
    }

    /// Value of the `i`-th Lagrange polynomial at `x`.
    pub fn eval(&self, i: usize, x: f64) -> f64 {
        let mut num = 1.0;
        for (j, &xj) in self.nodes.iter().enumerate() {
            if j != i {
                num *= x - xj;
            }
        }
        num / self.denominators[i]
    }

    /// Derivative of the `i`-th Lagrange polynomial at `x`.
    pub fn eval_derivative(&self, i: usize, x: f64) -> f64 {
        let n = self.nodes.len();
        let mut sum = 0.0;
        for k in 0..n {
            if k == i {
                continue;
            }
            let mut term = 1.0;
            for j in 0..n {
                if j != i && j != k {
                    term *= x - self.nodes[j];
                }
            }
            sum += term;
        }
        sum / self.denominators[i]
    }

    pub fn eval_all(&self, x: f64) -> Vec<f64> {
        (0..self.len()).map(|i| self.eval(i, x)).collect()
    }

    pub fn eval_derivative_all(&self, x: f64) -> Vec<f64> {
        (0..self.len()).map(|i| self.eval_derivative(i, x)).collect()
    }

    /// Matrix `T` (row-major, `len x other.len()`) with `T[i][j] = phi^other_j(x^self_i)`:
    /// converts coefficients in `other` to coefficients in `self`.
    pub fn interpolation_from(&self, other: &NodalBasis1D) -> Vec<f64> {
        let n = self.len();
        let m = other.len();
        let mut t = vec![0.0; n * m];
        for i in 0..n {
            for j in 0..m {
                t[i * m + j] = other.eval(j, self.nodes[i]);
            }
        }
        t
    }

    /// Reference mass/stiffness matrices and endpoint vectors.
    pub fn ref_matrices(&self) -> Ref1DMatrices {
        let n = self.len();
        let q = &self.quadrature;
        let values: Vec<Vec<f64>> = q.points.iter().map(|&x| self.eval_all(x)).collect();
        let derivs: Vec<Vec<f64>> = q.points.iter().map(|&x| self.eval_derivative_all(x)).collect();
        let mut mass = vec![0.0; n * n];
        let mut stiffness = vec![0.0; n * n];
        for (k, &w) in q.weights.iter().enumerate() {
            for i in 0..n {
                for j in 0..n {
                    mass[i * n + j] += w * values[k][i] * values[k][j];
                    stiffness[i * n + j] += w * derivs[k][i] * derivs[k][j];
                }
            }
        }
        symmetrize(&mut mass, n);
        symmetrize(&mut stiffness, n);
        let mut e0 = self.eval_all(0.0);
        let mut e1 = self.eval_all(1.0);
        if self.kind == BasisKind::GaussLobatto {
            // Cardinality at the endpoint nodes holds exactly.
            e0 = unit_vector(n, 0);
            e1 = unit_vector(n, n - 1);
        }
        Ref1DMatrices {
            n,
            mass,
            stiffness,
            e0,
            e1,
            g0: self.eval_derivative_all(0.0),
            g1: self.eval_derivative_all(1.0),
        }
    }
}

/// 1D reference matrices on [0, 1]; matrices are row-major `n x n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ref1DMatrices {
    pub n: usize,
    pub mass: Vec<f64>,
    pub stiffness: Vec<f64>,
    /// Basis values at x = 0.
    pub e0: Vec<f64>,
    /// Basis values at x = 1.
    pub e1: Vec<f64>,
    /// Basis derivatives at x = 0.
    pub g0: Vec<f64>,
    /// Basis derivatives at x = 1.
    pub g1: Vec<f64>,
}

impl Ref1DMatrices {
    /// Endpoint value vector for face side `s` (0: x = 0, 1: x = 1).
    pub fn endpoint(&self, side: usize) -> &[f64] {
        if side == 0 {
            &self.e0
        } else {
            &self.e1
        }
    }

    pub fn endpoint_derivative(&self, side: usize) -> &[f64] {
        if side == 0 {
            &self.g0
        } else {
            &self.g1
        }
    }
}

fn unit_vector(n: usize, k: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[k] = 1.0;
    v
}

fn symmetrize(a: &mut [f64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            let m = 0.5 * (a[i * n + j] + a[j * n + i]);
            a[i * n + j] = m;
            a[j * n + i] = m;
        }
    }
}

/// Legendre polynomial `P_n(x)` and its derivative by the three-term recurrence.
pub(crate) fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = if (1.0 - x * x).abs() < 1e-300 {
        // P_n'(+-1) = (+-1)^{n+1} n (n+1) / 2
        let s = if x > 0.0 || n % 2 == 1 { 1.0 } else { -1.0 };
        s * nf * (nf + 1.0) / 2.0
    } else {
        nf * (p0 - x * p1) / (1.0 - x * x)
    };
    (p1, dp)
}

const NEWTON_TOL: f64 = 1e-15;

/// Gauss-Legendre points and weights on [-1, 1].
fn gauss_legendre_reference(n: usize) -> (Vec<f64>, Vec<f64>) {
    match n {
        1 => return (vec![0.0], vec![2.0]),
        2 => {
            let a = 1.0 / 3f64.sqrt();
            return (vec![-a, a], vec![1.0, 1.0]);
        }
        3 => {
            let a = (0.6f64).sqrt();
            return (vec![-a, 0.0, a], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0]);
        }
        _ => {}
    }
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n {
        // Chebyshev-like initial guess, descending order.
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, t);
            let dt = p / dp;
            t -= dt;
            if dt.abs() < NEWTON_TOL {
                break;
            }
        }
        let (_, dp) = legendre(n, t);
        x[n - 1 - i] = t;
        w[n - 1 - i] = 2.0 / ((1.0 - t * t) * dp * dp);
    }
    symmetrize_nodes(&mut x);
    (x, w)
}

/// Gauss-Lobatto points on [-1, 1]: the endpoints and the roots of `P'_{n-1}`.
fn gauss_lobatto_reference(n: usize) -> Vec<f64> {
    match n {
        2 => return vec![-1.0, 1.0],
        3 => return vec![-1.0, 0.0, 1.0],
        _ => {}
    }
    let m = n - 1;
    let mut x = vec![0.0; n];
    x[0] = -1.0;
    x[n - 1] = 1.0;
    let mf = m as f64;
    for i in 1..m {
        // Interior points interlace the Chebyshev-Gauss-Lobatto points.
        let mut t = -(std::f64::consts::PI * i as f64 / mf).cos();
        for _ in 0..100 {
            // Newton on q(t) = P'_m(t); q'(t) = (2t P'_m - m(m+1) P_m) / (1 - t^2).
            let (p, dp) = legendre(m, t);
            let ddp = (2.0 * t * dp - mf * (mf + 1.0) * p) / (1.0 - t * t);
            let dt = dp / ddp;
            t -= dt;
            if dt.abs() < NEWTON_TOL {
                break;
            }
        }
        x[i] = t;
    }
    symmetrize_nodes(&mut x);
    x
}

/// Enforces exact symmetry `x[i] = -x[n-1-i]` of a node set on [-1, 1].
fn symmetrize_nodes(x: &mut [f64]) {
    let n = x.len();
    for i in 0..n / 2 {
        let a = 0.5 * (x[n - 1 - i] - x[i]);
        x[i] = -a;
        x[n - 1 - i] = a;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
}
