//! Local operator factory: tensor-product blocks of the facet-augmented
//! interior penalty system, the Schur block and its inverse, the bilinear CG
//! element and the cell prolongation, and the memory-access model.
//!
//! Facet data per facet node is stored as two quantities, the value
//! projection and the normal-derivative projection. Projection blocks map a
//! cell vector to `[values..., derivatives...]` (`2 * nf` rows); lifting
//! blocks map `[w..., w'...]` back into the cell residual.

use serde::{Deserialize, Serialize};

use crate::basis::{BasisKind, NodalBasis1D, Ref1DMatrices};
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::mesh::Side;

/// Discretisation parameters of the interior penalty form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IpParams {
    /// Weight of the `[u]{dv/dn}` term; 1 gives the non-symmetric variant.
    pub theta: f64,
    /// `c` in `gamma_bar = c (p+1)^2 / h`.
    pub penalty_const: f64,
}

impl Default for IpParams {
    fn default() -> Self {
        Self {
            theta: 1.0,
            penalty_const: 2.0,
        }
    }
}

impl IpParams {
    /// Facet penalty `gamma_bar` for degree `p` and cell size `h`.
    pub fn gamma_bar(&self, p: usize, h: f64) -> f64 {
        self.penalty_const * ((p + 1) * (p + 1)) as f64 / h
    }
}

/// How a cell meets one of its facets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FaceRole {
    pub side: Side,
    /// Sign of the facet normal along its axis.
    pub normal_sign: i8,
}

impl FaceRole {
    /// Role for local face `s` (0 lower, 1 upper) of a cell.
    pub fn for_face(s: usize, boundary: bool) -> Self {
        match (s, boundary) {
            (1, _) => FaceRole {
                side: Side::Minus,
                normal_sign: 1,
            },
            (_, false) => FaceRole {
                side: Side::Plus,
                normal_sign: 1,
            },
            (_, true) => FaceRole {
                side: Side::Minus,
                normal_sign: -1,
            },
        }
    }
}

/// Projection (`A_{f<-c}`) and lifting (`A_{c<-f}`) blocks of one cell face
/// in one role.
#[derive(Debug, Clone)]
pub struct FaceOps {
    pub role: FaceRole,
    /// `2nf x nc`: signed value projection then normal-derivative projection.
    pub project: DenseMatrix,
    /// `nc x 2nf`: coupling of `(w, w')` into the cell residual.
    pub lift: DenseMatrix,
}

/// All local blocks for a uniform cell of size `h`.
#[derive(Debug, Clone)]
pub struct LocalBlocks {
    dim: usize,
    degree: usize,
    kind: BasisKind,
    h: f64,
    params: IpParams,
    gamma_bar: f64,
    n_cell: usize,
    n_facet: usize,
    acc: DenseMatrix,
    /// Indexed by `2 * face + variant`, variant 0 interior role, 1 boundary role.
    face_ops: Vec<FaceOps>,
    schur: DenseMatrix,
    schur_inv: DenseMatrix,
    reference: ReferenceTerms,
}

/// `S(h) = sum_alpha h^q_alpha B_alpha + gamma_bar h^(d-1) B_pen`, built once at `h = 1`.
#[derive(Debug, Clone)]
pub struct ReferenceTerms {
    dim: usize,
    degree: usize,
    params: IpParams,
    /// `(q_alpha, B_alpha)` for the volume, flux and theta terms.
    terms: Vec<(i32, DenseMatrix)>,
    /// Penalty term at unit `gamma_bar`, scaled by `gamma_bar * h^(d-1)`.
    penalty: DenseMatrix,
}

impl ReferenceTerms {
    pub fn terms(&self) -> &[(i32, DenseMatrix)] {
        &self.terms
    }

    pub fn penalty_term(&self) -> &DenseMatrix {
        &self.penalty
    }

    /// Interior-cell Schur block for cell size `h`.
    pub fn assemble(&self, h: f64) -> DenseMatrix {
        let n = self.penalty.rows();
        let mut s = DenseMatrix::zeros(n, n);
        for (q, b) in &self.terms {
            s.add_scaled(h.powi(*q), b);
        }
        let g = self.params.gamma_bar(self.degree, h);
        s.add_scaled(g * h.powi(self.dim as i32 - 1), &self.penalty);
        s
    }
}

struct Tensor1D {
    ident: DenseMatrix,
    mass: DenseMatrix,
    stiffness: DenseMatrix,
    r: Ref1DMatrices,
}

impl Tensor1D {
    fn new(basis: &NodalBasis1D) -> Self {
        let r = basis.ref_matrices();
        let n = r.n;
        Self {
            ident: DenseMatrix::identity(n),
            mass: DenseMatrix::from_row_major(n, n, r.mass.clone()),
            stiffness: DenseMatrix::from_row_major(n, n, r.stiffness.clone()),
            r,
        }
    }

    /// Kronecker product with `special` on `axis` and `other` elsewhere.
    fn along(&self, dim: usize, axis: usize, special: &DenseMatrix, other: &DenseMatrix) -> DenseMatrix {
        let factors: Vec<&DenseMatrix> = (0..dim).map(|a| if a == axis { special } else { other }).collect();
        DenseMatrix::tensor(&factors)
    }
}

/// Unit-size pieces of one face, before signs and scalings are applied.
struct FacePieces {
    trace: DenseMatrix,
    trace_derivative: DenseMatrix,
    surface_mass: DenseMatrix,
    surface_gradient: DenseMatrix,
}

fn face_pieces(t: &Tensor1D, dim: usize, axis: usize, s: usize) -> FacePieces {
    let e = t.r.endpoint(s);
    let g = t.r.endpoint_derivative(s);
    FacePieces {
        trace: t.along(dim, axis, &DenseMatrix::row_vector(e), &t.ident),
        trace_derivative: t.along(dim, axis, &DenseMatrix::row_vector(g), &t.ident),
        surface_mass: t.along(dim, axis, &DenseMatrix::column_vector(e), &t.mass),
        surface_gradient: t.along(dim, axis, &DenseMatrix::column_vector(g), &t.mass),
    }
}

fn stack_rows(top: &DenseMatrix, bottom: &DenseMatrix) -> DenseMatrix {
    let cols = top.cols();
    let mut data = top.as_slice().to_vec();
    data.extend_from_slice(bottom.as_slice());
    DenseMatrix::from_row_major(top.rows() + bottom.rows(), cols, data)
}

fn stack_cols(left: &DenseMatrix, right: &DenseMatrix) -> DenseMatrix {
    let rows = left.rows();
    let (lc, rc) = (left.cols(), right.cols());
    DenseMatrix::from_fn(rows, lc + rc, |i, j| {
        if j < lc {
            left.get(i, j)
        } else {
            right.get(i, j - lc)
        }
    })
}

fn sign(side: Side) -> f64 {
    match side {
        Side::Minus => 1.0,
        Side::Plus => -1.0,
    }
}

impl LocalBlocks {
    pub fn new(basis: &NodalBasis1D, dim: usize, h: f64, params: IpParams) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::InvalidArgument(format!("dimension {dim} not supported")));
        }
        if h <= 0.0 || !h.is_finite() {
            return Err(Error::InvalidArgument(format!("cell size {h} must be positive")));
        }
        if params.penalty_const <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "penalty constant {} must be positive",
                params.penalty_const
            )));
        }
        let p = basis.degree();
        let t = Tensor1D::new(basis);
        let n1 = p + 1;
        let n_cell = n1.pow(dim as u32);
        let n_facet = n1.pow(dim as u32 - 1);
        let gamma_bar = params.gamma_bar(p, h);
        let dm2 = h.powi(dim as i32 - 2);
        let dm1 = h.powi(dim as i32 - 1);

        let mut acc_unit = DenseMatrix::zeros(n_cell, n_cell);
        for a in 0..dim {
            acc_unit.add_scaled(1.0, &t.along(dim, a, &t.stiffness, &t.mass));
        }
        let acc = acc_unit.scaled(dm2);

        let mut face_ops = Vec::with_capacity(4 * dim);
        for a in 0..dim {
            for s in 0..2 {
                let pieces = face_pieces(&t, dim, a, s);
                for boundary in [false, true] {
                    let role = FaceRole::for_face(s, boundary);
                    let sg = sign(role.side);
                    let nu = role.normal_sign as f64;
                    let project = stack_rows(&pieces.trace.scaled(sg), &pieces.trace_derivative.scaled(nu / h));
                    let mut lift_w = pieces.surface_mass.scaled(sg * gamma_bar * dm1);
                    lift_w.add_scaled(params.theta * nu * dm2, &pieces.surface_gradient);
                    let lift_dw = pieces.surface_mass.scaled(-sg * dm1);
                    face_ops.push(FaceOps {
                        role,
                        project,
                        lift: stack_cols(&lift_w, &lift_dw),
                    });
                }
            }
        }

        let reference = reference_terms(&t, dim, p, params);
        let mut blocks = Self {
            dim,
            degree: p,
            kind: basis.kind(),
            h,
            params,
            gamma_bar,
            n_cell,
            n_facet,
            acc,
            face_ops,
            schur: DenseMatrix::zeros(n_cell, n_cell),
            schur_inv: DenseMatrix::zeros(n_cell, n_cell),
            reference,
        };
        blocks.schur = blocks.reference.assemble(h);
        blocks.schur_inv = blocks.schur.inverse()?;
        Ok(blocks)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn params(&self) -> IpParams {
        self.params
    }

    pub fn gamma_bar(&self) -> f64 {
        self.gamma_bar
    }

    /// Dofs per cell, `(p+1)^d`.
    pub fn n_cell(&self) -> usize {
        self.n_cell
    }

    /// Nodes per facet, `(p+1)^(d-1)`.
    pub fn n_facet(&self) -> usize {
        self.n_facet
    }

    /// Volume stiffness `A_{c<-c}|_{K<-K}`.
    pub fn acc(&self) -> &DenseMatrix {
        &self.acc
    }

    /// Blocks of local face `face = 2 * axis + s`.
    pub fn face(&self, face: usize, boundary: bool) -> &FaceOps {
        &self.face_ops[2 * face + usize::from(boundary)]
    }

    /// Interior-cell Schur block `S_{K<-K}`.
    pub fn schur(&self) -> &DenseMatrix {
        &self.schur
    }

    pub fn schur_inverse(&self) -> &DenseMatrix {
        &self.schur_inv
    }

    pub fn reference_terms(&self) -> &ReferenceTerms {
        &self.reference
    }

    /// Flux weight of a cell's own projection: `1/2` inside, `1` on the boundary.
    pub fn flux_weight(boundary: bool) -> f64 {
        if boundary {
            1.0
        } else {
            0.5
        }
    }

    /// `S = Acc + sum_F Acf Aff Afc` by explicit block products, for a cell
    /// whose faces have the given boundary flags.
    pub fn schur_by_products(&self, boundary: &[bool]) -> DenseMatrix {
        let mut s = self.acc.clone();
        for (f, &b) in boundary.iter().enumerate() {
            let ops = self.face(f, b);
            s.add_scaled(Self::flux_weight(b), &ops.lift.matmul(&ops.project));
        }
        s
    }

    /// Coupling `A_{K<-K'}` through the interior face `face` of `K`.
    pub fn neighbour_block(&self, face: usize) -> DenseMatrix {
        let opposite = face ^ 1;
        let mine = self.face(face, false);
        let theirs = self.face(opposite, false);
        mine.lift.matmul(&theirs.project).scaled(0.5)
    }

    /// Dumps every block as CSV text keyed by a descriptive name.
    pub fn dump_csv(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("acc".to_string(), self.acc.to_csv()),
            ("schur".to_string(), self.schur.to_csv()),
            ("schur_inv".to_string(), self.schur_inv.to_csv()),
        ];
        for f in 0..2 * self.dim {
            for b in [false, true] {
                let ops = self.face(f, b);
                let tag = if b { "boundary" } else { "interior" };
                out.push((format!("afc_face{f}_{tag}"), ops.project.to_csv()));
                out.push((format!("acf_face{f}_{tag}"), ops.lift.to_csv()));
            }
        }
        out
    }
}

fn reference_terms(t: &Tensor1D, dim: usize, p: usize, params: IpParams) -> ReferenceTerms {
    let n_cell = (p + 1).pow(dim as u32);
    let q = dim as i32 - 2;
    let mut vol = DenseMatrix::zeros(n_cell, n_cell);
    for a in 0..dim {
        vol.add_scaled(1.0, &t.along(dim, a, &t.stiffness, &t.mass));
    }
    // Interior faces at h = 1, weight 1/2 from the flux average.
    let mut flux = DenseMatrix::zeros(n_cell, n_cell);
    let mut theta = DenseMatrix::zeros(n_cell, n_cell);
    let mut penalty = DenseMatrix::zeros(n_cell, n_cell);
    for a in 0..dim {
        for s in 0..2 {
            let pieces = face_pieces(t, dim, a, s);
            let role = FaceRole::for_face(s, false);
            let sg = sign(role.side);
            let nu = role.normal_sign as f64;
            // w' = 1/2 nu D u, lifted with -sg E
            flux.add_scaled(-0.5 * sg * nu, &pieces.surface_mass.matmul(&pieces.trace_derivative));
            // w = 1/2 sg T u, lifted with theta nu G
            theta.add_scaled(
                0.5 * params.theta * nu * sg,
                &pieces.surface_gradient.matmul(&pieces.trace),
            );
            // w = 1/2 sg T u, lifted with sg gamma E
            penalty.add_scaled(0.5, &pieces.surface_mass.matmul(&pieces.trace));
        }
    }
    ReferenceTerms {
        dim,
        degree: p,
        params,
        terms: vec![(q, vol), (q, flux), (q, theta)],
        penalty,
    }
}

/// Applies the numerical flux to the projections of one facet.
///
/// `minus` and `plus` hold `[values..., derivatives...]`; returns `(w, w')`
/// in the same layout. On boundary facets only the `-` side contributes.
pub fn apply_flux(minus: &[f64], plus: &[f64], boundary: bool, out: &mut [f64]) {
    debug_assert_eq!(minus.len(), out.len());
    if boundary {
        out.copy_from_slice(minus);
    } else {
        for ((o, a), b) in out.iter_mut().zip(minus).zip(plus) {
            *o = 0.5 * (a + b);
        }
    }
}

/// Operators of the lowest-order continuous space on a uniform mesh.
#[derive(Debug, Clone)]
pub struct CoarseOps {
    dim: usize,
    h: f64,
    /// `2^d x 2^d` multilinear element stiffness; bit `a` of a local vertex
    /// index selects the upper vertex along axis `a`.
    element: DenseMatrix,
}

impl CoarseOps {
    pub fn new(dim: usize, h: f64) -> Result<Self> {
        if h <= 0.0 || !h.is_finite() {
            return Err(Error::InvalidArgument(format!("cell size {h} must be positive")));
        }
        let linear = NodalBasis1D::new(BasisKind::GaussLobatto, 1)?;
        let t = Tensor1D::new(&linear);
        let mut element = DenseMatrix::zeros(1 << dim, 1 << dim);
        for a in 0..dim {
            element.add_scaled(h.powi(dim as i32 - 2), &t.along(dim, a, &t.stiffness, &t.mass));
        }
        Ok(Self { dim, h, element })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn element(&self) -> &DenseMatrix {
        &self.element
    }

    /// Diagonal entry of the element matrix.
    pub fn element_diagonal(&self) -> f64 {
        self.element.get(0, 0)
    }
}

/// Cell prolongation `P_{K<-V}` from the `2^d` cell vertices to the nodal
/// points of a degree-`p` DG basis: `nc x 2^d`.
pub fn cell_prolongation(basis: &NodalBasis1D, dim: usize) -> DenseMatrix {
    let n1 = basis.len();
    let nc = n1.pow(dim as u32);
    let x = basis.nodes();
    DenseMatrix::from_fn(nc, 1 << dim, |i, k| {
        let mut rest = i;
        let mut v = 1.0;
        for a in 0..dim {
            let ia = rest % n1;
            rest /= n1;
            v *= if (k >> a) & 1 == 1 { x[ia] } else { 1.0 - x[ia] };
        }
        v
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AccessAlgorithm {
    /// Vanilla block-Jacobi with direct neighbour coupling.
    Vanilla,
    /// Facet projections and fluxes.
    ThreeStage,
    /// As `ThreeStage`, plus the backup needed for a dynamic stopping test.
    ThreeStageStandalone,
}

/// Memory accesses per cell predicted by the simple traffic model.
pub fn memory_access_model(alg: AccessAlgorithm, dim: usize, p: usize) -> u64 {
    let d = dim as u64;
    let vol = (p as u64 + 1).pow(dim as u32);
    let fac = (p as u64 + 1).pow(dim as u32 - 1);
    match alg {
        AccessAlgorithm::Vanilla => (2 * d + 5) * vol,
        AccessAlgorithm::ThreeStage => 3 * vol + 7 * d * fac,
        AccessAlgorithm::ThreeStageStandalone => 5 * vol + 7 * d * fac,
    }
}
