//! The matrix-free DG operator on one mesh level.

use std::sync::Arc;

use crate::basis::NodalBasis1D;
use crate::dense::DenseMatrix;
use crate::error::Result;
use crate::fields::CellField;
use crate::localops::{apply_flux, IpParams, LocalBlocks};
use crate::mesh::{Mesh, Side};

/// A cell face as seen during a traversal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FaceInfo {
    pub facet: usize,
    pub side: Side,
    pub boundary: bool,
    /// SFC position of the neighbour across the face.
    pub neighbour: Option<usize>,
}

/// Mesh, basis and local blocks of one DG level, plus per-cell face tables
/// indexed by SFC position.
#[derive(Debug)]
pub struct DgLevel {
    mesh: Arc<Mesh>,
    basis: NodalBasis1D,
    blocks: Arc<LocalBlocks>,
    faces: Vec<FaceInfo>,
    /// Exact diagonal blocks `A_{K<-K}` keyed by the cell's boundary-face mask.
    diagonal: Vec<Option<DenseMatrix>>,
    /// `A_{K<-K'}` through each local face.
    neighbour: Vec<DenseMatrix>,
}

impl DgLevel {
    pub fn new(mesh: Arc<Mesh>, basis: NodalBasis1D, params: IpParams) -> Result<Self> {
        let blocks = Arc::new(LocalBlocks::new(&basis, mesh.dim(), mesh.h(), params)?);
        let nfaces = mesh.faces_per_cell();
        let mut faces = Vec::with_capacity(mesh.num_cells() * nfaces);
        for pos in 0..mesh.num_cells() {
            let cell = mesh.cell_at(pos);
            for fr in mesh.cell_faces(cell) {
                let facet = mesh.facet(fr.facet);
                let neighbour = facet.cell(fr.side.other()).map(|c| mesh.sfc_position(c));
                faces.push(FaceInfo {
                    facet: fr.facet,
                    side: fr.side,
                    boundary: facet.is_boundary(),
                    neighbour,
                });
            }
        }
        let mut diagonal = vec![None; 1 << nfaces];
        for pos in 0..mesh.num_cells() {
            let mask = Self::mask_of(&faces[pos * nfaces..(pos + 1) * nfaces]);
            if diagonal[mask].is_none() {
                let flags: Vec<bool> = (0..nfaces).map(|f| mask >> f & 1 == 1).collect();
                diagonal[mask] = Some(blocks.schur_by_products(&flags));
            }
        }
        let neighbour = (0..nfaces).map(|f| blocks.neighbour_block(f)).collect();
        Ok(Self {
            mesh,
            basis,
            blocks,
            faces,
            diagonal,
            neighbour,
        })
    }

    fn mask_of(faces: &[FaceInfo]) -> usize {
        faces
            .iter()
            .enumerate()
            .fold(0, |m, (f, fi)| if fi.boundary { m | 1 << f } else { m })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn basis(&self) -> &NodalBasis1D {
        &self.basis
    }

    pub fn blocks(&self) -> &Arc<LocalBlocks> {
        &self.blocks
    }

    pub fn n_cell(&self) -> usize {
        self.blocks.n_cell()
    }

    pub fn n_facet(&self) -> usize {
        self.blocks.n_facet()
    }

    pub fn faces_per_cell(&self) -> usize {
        self.mesh.faces_per_cell()
    }

    /// Faces of the cell at SFC position `pos`.
    pub fn faces(&self, pos: usize) -> &[FaceInfo] {
        let n = self.faces_per_cell();
        &self.faces[pos * n..(pos + 1) * n]
    }

    /// Exact `A_{K<-K}` of the cell at `pos`, boundary faces included.
    pub fn diagonal_block(&self, pos: usize) -> &DenseMatrix {
        let mask = Self::mask_of(self.faces(pos));
        self.diagonal[mask]
            .as_ref()
            .expect("diagonal block built for every mask")
    }

    /// `A_{K<-K'}` for the neighbour across local face `face`.
    pub fn neighbour_block(&self, face: usize) -> &DenseMatrix {
        &self.neighbour[face]
    }

    pub fn zero_field(&self) -> CellField {
        CellField::zeros(self.mesh.num_cells(), self.n_cell())
    }

    /// Projections of `u` onto every facet, `[facet][side][quantity][node]`.
    pub fn project_all(&self, u: &CellField) -> Vec<f64> {
        let nf = self.n_facet();
        let mut proj = vec![0.0; 4 * nf * self.mesh.num_facets()];
        for pos in 0..self.mesh.num_cells() {
            for (f, fi) in self.faces(pos).iter().enumerate() {
                let o = (4 * fi.facet + 2 * fi.side.index()) * nf;
                self.blocks
                    .face(f, fi.boundary)
                    .project
                    .mul_into(u.cell(pos), &mut proj[o..o + 2 * nf]);
            }
        }
        proj
    }

    /// Fluxes `[facet][quantity][node]` from a projection field.
    pub fn fluxes(&self, proj: &[f64]) -> Vec<f64> {
        let nf = self.n_facet();
        let m = self.mesh.num_facets();
        let mut w = vec![0.0; 2 * nf * m];
        for g in 0..m {
            let p = &proj[4 * g * nf..4 * (g + 1) * nf];
            let (minus, plus) = p.split_at(2 * nf);
            apply_flux(
                minus,
                plus,
                self.mesh.facet(g).is_boundary(),
                &mut w[2 * g * nf..2 * (g + 1) * nf],
            );
        }
        w
    }

    /// Cell residual from precomputed fluxes, in the operation order shared by
    /// every smoother variant: `r = b - Acc u`, then `r -= Acf w` face by face.
    #[inline]
    pub fn cell_residual(&self, pos: usize, u: &[f64], b: &[f64], w: &[f64], r: &mut [f64]) {
        self.blocks.acc().mul_into(u, r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        let nf2 = 2 * self.n_facet();
        for (f, fi) in self.faces(pos).iter().enumerate() {
            self.blocks
                .face(f, fi.boundary)
                .lift
                .mul_add(-1.0, &w[fi.facet * nf2..(fi.facet + 1) * nf2], r);
        }
    }

    /// `b - A u` through the projection/flux composition.
    pub fn residual(&self, u: &CellField, b: &CellField) -> CellField {
        let w = self.fluxes(&self.project_all(u));
        let mut r = self.zero_field();
        for pos in 0..self.mesh.num_cells() {
            let (uk, bk) = (u.cell(pos), b.cell(pos));
            self.cell_residual(pos, uk, bk, &w, r.cell_mut(pos));
        }
        r
    }

    /// `A u`.
    pub fn apply(&self, u: &CellField) -> CellField {
        let zero = self.zero_field();
        let mut r = self.residual(u, &zero);
        r.as_mut_slice().iter_mut().for_each(|v| *v = -*v);
        r
    }

    /// Dense global matrix from the diagonal and neighbour blocks, rows and
    /// columns in SFC-major dof order. Meant for small meshes in tests.
    pub fn assemble_dense(&self) -> DenseMatrix {
        let nc = self.n_cell();
        let n = nc * self.mesh.num_cells();
        let mut a = DenseMatrix::zeros(n, n);
        for pos in 0..self.mesh.num_cells() {
            let mut put = |col_pos: usize, blk: &DenseMatrix| {
                for i in 0..nc {
                    for j in 0..nc {
                        let v = a.get(pos * nc + i, col_pos * nc + j) + blk.get(i, j);
                        a.set(pos * nc + i, col_pos * nc + j, v);
                    }
                }
            };
            put(pos, self.diagonal_block(pos));
            for (f, fi) in self.faces(pos).iter().enumerate() {
                if let Some(nb) = fi.neighbour {
                    put(nb, &self.neighbour[f]);
                }
            }
        }
        a
    }
}
