//! Dof containers over cells, facets and vertices.
//!
//! Cell fields are stored cell-major in SFC order so that the cells of a
//! subdomain form one contiguous slice. Facet projections are stored per
//! subdomain with a local facet numbering; interface facets appear in both
//! adjacent subdomains and are reconciled by [`exchange_interface`].

use std::fmt::Write as _;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::mesh::{Mesh, Partition, Side};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormKind {
    L2,
    Linf,
}

pub fn norm(x: &[f64], kind: NormKind) -> f64 {
    match kind {
        NormKind::L2 => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
        NormKind::Linf => x.iter().fold(0.0, |m, v| m.max(v.abs())),
    }
}

/// `(p+1)^d` values per cell, cells in SFC order.
#[derive(Debug, Clone, PartialEq)]
pub struct CellField {
    n: usize,
    data: Vec<f64>,
}

impl CellField {
    pub fn zeros(num_cells: usize, n_per_cell: usize) -> Self {
        Self {
            n: n_per_cell,
            data: vec![0.0; num_cells * n_per_cell],
        }
    }

    pub fn from_vec(n_per_cell: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len() % n_per_cell, 0, "cell field length mismatch");
        Self { n: n_per_cell, data }
    }

    pub fn n_per_cell(&self) -> usize {
        self.n
    }

    pub fn num_cells(&self) -> usize {
        self.data.len() / self.n
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Slice of the cell at SFC position `pos`.
    pub fn cell(&self, pos: usize) -> &[f64] {
        &self.data[pos * self.n..(pos + 1) * self.n]
    }

    pub fn cell_mut(&mut self, pos: usize) -> &mut [f64] {
        &mut self.data[pos * self.n..(pos + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn norm(&self, kind: NormKind) -> f64 {
        norm(&self.data, kind)
    }

    /// `self - other`
    pub fn difference(&self, other: &CellField) -> CellField {
        assert_eq!(self.data.len(), other.data.len());
        CellField {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &CellField) -> f64 {
        assert_eq!(self.data.len(), other.data.len());
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Disjoint mutable slices, one per subdomain range.
    pub fn split_ranges_mut(&mut self, ranges: &[Range<usize>]) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(ranges.len());
        let mut rest: &mut [f64] = &mut self.data;
        let mut at = 0;
        for r in ranges {
            assert_eq!(r.start, at, "ranges must be contiguous");
            let (head, tail) = std::mem::take(&mut rest).split_at_mut((r.end - r.start) * self.n);
            out.push(head);
            rest = tail;
            at = r.end;
        }
        out
    }

    /// CSV rows `cell,node,value`, `cell` being the lexicographic cell id.
    pub fn to_csv(&self, mesh: &Mesh) -> String {
        let mut s = String::from("cell,node,value\n");
        for cell in 0..mesh.num_cells() {
            let pos = mesh.sfc_position(cell);
            for (i, v) in self.cell(pos).iter().enumerate() {
                let _ = writeln!(s, "{cell},{i},{v:.16e}");
            }
        }
        s
    }
}

/// Projection and flux storage of one subdomain.
///
/// Projections are laid out per local facet as `[side][quantity][node]`
/// (`4 nf` values), fluxes as `[quantity][node]` (`2 nf` values).
#[derive(Debug, Clone)]
pub struct SubdomainFacets {
    nf: usize,
    /// Global facet id of every local facet.
    global: Vec<usize>,
    proj: Vec<f64>,
    flux: Vec<f64>,
    /// `(local facet, side owned by the other subdomain, other subdomain, its local facet)`
    interface: Vec<InterfaceLink>,
    written: Vec<[bool; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InterfaceLink {
    pub local: usize,
    pub remote_side: Side,
    pub remote_part: usize,
    pub remote_local: usize,
}

impl SubdomainFacets {
    pub fn new(nf: usize, global: Vec<usize>, interface: Vec<InterfaceLink>) -> Self {
        let m = global.len();
        Self {
            nf,
            global,
            proj: vec![0.0; 4 * nf * m],
            flux: vec![0.0; 2 * nf * m],
            interface,
            written: vec![[false; 2]; m],
        }
    }

    pub fn nf(&self) -> usize {
        self.nf
    }

    pub fn num_facets(&self) -> usize {
        self.global.len()
    }

    pub fn global_id(&self, local: usize) -> usize {
        self.global[local]
    }

    pub fn interface(&self) -> &[InterfaceLink] {
        &self.interface
    }

    /// `[values..., derivatives...]` of one side of a local facet.
    pub fn side(&self, local: usize, side: Side) -> &[f64] {
        let o = (4 * local + 2 * side.index()) * self.nf;
        &self.proj[o..o + 2 * self.nf]
    }

    pub fn side_mut(&mut self, local: usize, side: Side) -> &mut [f64] {
        self.written[local][side.index()] = true;
        let o = (4 * local + 2 * side.index()) * self.nf;
        &mut self.proj[o..o + 2 * self.nf]
    }

    /// Both sides and the flux slot of a local facet.
    pub fn flux_inputs(&mut self, local: usize) -> (&[f64], &[f64], &mut [f64]) {
        let nf = self.nf;
        let p = &self.proj[4 * local * nf..4 * (local + 1) * nf];
        let (minus, plus) = p.split_at(2 * nf);
        let w = &mut self.flux[2 * local * nf..2 * (local + 1) * nf];
        (minus, plus, w)
    }

    pub fn flux(&self, local: usize) -> &[f64] {
        &self.flux[2 * local * self.nf..2 * (local + 1) * self.nf]
    }

    pub fn was_written(&self, local: usize, side: Side) -> bool {
        self.written[local][side.index()]
    }
}

/// Copies the remotely owned side of every interface facet from the
/// subdomain that wrote it. A no-op for a single subdomain.
pub fn exchange_interface(subs: &mut [SubdomainFacets]) {
    if subs.len() < 2 {
        return;
    }
    let nf = subs[0].nf;
    let mut incoming: Vec<Vec<(usize, Side, Vec<f64>)>> = vec![Vec::new(); subs.len()];
    for (p, sub) in subs.iter().enumerate() {
        for link in &sub.interface {
            let src = &subs[link.remote_part];
            debug_assert!(
                src.was_written(link.remote_local, link.remote_side),
                "interface side never written by its owner"
            );
            debug_assert_eq!(src.global[link.remote_local], sub.global[link.local]);
            incoming[p].push((
                link.local,
                link.remote_side,
                src.side(link.remote_local, link.remote_side).to_vec(),
            ));
        }
    }
    for (sub, list) in subs.iter_mut().zip(incoming) {
        for (local, side, values) in list {
            let o = (4 * local + 2 * side.index()) * nf;
            sub.proj[o..o + 2 * nf].copy_from_slice(&values);
            sub.written[local][side.index()] = true;
        }
    }
}

/// Global `[side][quantity][node]` projection field assembled from the
/// subdomains; boundary facets keep zeros on the `+` side.
pub fn gather_projections(subs: &[SubdomainFacets], num_facets: usize) -> Vec<f64> {
    let nf = subs.first().map_or(0, |s| s.nf);
    let mut out = vec![0.0; 4 * nf * num_facets];
    let mut seen = vec![[false; 2]; num_facets];
    for sub in subs {
        for (local, &g) in sub.global.iter().enumerate() {
            for side in [Side::Minus, Side::Plus] {
                if sub.was_written(local, side) && !seen[g][side.index()] {
                    let o = (4 * g + 2 * side.index()) * nf;
                    out[o..o + 2 * nf].copy_from_slice(sub.side(local, side));
                    seen[g][side.index()] = true;
                }
            }
        }
    }
    out
}

/// Builds the local facet tables of every subdomain.
///
/// Returns the facet storage and, per subdomain, the local facet index of
/// each face of each cell (`(pos - start) * 2d + face`).
pub fn build_subdomain_facets(
    mesh: &Mesh,
    partition: &Partition,
    nf: usize,
) -> (Vec<SubdomainFacets>, Vec<Vec<usize>>) {
    let parts = partition.num_parts();
    let nfaces = mesh.faces_per_cell();
    let mut local_of: Vec<std::collections::HashMap<usize, usize>> = vec![Default::default(); parts];
    let mut globals: Vec<Vec<usize>> = vec![Vec::new(); parts];
    let mut face_tables: Vec<Vec<usize>> = Vec::with_capacity(parts);
    for p in 0..parts {
        let range = partition.range(p);
        let mut table = Vec::with_capacity(range.len() * nfaces);
        for pos in range {
            let cell = mesh.cell_at(pos);
            for fr in mesh.cell_faces(cell) {
                let next = globals[p].len();
                let l = *local_of[p].entry(fr.facet).or_insert(next);
                if l == next {
                    globals[p].push(fr.facet);
                }
                table.push(l);
            }
        }
        face_tables.push(table);
    }
    let mut subs = Vec::with_capacity(parts);
    for p in 0..parts {
        let mut links = Vec::new();
        for (local, &g) in globals[p].iter().enumerate() {
            let facet = mesh.facet(g);
            if let Some(plus) = facet.plus {
                let (om, op) = (partition.owner(facet.minus), partition.owner(plus));
                if om != op {
                    let (remote_side, remote_part) = if om == p { (Side::Plus, op) } else { (Side::Minus, om) };
                    links.push(InterfaceLink {
                        local,
                        remote_side,
                        remote_part,
                        remote_local: local_of[remote_part][&g],
                    });
                }
            }
        }
        subs.push(SubdomainFacets::new(nf, globals[p].clone(), links));
    }
    (subs, face_tables)
}

/// One value per mesh vertex (lexicographic), boundary vertices masked.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexField {
    data: Vec<f64>,
    boundary: Vec<bool>,
}

impl VertexField {
    pub fn zeros(mesh: &Mesh) -> Self {
        let boundary = (0..mesh.num_vertices()).map(|v| mesh.is_boundary_vertex(v)).collect();
        Self {
            data: vec![0.0; mesh.num_vertices()],
            boundary,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary[v]
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    /// Pins boundary vertices to zero.
    pub fn mask_boundary(&mut self) {
        for (v, b) in self.data.iter_mut().zip(&self.boundary) {
            if *b {
                *v = 0.0;
            }
        }
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn norm(&self, kind: NormKind) -> f64 {
        norm(&self.data, kind)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("vertex,value\n");
        for (i, v) in self.data.iter().enumerate() {
            let _ = writeln!(s, "{i},{v:.16e}");
        }
        s
    }
}
