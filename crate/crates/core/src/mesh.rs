//! Uniform spacetree levels on the unit box: cells, oriented facets,
//! vertices, the Peano ordering and SFC partitions.
//!
//! Cells are addressed by their lexicographic id (axis 0 fastest). Field
//! storage uses the Peano position instead; [`Mesh::cell_at`] and
//! [`Mesh::sfc_position`] translate between the two.
//!
//! Facet orientation: interior facets normal to axis `a` point along `+e_a`,
//! so `K-` is the cell with the smaller coordinate. Boundary facets point
//! out of the domain and their single cell is always `K-`.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 3;
pub const MAX_LEVEL: u32 = 6;
/// Cell-count guard: level 6 is admissible in 2D, 3D stops at level 4.
const MAX_CELLS: usize = 531_441;

/// Which side of a facet a cell sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    /// `K-`: the facet normal points out of this cell.
    Minus,
    /// `K+`: the facet normal points into this cell.
    Plus,
}

impl Side {
    pub fn index(self) -> usize {
        match self {
            Side::Minus => 0,
            Side::Plus => 1,
        }
    }

    pub fn other(self) -> Side {
        match self {
            Side::Minus => Side::Plus,
            Side::Plus => Side::Minus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Facet {
    /// Coordinate axis the normal is aligned with.
    pub axis: usize,
    /// Sign of the normal along `axis`.
    pub normal_sign: i8,
    /// Lexicographic id of `K-`.
    pub minus: usize,
    /// Lexicographic id of `K+`; `None` on the boundary.
    pub plus: Option<usize>,
}

impl Facet {
    pub fn is_boundary(&self) -> bool {
        self.plus.is_none()
    }

    pub fn cell(&self, side: Side) -> Option<usize> {
        match side {
            Side::Minus => Some(self.minus),
            Side::Plus => self.plus,
        }
    }
}

/// The facet seen from one of its cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FaceRef {
    pub facet: usize,
    pub side: Side,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    dim: usize,
    level: u32,
    n: usize,
    h: f64,
    sfc_to_cell: Vec<usize>,
    cell_to_sfc: Vec<usize>,
    facets: Vec<Facet>,
    axis_offsets: [usize; MAX_DIM + 1],
    /// `cell_faces[cell * 2d + 2a + s]`, `s = 0` the lower face along `a`.
    cell_faces: Vec<FaceRef>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MeshSummary {
    pub dim: usize,
    pub level: u32,
    pub cells_per_axis: usize,
    pub h: f64,
    pub cells: usize,
    pub interior_facets: usize,
    pub boundary_facets: usize,
    pub vertices: usize,
}

impl Mesh {
    pub fn new(dim: usize, level: u32) -> Result<Self> {
        if !(2..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidArgument(format!("dimension {dim} not in 2..=3")));
        }
        if level == 0 || level > MAX_LEVEL {
            return Err(Error::InvalidArgument(format!("level {level} outside 1..={MAX_LEVEL}")));
        }
        let n = 3usize.pow(level);
        let cells = n.pow(dim as u32);
        if cells > MAX_CELLS {
            return Err(Error::InvalidArgument(format!(
                "level {level} in {dim}D would create {cells} cells (limit {MAX_CELLS})"
            )));
        }

        let sfc_to_cell: Vec<usize> = (0..cells)
            .map(|t| {
                let c = peano_coords(t, dim, level);
                lex_index(&c[..dim], n)
            })
            .collect();
        let mut cell_to_sfc = vec![0; cells];
        for (pos, &c) in sfc_to_cell.iter().enumerate() {
            cell_to_sfc[c] = pos;
        }

        let mut axis_offsets = [0usize; MAX_DIM + 1];
        let per_axis = (n + 1) * n.pow(dim as u32 - 1);
        for a in 0..dim {
            axis_offsets[a + 1] = axis_offsets[a] + per_axis;
        }
        let mut facets = Vec::with_capacity(dim * per_axis);
        for a in 0..dim {
            let mut dims = [n; MAX_DIM];
            dims[a] = n + 1;
            for k in 0..per_axis {
                let pos = unravel(k, &dims[..dim]);
                let j = pos[a];
                let mut cell = pos;
                let facet = if j == 0 {
                    Facet {
                        axis: a,
                        normal_sign: -1,
                        minus: lex_index(&cell[..dim], n),
                        plus: None,
                    }
                } else if j == n {
                    cell[a] = n - 1;
                    Facet {
                        axis: a,
                        normal_sign: 1,
                        minus: lex_index(&cell[..dim], n),
                        plus: None,
                    }
                } else {
                    let plus = lex_index(&cell[..dim], n);
                    cell[a] = j - 1;
                    Facet {
                        axis: a,
                        normal_sign: 1,
                        minus: lex_index(&cell[..dim], n),
                        plus: Some(plus),
                    }
                };
                facets.push(facet);
            }
        }

        let mut mesh = Mesh {
            dim,
            level,
            n,
            h: 1.0 / n as f64,
            sfc_to_cell,
            cell_to_sfc,
            facets,
            axis_offsets,
            cell_faces: Vec::new(),
        };
        let mut cell_faces = Vec::with_capacity(cells * 2 * dim);
        for cell in 0..cells {
            let c = mesh.cell_coords(cell);
            for a in 0..dim {
                for s in 0..2 {
                    let mut pos = c;
                    pos[a] += s;
                    let facet = mesh.facet_at(a, &pos);
                    let side = if s == 1 || c[a] == 0 { Side::Minus } else { Side::Plus };
                    cell_faces.push(FaceRef { facet, side });
                }
            }
        }
        mesh.cell_faces = cell_faces;
        Ok(mesh)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn cells_per_axis(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn num_cells(&self) -> usize {
        self.sfc_to_cell.len()
    }

    pub fn num_facets(&self) -> usize {
        self.facets.len()
    }

    pub fn num_vertices(&self) -> usize {
        (self.n + 1).pow(self.dim as u32)
    }

    pub fn faces_per_cell(&self) -> usize {
        2 * self.dim
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn facet(&self, f: usize) -> &Facet {
        &self.facets[f]
    }

    /// Lexicographic id of the cell at Peano position `pos`.
    pub fn cell_at(&self, pos: usize) -> usize {
        self.sfc_to_cell[pos]
    }

    pub fn sfc_position(&self, cell: usize) -> usize {
        self.cell_to_sfc[cell]
    }

    pub fn sfc_order(&self) -> &[usize] {
        &self.sfc_to_cell
    }

    pub fn cell_coords(&self, cell: usize) -> [usize; MAX_DIM] {
        let dims = [self.n; MAX_DIM];
        unravel(cell, &dims[..self.dim])
    }

    pub fn cell_id(&self, coords: &[usize]) -> usize {
        lex_index(&coords[..self.dim], self.n)
    }

    /// Lower-left corner of a cell.
    pub fn cell_origin(&self, cell: usize) -> [f64; MAX_DIM] {
        let c = self.cell_coords(cell);
        let mut x = [0.0; MAX_DIM];
        for a in 0..self.dim {
            x[a] = c[a] as f64 * self.h;
        }
        x
    }

    pub fn cell_center(&self, cell: usize) -> [f64; MAX_DIM] {
        let mut x = self.cell_origin(cell);
        for v in x.iter_mut().take(self.dim) {
            *v += 0.5 * self.h;
        }
        x
    }

    /// The `2d` faces of a cell, ordered `(axis 0 lower, axis 0 upper, axis 1 lower, ...)`.
    pub fn cell_faces(&self, cell: usize) -> &[FaceRef] {
        let k = 2 * self.dim;
        &self.cell_faces[cell * k..(cell + 1) * k]
    }

    /// Facet-connected neighbours.
    pub fn neighbours(&self, cell: usize) -> impl Iterator<Item = usize> + '_ {
        self.cell_faces(cell).iter().filter_map(move |fr| {
            let f = &self.facets[fr.facet];
            f.cell(fr.side.other())
        })
    }

    /// Facet with the given position multi-index (`pos[axis]` in `0..=n`).
    pub fn facet_at(&self, axis: usize, pos: &[usize]) -> usize {
        let mut k = 0;
        let mut stride = 1;
        for a in 0..self.dim {
            let extent = if a == axis { self.n + 1 } else { self.n };
            k += pos[a] * stride;
            stride *= extent;
        }
        self.axis_offsets[axis] + k
    }

    pub fn facet_center(&self, f: usize) -> [f64; MAX_DIM] {
        let facet = &self.facets[f];
        let mut x = self.cell_center(facet.minus);
        x[facet.axis] += 0.5 * self.h;
        if facet.is_boundary() && facet.normal_sign < 0 {
            x[facet.axis] -= self.h;
        }
        x
    }

    pub fn vertex_id(&self, coords: &[usize]) -> usize {
        lex_index(&coords[..self.dim], self.n + 1)
    }

    pub fn vertex_coords(&self, v: usize) -> [usize; MAX_DIM] {
        let dims = [self.n + 1; MAX_DIM];
        unravel(v, &dims[..self.dim])
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        let c = self.vertex_coords(v);
        c[..self.dim].iter().any(|&x| x == 0 || x == self.n)
    }

    /// The `2^d` vertices of a cell; bit `a` of the local index selects the
    /// upper vertex along axis `a`.
    pub fn cell_vertices(&self, cell: usize) -> Vec<usize> {
        let c = self.cell_coords(cell);
        (0..1usize << self.dim)
            .map(|k| {
                let mut v = c;
                for (a, x) in v.iter_mut().enumerate().take(self.dim) {
                    *x += (k >> a) & 1;
                }
                self.vertex_id(&v)
            })
            .collect()
    }

    pub fn num_interior_facets(&self) -> usize {
        self.facets.iter().filter(|f| !f.is_boundary()).count()
    }

    pub fn summary(&self) -> MeshSummary {
        let interior = self.num_interior_facets();
        MeshSummary {
            dim: self.dim,
            level: self.level,
            cells_per_axis: self.n,
            h: self.h,
            cells: self.num_cells(),
            interior_facets: interior,
            boundary_facets: self.num_facets() - interior,
            vertices: self.num_vertices(),
        }
    }

    pub fn summary_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.summary())?)
    }
}

/// Builds meshes for levels `level, level-1, ..., 1` (finest first).
pub fn build_hierarchy(dim: usize, level: u32) -> Result<Vec<Mesh>> {
    if level == 0 || level > MAX_LEVEL {
        return Err(Error::InvalidArgument(format!("level {level} outside 1..={MAX_LEVEL}")));
    }
    (1..=level).rev().map(|l| Mesh::new(dim, l)).collect()
}

fn lex_index(c: &[usize], n: usize) -> usize {
    c.iter().rev().fold(0, |acc, &x| acc * n + x)
}

fn unravel(mut k: usize, dims: &[usize]) -> [usize; MAX_DIM] {
    let mut out = [0; MAX_DIM];
    for (a, &d) in dims.iter().enumerate() {
        out[a] = k % d;
        k /= d;
    }
    out
}

/// Coordinates of the `t`-th cell along the Peano curve on a `3^level` grid.
///
/// The base-3 digits of `t` are read most significant first and assigned
/// round-robin to the axes. A digit is reflected (`2 - e`) when the digits
/// of the other axes that precede it have an odd sum.
pub fn peano_coords(t: usize, dim: usize, level: u32) -> [usize; MAX_DIM] {
    let len = level as usize * dim;
    let mut digits = vec![0usize; len];
    let mut rest = t;
    for k in (0..len).rev() {
        digits[k] = rest % 3;
        rest /= 3;
    }
    let mut parity_sum = [0usize; MAX_DIM];
    let mut total = 0usize;
    let mut coords = [0usize; MAX_DIM];
    for (k, &e) in digits.iter().enumerate() {
        let axis = k % dim;
        let others = total - parity_sum[axis];
        let digit = if others % 2 == 1 { 2 - e } else { e };
        coords[axis] = coords[axis] * 3 + digit;
        parity_sum[axis] += e;
        total += e;
    }
    coords
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionMode {
    /// Sizes differ by at most one.
    Balanced,
    /// Halving sizes `N/2, N/4, ...`, remainder in the last subdomain.
    Geometric,
}

impl std::str::FromStr for PartitionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "balanced" => Ok(PartitionMode::Balanced),
            "geometric" => Ok(PartitionMode::Geometric),
            other => Err(Error::InvalidArgument(format!("unknown partition mode '{other}'"))),
        }
    }
}

/// Contiguous SFC ranges assigned to subdomains.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    mode: PartitionMode,
    ranges: Vec<Range<usize>>,
    /// Subdomain per lexicographic cell id.
    owner: Vec<usize>,
    interface_facets: Vec<usize>,
}

impl Partition {
    pub fn new(mesh: &Mesh, mode: PartitionMode, parts: usize) -> Result<Self> {
        let n = mesh.num_cells();
        if parts == 0 || parts > n {
            return Err(Error::InvalidArgument(format!(
                "cannot split {n} cells into {parts} subdomains"
            )));
        }
        let sizes: Vec<usize> = match mode {
            PartitionMode::Balanced => (0..parts).map(|i| n / parts + usize::from(i < n % parts)).collect(),
            PartitionMode::Geometric => {
                let mut remaining = n;
                let mut sizes = Vec::with_capacity(parts);
                for _ in 0..parts - 1 {
                    let s = remaining / 2;
                    sizes.push(s);
                    remaining -= s;
                }
                sizes.push(remaining);
                sizes
            }
        };
        if sizes.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "{mode:?} partition of {n} cells into {parts} parts leaves an empty subdomain"
            )));
        }
        let mut ranges = Vec::with_capacity(parts);
        let mut start = 0;
        for s in sizes {
            ranges.push(start..start + s);
            start += s;
        }
        let mut owner = vec![0; n];
        for (p, r) in ranges.iter().enumerate() {
            for pos in r.clone() {
                owner[mesh.cell_at(pos)] = p;
            }
        }
        let interface_facets = mesh
            .facets()
            .iter()
            .enumerate()
            .filter_map(|(i, f)| match f.plus {
                Some(plus) if owner[plus] != owner[f.minus] => Some(i),
                _ => None,
            })
            .collect();
        Ok(Self {
            mode,
            ranges,
            owner,
            interface_facets,
        })
    }

    /// Single subdomain covering the mesh.
    pub fn trivial(mesh: &Mesh) -> Self {
        Self::new(mesh, PartitionMode::Balanced, 1).expect("one part always fits")
    }

    pub fn mode(&self) -> PartitionMode {
        self.mode
    }

    pub fn num_parts(&self) -> usize {
        self.ranges.len()
    }

    /// SFC positions owned by subdomain `p`.
    pub fn range(&self, p: usize) -> Range<usize> {
        self.ranges[p].clone()
    }

    pub fn ranges(&self) -> &[Range<usize>] {
        &self.ranges
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.ranges.iter().map(|r| r.len()).collect()
    }

    pub fn owner(&self, cell: usize) -> usize {
        self.owner[cell]
    }

    pub fn interface_facets(&self) -> &[usize] {
        &self.interface_facets
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_one_counts() {
        let m = Mesh::new(2, 1).unwrap();
        let s = m.summary();
        assert_eq!(s.cells, 9);
        assert_eq!(s.interior_facets, 12);
        assert_eq!(s.boundary_facets, 12);
        assert_eq!(s.vertices, 16);
    }

    #[test]
    fn entity_counts_follow_closed_forms() {
        for (dim, level) in [(2, 1), (2, 2), (2, 3), (3, 1), (3, 2)] {
            let m = Mesh::new(dim, level).unwrap();
            let n = 3usize.pow(level);
            let d = dim as u32;
            assert_eq!(m.num_cells(), n.pow(d));
            assert_eq!(m.num_interior_facets(), dim * (n - 1) * n.pow(d - 1));
            assert_eq!(m.num_facets() - m.num_interior_facets(), 2 * dim * n.pow(d - 1));
        }
    }

    #[test]
    fn hierarchy_is_nested() {
        let h = build_hierarchy(2, 2).unwrap();
        assert_eq!(h.len(), 2);
        assert_eq!(h[0].num_cells(), 81);
        assert_eq!(h[1].num_cells(), 9);
        let (fine, coarse) = (&h[0], &h[1]);
        for cell in 0..fine.num_cells() {
            let c = fine.cell_coords(cell);
            let parent = coarse.cell_id(&[c[0] / 3, c[1] / 3]);
            let o = fine.cell_origin(cell);
            let po = coarse.cell_origin(parent);
            for a in 0..2 {
                assert!(o[a] >= po[a] - 1e-15 && o[a] + fine.h() <= po[a] + coarse.h() + 1e-15);
            }
        }
        let top = build_hierarchy(2, 5).unwrap();
        assert_eq!(top[0].num_cells(), 243 * 243);
        assert!(build_hierarchy(2, 0).is_err());
        assert!(build_hierarchy(2, 7).is_err());
    }

    #[test]
    fn facet_normals_point_from_minus_to_plus() {
        for (dim, level) in [(2, 2), (3, 1)] {
            let m = Mesh::new(dim, level).unwrap();
            for f in m.facets() {
                if let Some(plus) = f.plus {
                    let a = m.cell_center(f.minus);
                    let b = m.cell_center(plus);
                    assert!(f.normal_sign as f64 * (b[f.axis] - a[f.axis]) > 0.0);
                    assert_eq!(f.normal_sign, 1);
                } else {
                    // outward: the normal points away from the single cell
                    let a = m.cell_center(f.minus);
                    let outward = if a[f.axis] < 0.5 { -1 } else { 1 };
                    assert_eq!(f.normal_sign, outward);
                }
            }
        }
    }

    #[test]
    fn cell_faces_and_neighbours() {
        let m = Mesh::new(2, 2).unwrap();
        for cell in 0..m.num_cells() {
            assert_eq!(m.cell_faces(cell).len(), 4);
            let c = m.cell_coords(cell);
            let interior = c[..2].iter().all(|&x| x > 0 && x < 8);
            let nb = m.neighbours(cell).count();
            if interior {
                assert_eq!(nb, 4);
            }
            for fr in m.cell_faces(cell) {
                assert_eq!(m.facet(fr.facet).cell(fr.side), Some(cell));
            }
        }
    }

    #[test]
    fn peano_starts_at_origin_and_is_boustrophedon_at_level_one() {
        let m = Mesh::new(2, 1).unwrap();
        assert_eq!(m.cell_coords(m.cell_at(0))[..2], [0, 0]);
        // serpentine oracle: columns along axis 1, alternating direction
        let mut expected = Vec::new();
        for x in 0..3 {
            for k in 0..3 {
                let y = if x % 2 == 0 { k } else { 2 - k };
                expected.push(m.cell_id(&[x, y]));
            }
        }
        assert_eq!(m.sfc_order(), expected.as_slice());
    }

    /// Recursive construction: each cell of the level-1 curve is refined into a
    /// 3x3 serpentine traversed in the direction inherited from its parent.
    fn recursive_peano(level: u32) -> Vec<(usize, usize)> {
        fn rec(level: u32, x0: usize, y0: usize, size: usize, fx: bool, fy: bool, out: &mut Vec<(usize, usize)>) {
            if level == 0 {
                out.push((x0, y0));
                return;
            }
            let s = size / 3;
            for i in 0..3 {
                for k in 0..3 {
                    let j = if i % 2 == 0 { k } else { 2 - k };
                    // sub-curve orientation flips with the serpentine direction
                    let cfx = fx ^ (j % 2 == 1);
                    let cfy = fy ^ (i % 2 == 1);
                    let xi = if fx { 2 - i } else { i };
                    let yj = if fy { 2 - j } else { j };
                    rec(level - 1, x0 + xi * s, y0 + yj * s, s, cfx, cfy, out);
                }
            }
        }
        let mut out = Vec::new();
        rec(level, 0, 0, 3usize.pow(level), false, false, &mut out);
        out
    }

    #[test]
    fn peano_matches_recursive_construction() {
        for level in 1..=3 {
            let m = Mesh::new(2, level).unwrap();
            let oracle = recursive_peano(level);
            let ours: Vec<(usize, usize)> = m
                .sfc_order()
                .iter()
                .map(|&c| {
                    let k = m.cell_coords(c);
                    (k[0], k[1])
                })
                .collect();
            assert_eq!(ours, oracle, "level {level}");
        }
    }

    #[test]
    fn peano_is_a_continuous_bijection() {
        for (dim, level) in [(2, 1), (2, 3), (2, 4), (3, 1), (3, 2)] {
            let m = Mesh::new(dim, level).unwrap();
            let mut sorted = m.sfc_order().to_vec();
            sorted.sort_unstable();
            assert!(sorted.iter().enumerate().all(|(i, &c)| i == c));
            for w in m.sfc_order().windows(2) {
                let a = m.cell_coords(w[0]);
                let b = m.cell_coords(w[1]);
                let dist: usize = (0..dim).map(|k| a[k].abs_diff(b[k])).sum();
                assert_eq!(dist, 1, "{dim}D level {level}: {a:?} -> {b:?}");
            }
        }
    }

    #[test]
    fn balanced_partitions() {
        let m = Mesh::new(2, 1).unwrap();
        assert_eq!(
            Partition::new(&m, PartitionMode::Balanced, 3).unwrap().sizes(),
            vec![3, 3, 3]
        );
        assert_eq!(
            Partition::new(&m, PartitionMode::Balanced, 2).unwrap().sizes(),
            vec![5, 4]
        );
        assert!(Partition::new(&m, PartitionMode::Balanced, 10).is_err());
        assert!(Partition::new(&m, PartitionMode::Balanced, 0).is_err());
    }

    #[test]
    fn geometric_partition_of_level_six() {
        let m = Mesh::new(2, 6).unwrap();
        let p = Partition::new(&m, PartitionMode::Geometric, 4).unwrap();
        assert_eq!(p.sizes(), vec![265_720, 132_860, 66_430, 66_431]);
        assert_eq!(p.sizes().iter().sum::<usize>(), 531_441);
    }

    #[test]
    fn interface_facets_are_exactly_the_crossing_ones() {
        let m = Mesh::new(2, 2).unwrap();
        for mode in [PartitionMode::Balanced, PartitionMode::Geometric] {
            let p = Partition::new(&m, mode, 4).unwrap();
            for (i, f) in m.facets().iter().enumerate() {
                let crossing = f.plus.is_some_and(|plus| p.owner(plus) != p.owner(f.minus));
                assert_eq!(crossing, p.interface_facets().contains(&i));
            }
        }
    }

    #[test]
    fn summary_exports_json() {
        let json = Mesh::new(2, 2).unwrap().summary_json().unwrap();
        let back: MeshSummary = serde_json::from_str(&json).unwrap();
        assert_eq!(back.cells, 81);
    }
}
