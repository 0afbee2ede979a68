//! hp-multigrid: block-Jacobi smoothing on the DG level, correction in the
//! lowest-order continuous space on the same mesh, and a geometric V-cycle
//! over the nested vertex grids for that correction.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::fields::{norm, CellField, NormKind, VertexField};
use crate::localops::{cell_prolongation, CoarseOps};
use crate::mesh::{build_hierarchy, Mesh};
use crate::operator::DgLevel;
use crate::smoother::{Counters, Smoother, SmootherConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoarseMode {
    /// Repeat V-cycles until the coarse residual drops to 1e-14 (relative, max norm).
    Exact,
    /// One V-cycle per correction.
    #[serde(rename = "vcycle")]
    SingleVcycle,
}

impl std::str::FromStr for CoarseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(CoarseMode::Exact),
            "vcycle" => Ok(CoarseMode::SingleVcycle),
            other => Err(Error::InvalidArgument(format!("unknown coarse mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    /// Change of the iterate between cycles.
    #[serde(rename = "prec")]
    Preconditioned,
    /// `b - A u`.
    #[serde(rename = "unprec")]
    Unpreconditioned,
}

impl std::str::FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prec" => Ok(Criterion::Preconditioned),
            "unprec" => Ok(Criterion::Unpreconditioned),
            other => Err(Error::InvalidArgument(format!("unknown criterion '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MgConfig {
    /// DG pre-smoothing sweeps per cycle; there is no post-smoothing.
    pub nu: usize,
    pub coarse_mode: CoarseMode,
    pub nu_cg_pre: usize,
    pub nu_cg_post: usize,
    pub omega_cg: f64,
    /// Jacobi iterations on the coarsest vertex grid.
    pub coarsest_iterations: usize,
    pub max_cycles: usize,
    pub tolerance: f64,
    pub criterion: Criterion,
}

impl Default for MgConfig {
    fn default() -> Self {
        Self {
            nu: 4,
            coarse_mode: CoarseMode::SingleVcycle,
            nu_cg_pre: 4,
            nu_cg_post: 4,
            omega_cg: 0.6,
            coarsest_iterations: 100,
            max_cycles: 300,
            tolerance: 1e-7,
            criterion: Criterion::Preconditioned,
        }
    }
}

impl MgConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nu == 0 {
            return Err(Error::InvalidArgument("at least one smoothing step per cycle".into()));
        }
        if self.tolerance <= 0.0 || !self.tolerance.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "tolerance {} must be positive",
                self.tolerance
            )));
        }
        Ok(())
    }
}

/// Vertex grid of one level with its operator data.
#[derive(Debug)]
pub struct CgLevel {
    mesh: Arc<Mesh>,
    ops: CoarseOps,
    /// Vertices of every cell (lexicographic cells), `2^d` per cell.
    cell_vertices: Vec<usize>,
    diagonal: Vec<f64>,
    boundary: Vec<bool>,
}

impl CgLevel {
    fn new(mesh: Arc<Mesh>) -> Result<Self> {
        let ops = CoarseOps::new(mesh.dim(), mesh.h())?;
        let nv = mesh.num_vertices();
        let cell_vertices: Vec<usize> = (0..mesh.num_cells()).flat_map(|c| mesh.cell_vertices(c)).collect();
        let mut diagonal = vec![0.0; nv];
        for &v in &cell_vertices {
            diagonal[v] += ops.element_diagonal();
        }
        let boundary = (0..nv).map(|v| mesh.is_boundary_vertex(v)).collect();
        Ok(Self {
            mesh,
            ops,
            cell_vertices,
            diagonal,
            boundary,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn num_vertices(&self) -> usize {
        self.diagonal.len()
    }

    /// Accumulated vertex diagonal `D`.
    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary[v]
    }

    fn mask(&self, x: &mut [f64]) {
        for (xi, &b) in x.iter_mut().zip(&self.boundary) {
            if b {
                *xi = 0.0;
            }
        }
    }

    /// `y = A x` with Dirichlet vertices masked on input and output.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let nv = 1 << self.mesh.dim();
        let e = self.ops.element();
        y.iter_mut().for_each(|v| *v = 0.0);
        let mut xl = [0.0; 8];
        for verts in self.cell_vertices.chunks_exact(nv) {
            for (k, &v) in verts.iter().enumerate() {
                xl[k] = if self.boundary[v] { 0.0 } else { x[v] };
            }
            for (k, &v) in verts.iter().enumerate() {
                let row = e.row(k);
                let mut s = 0.0;
                for (a, b) in row.iter().zip(&xl[..nv]) {
                    s += a * b;
                }
                y[v] += s;
            }
        }
        self.mask(y);
    }

    fn residual(&self, x: &[f64], b: &[f64], r: &mut [f64]) {
        self.apply(x, r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        self.mask(r);
    }

    /// Damped point-Jacobi steps.
    pub fn jacobi(&self, x: &mut [f64], b: &[f64], steps: usize, omega: f64) {
        let mut r = vec![0.0; x.len()];
        for _ in 0..steps {
            self.residual(x, b, &mut r);
            for ((xi, ri), di) in x.iter_mut().zip(&r).zip(&self.diagonal) {
                *xi += omega * ri / di;
            }
            self.mask(x);
        }
    }
}

/// Interpolation weights from a vertex grid to the grid refined by three:
/// for every fine vertex, its `(coarse vertex, weight)` pairs.
fn transfer_weights(fine: &Mesh, coarse: &Mesh) -> Vec<Vec<(usize, f64)>> {
    let dim = fine.dim();
    (0..fine.num_vertices())
        .map(|v| {
            let c = fine.vertex_coords(v);
            let mut list = vec![([0usize; 3], 1.0)];
            for a in 0..dim {
                let (i, k) = (c[a] / 3, c[a] % 3);
                let mut next = Vec::with_capacity(list.len() * 2);
                for (idx, w) in list {
                    let mut lo = idx;
                    lo[a] = i;
                    if k == 0 {
                        next.push((lo, w));
                    } else {
                        let t = k as f64 / 3.0;
                        let mut hi = idx;
                        hi[a] = i + 1;
                        next.push((lo, w * (1.0 - t)));
                        next.push((hi, w * t));
                    }
                }
                list = next;
            }
            list.into_iter()
                .map(|(idx, w)| (coarse.vertex_id(&idx[..dim]), w))
                .collect()
        })
        .collect()
}

/// The continuous vertex hierarchy, finest first.
#[derive(Debug)]
pub struct CgHierarchy {
    levels: Vec<CgLevel>,
    /// `transfers[l]` maps level `l + 1` (coarser) to level `l`.
    transfers: Vec<Vec<Vec<(usize, f64)>>>,
}

impl CgHierarchy {
    pub fn new(dim: usize, level: u32) -> Result<Self> {
        let meshes: Vec<Arc<Mesh>> = build_hierarchy(dim, level)?.into_iter().map(Arc::new).collect();
        let levels = meshes.iter().cloned().map(CgLevel::new).collect::<Result<Vec<_>>>()?;
        let transfers = meshes.windows(2).map(|w| transfer_weights(&w[0], &w[1])).collect();
        Ok(Self { levels, transfers })
    }

    pub fn levels(&self) -> &[CgLevel] {
        &self.levels
    }

    pub fn finest(&self) -> &CgLevel {
        &self.levels[0]
    }

    /// `coarse += R fine` with `R` the transpose of the interpolation.
    fn restrict(&self, l: usize, fine: &[f64], coarse: &mut [f64]) {
        for (f, pairs) in self.transfers[l].iter().enumerate() {
            for &(c, w) in pairs {
                coarse[c] += w * fine[f];
            }
        }
        self.levels[l + 1].mask(coarse);
    }

    /// `fine += P coarse`.
    fn prolongate_add(&self, l: usize, coarse: &[f64], fine: &mut [f64]) {
        for (f, pairs) in self.transfers[l].iter().enumerate() {
            let mut s = 0.0;
            for &(c, w) in pairs {
                s += w * coarse[c];
            }
            fine[f] += s;
        }
        self.levels[l].mask(fine);
    }

    /// Interpolation between two adjacent levels as a dense matrix (tests).
    pub fn transfer_matrix(&self, l: usize) -> DenseMatrix {
        let nf = self.levels[l].num_vertices();
        let nc = self.levels[l + 1].num_vertices();
        let mut p = DenseMatrix::zeros(nf, nc);
        for (f, pairs) in self.transfers[l].iter().enumerate() {
            for &(c, w) in pairs {
                p.set(f, c, p.get(f, c) + w);
            }
        }
        p
    }

    /// One V-cycle for `A x = b` on level `l`, starting from `x`.
    pub fn vcycle_from(&self, l: usize, x: &mut [f64], b: &[f64], cfg: &MgConfig) {
        let lv = &self.levels[l];
        if l + 1 == self.levels.len() {
            lv.jacobi(x, b, cfg.coarsest_iterations, cfg.omega_cg);
            return;
        }
        lv.jacobi(x, b, cfg.nu_cg_pre, cfg.omega_cg);
        let mut r = vec![0.0; x.len()];
        lv.residual(x, b, &mut r);
        let mut rc = vec![0.0; self.levels[l + 1].num_vertices()];
        self.restrict(l, &r, &mut rc);
        let mut ec = vec![0.0; rc.len()];
        self.vcycle_from(l + 1, &mut ec, &rc, cfg);
        self.prolongate_add(l, &ec, x);
        lv.jacobi(x, b, cfg.nu_cg_post, cfg.omega_cg);
    }

    /// One V-cycle from a zero initial guess on the finest level.
    pub fn vcycle(&self, b: &[f64], cfg: &MgConfig) -> Vec<f64> {
        let mut x = vec![0.0; b.len()];
        self.vcycle_from(0, &mut x, b, cfg);
        x
    }

    /// Repeated V-cycles until `||b - A x||_inf <= 1e-14 ||b||_inf`.
    pub fn solve_exact(&self, b: &[f64], cfg: &MgConfig) -> Result<Vec<f64>> {
        const TOL: f64 = 1e-14;
        const MAX_CYCLES: usize = 100;
        const GROWTH_WINDOW: usize = 50;
        let fine = self.finest();
        let mut x = vec![0.0; b.len()];
        let mut r = b.to_vec();
        fine.mask(&mut r);
        let r0 = norm(&r, NormKind::Linf);
        if r0 == 0.0 {
            return Ok(x);
        }
        let mut best = r0;
        let mut stalled = 0;
        for k in 1..=MAX_CYCLES {
            self.vcycle_from(0, &mut x, b, cfg);
            fine.residual(&x, b, &mut r);
            let rk = norm(&r, NormKind::Linf);
            if !rk.is_finite() || (k >= GROWTH_WINDOW && rk > r0) {
                return Err(Error::CoarseDivergence {
                    initial: r0,
                    current: rk,
                });
            }
            if rk <= TOL * r0 {
                break;
            }
            // round-off floor reached
            if rk < best {
                best = rk;
                stalled = 0;
            } else {
                stalled += 1;
                if stalled >= 3 {
                    break;
                }
            }
        }
        Ok(x)
    }
}

/// One row of the cycle trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub cycle: usize,
    pub r_l2: f64,
    pub r_linf: f64,
    pub rprec_l2: f64,
    pub rprec_linf: f64,
}

/// Per-cycle residual history with its normalisations.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CycleTrace {
    pub r0_l2: f64,
    pub r0_linf: f64,
    /// Norms of `u_1 - u_0`, the change over the first cycle.
    pub rprec1_l2: f64,
    pub rprec1_linf: f64,
    pub records: Vec<CycleRecord>,
}

fn ratio(x: f64, base: f64) -> f64 {
    if base == 0.0 {
        0.0
    } else {
        x / base
    }
}

impl CycleTrace {
    pub fn relative(&self, rec: &CycleRecord, criterion: Criterion) -> f64 {
        match criterion {
            Criterion::Preconditioned => ratio(rec.rprec_l2, self.rprec1_l2),
            Criterion::Unpreconditioned => ratio(rec.r_l2, self.r0_l2),
        }
    }

    pub fn last_relative(&self, criterion: Criterion) -> Option<f64> {
        self.records.last().map(|r| self.relative(r, criterion))
    }

    /// First cycle whose relative residual is at most `tol`.
    pub fn first_below(&self, criterion: Criterion, tol: f64) -> Option<usize> {
        self.records
            .iter()
            .find(|r| self.relative(r, criterion) <= tol)
            .map(|r| r.cycle)
    }

    /// Mean contraction per cycle over the last `window` cycles. `None` with
    /// fewer than two records or a vanishing residual.
    pub fn asymptotic_rate(&self, criterion: Criterion, window: usize) -> Option<f64> {
        let n = self.records.len();
        if n < 2 || window == 0 {
            return None;
        }
        let k = window.min(n - 1);
        let last = self.relative(&self.records[n - 1], criterion);
        let first = self.relative(&self.records[n - 1 - k], criterion);
        if first <= 0.0 || last <= 0.0 {
            return None;
        }
        Some((last / first).powf(1.0 / k as f64))
    }

    /// CSV with header `cycle,r_l2,r_linf,rprec_l2,rprec_linf` (absolute norms).
    pub fn to_csv(&self) -> String {
        let mut s = String::from("cycle,r_l2,r_linf,rprec_l2,rprec_linf\n");
        for r in &self.records {
            let _ = writeln!(
                s,
                "{},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.cycle, r.r_l2, r.r_linf, r.rprec_l2, r.rprec_linf
            );
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub u: CellField,
    pub trace: CycleTrace,
    pub converged: bool,
    pub cycles: usize,
    /// Mesh traversals of the algorithm (diagnostic residuals excluded).
    pub traversals: u64,
    pub counters: Counters,
}

/// Cell-to-vertex transfer of the DG level: `P_{K<-V}` and the cell vertices.
#[derive(Debug)]
struct Transfer {
    prolongation: DenseMatrix,
    /// Vertices of the cell at every SFC position, `2^d` per cell.
    cell_vertices: Vec<usize>,
    nv: usize,
}

impl Transfer {
    fn prolongate_cell(&self, e: &[f64], pos: usize, uk: &mut [f64]) {
        let mut local = [0.0; 8];
        for (k, &v) in self.cell_vertices[pos * self.nv..(pos + 1) * self.nv]
            .iter()
            .enumerate()
        {
            local[k] = e[v];
        }
        self.prolongation.mul_add(1.0, &local[..self.nv], uk);
    }
}

/// Two-grid cycle driver with a recursive vertex V-cycle for the correction.
pub struct MultigridSolver {
    level: Arc<DgLevel>,
    smoother: Smoother,
    cg: CgHierarchy,
    transfer: Transfer,
    cfg: MgConfig,
}

impl MultigridSolver {
    pub fn new(level: Arc<DgLevel>, smoother_cfg: SmootherConfig, cfg: MgConfig) -> Result<Self> {
        cfg.validate()?;
        let mesh = level.mesh().clone();
        let cg = CgHierarchy::new(mesh.dim(), mesh.level())?;
        let transfer = Transfer {
            prolongation: cell_prolongation(level.basis(), mesh.dim()),
            cell_vertices: (0..mesh.num_cells())
                .flat_map(|pos| mesh.cell_vertices(mesh.cell_at(pos)))
                .collect(),
            nv: 1 << mesh.dim(),
        };
        let smoother = Smoother::new(level.clone(), smoother_cfg)?;
        Ok(Self {
            level,
            smoother,
            cg,
            transfer,
            cfg,
        })
    }

    pub fn level(&self) -> &Arc<DgLevel> {
        &self.level
    }

    pub fn config(&self) -> &MgConfig {
        &self.cfg
    }

    pub fn smoother(&mut self) -> &mut Smoother {
        &mut self.smoother
    }

    pub fn hierarchy(&self) -> &CgHierarchy {
        &self.cg
    }

    /// `P_{K<-V}` of the DG basis.
    pub fn cell_prolongation(&self) -> &DenseMatrix {
        &self.transfer.prolongation
    }

    /// Dual restriction `sum_K P^T r_K` into the finest vertex grid, summed
    /// in SFC order so the result is independent of the partition.
    pub fn restrict(&self, r: &CellField) -> VertexField {
        let t = &self.transfer;
        let mut out = VertexField::zeros(self.level.mesh());
        let mut local = vec![0.0; t.nv];
        let data = out.as_mut_slice();
        for pos in 0..r.num_cells() {
            local.iter_mut().for_each(|v| *v = 0.0);
            t.prolongation.mul_transpose_add(1.0, r.cell(pos), &mut local);
            for (k, &v) in t.cell_vertices[pos * t.nv..(pos + 1) * t.nv].iter().enumerate() {
                data[v] += local[k];
            }
        }
        out.mask_boundary();
        out
    }

    /// `P e` as a cell field.
    pub fn prolongate(&self, e: &VertexField) -> CellField {
        let mut out = self.level.zero_field();
        for pos in 0..out.num_cells() {
            self.transfer.prolongate_cell(e.as_slice(), pos, out.cell_mut(pos));
        }
        out
    }

    /// Approximate solution of `(P^T A P) e = P^T r` in the coarse space.
    pub fn coarse_solve(&self, rv: &VertexField) -> Result<VertexField> {
        let e = match self.cfg.coarse_mode {
            CoarseMode::Exact => self.cg.solve_exact(rv.as_slice(), &self.cfg)?,
            CoarseMode::SingleVcycle => self.cg.vcycle(rv.as_slice(), &self.cfg),
        };
        let mut out = VertexField::zeros(self.level.mesh());
        out.as_mut_slice().copy_from_slice(&e);
        out.mask_boundary();
        Ok(out)
    }

    /// Correction `delta u = P e` for a DG residual `r`.
    pub fn coarse_grid_correction(&self, r: &CellField) -> Result<CellField> {
        let e = self.coarse_solve(&self.restrict(r))?;
        Ok(self.prolongate(&e))
    }

    /// Runs cycles from `u0` until the configured criterion is met.
    pub fn solve(&mut self, u0: &CellField, b: &CellField) -> Result<SolveOutcome> {
        self.solve_with(u0, b, |_, _| false)
    }

    /// As [`Self::solve`], with an extra stopping test evaluated after every
    /// cycle on the trace and the current iterate.
    pub fn solve_with<S>(&mut self, u0: &CellField, b: &CellField, mut stop: S) -> Result<SolveOutcome>
    where
        S: FnMut(&CycleTrace, &CellField) -> bool,
    {
        let mut u = u0.clone();
        self.smoother.reset_counters();
        self.smoother.warm_up(&mut u, b)?;
        let r0 = self.level.residual(&u, b);
        let mut trace = CycleTrace {
            r0_l2: r0.norm(NormKind::L2),
            r0_linf: r0.norm(NormKind::Linf),
            ..Default::default()
        };
        let mut converged = trace.r0_l2 == 0.0;
        let mut r = self.level.zero_field();
        let mut cycles = 0;
        while !converged && cycles < self.cfg.max_cycles {
            cycles += 1;
            let u_old = u.clone();
            self.smoother.sweeps(&mut u, b, self.cfg.nu)?;
            self.smoother.residual(&mut u, b, &mut r)?;
            let e = self.coarse_solve(&self.restrict(&r))?;
            let transfer = &self.transfer;
            let ev = e.as_slice();
            self.smoother
                .correct_and_project(&mut u, b, |pos, uk| transfer.prolongate_cell(ev, pos, uk))?;
            let rprec = u.difference(&u_old);
            let rd = self.level.residual(&u, b);
            let rec = CycleRecord {
                cycle: cycles,
                r_l2: rd.norm(NormKind::L2),
                r_linf: rd.norm(NormKind::Linf),
                rprec_l2: rprec.norm(NormKind::L2),
                rprec_linf: rprec.norm(NormKind::Linf),
            };
            if cycles == 1 {
                trace.rprec1_l2 = rec.rprec_l2;
                trace.rprec1_linf = rec.rprec_linf;
            }
            trace.records.push(rec);
            let rel = trace.relative(&rec, self.cfg.criterion);
            let base_zero = match self.cfg.criterion {
                Criterion::Preconditioned => trace.rprec1_l2 == 0.0,
                Criterion::Unpreconditioned => trace.r0_l2 == 0.0,
            };
            converged = base_zero || rel <= self.cfg.tolerance;
            if stop(&trace, &u) {
                break;
            }
        }
        let counters = self.smoother.counters();
        Ok(SolveOutcome {
            u,
            trace,
            converged,
            cycles,
            traversals: counters.traversals,
            counters,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{BasisKind, NodalBasis1D};
    use crate::localops::IpParams;
    use crate::oracle::{assemble_cg_matrix, solve_dense};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_masked(level: &CgLevel, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut x: Vec<f64> = (0..level.num_vertices()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        level.mask(&mut x);
        x
    }

    fn dg_level(p: usize, lvl: u32) -> Arc<DgLevel> {
        let mesh = Arc::new(Mesh::new(2, lvl).unwrap());
        let basis = NodalBasis1D::new(BasisKind::GaussLobatto, p).unwrap();
        Arc::new(DgLevel::new(mesh, basis, IpParams::default()).unwrap())
    }

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).fold(0.0, |m, (x, y)| f64::max(m, (x - y).abs()))
    }

    #[test]
    fn vertex_operator_matches_dense_assembly() {
        let h = CgHierarchy::new(2, 2).unwrap();
        let fine = h.finest();
        let a = assemble_cg_matrix(fine.mesh());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_masked(fine, &mut rng);
        let mut y = vec![0.0; x.len()];
        fine.apply(&x, &mut y);
        assert!(max_diff(&y, &a.mul_vec(&x)) < 1e-12);
    }

    #[test]
    fn zero_right_hand_side_gives_zero_vcycle() {
        let h = CgHierarchy::new(2, 3).unwrap();
        let b = vec![0.0; h.finest().num_vertices()];
        assert!(h.vcycle(&b, &MgConfig::default()).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn vcycle_halves_the_error_against_a_direct_solve() {
        let h = CgHierarchy::new(2, 3).unwrap();
        let fine = h.finest();
        let a = assemble_cg_matrix(fine.mesh());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let b = random_masked(fine, &mut rng);
        let exact = solve_dense(&a, &b).unwrap();
        let cfg = MgConfig::default();
        let mut x = vec![0.0; b.len()];
        let mut err = norm(&exact, NormKind::L2);
        for _ in 0..5 {
            h.vcycle_from(0, &mut x, &b, &cfg);
            let e: Vec<f64> = x.iter().zip(&exact).map(|(p, q)| p - q).collect();
            let next = norm(&e, NormKind::L2);
            assert!(next <= 0.5 * err, "{next} vs {err}");
            err = next;
        }
    }

    #[test]
    fn more_vcycles_reduce_the_residual() {
        let h = CgHierarchy::new(2, 3).unwrap();
        let fine = h.finest();
        let mut b = vec![1.0; fine.num_vertices()];
        fine.mask(&mut b);
        let cfg = MgConfig::default();
        let mut x = vec![0.0; b.len()];
        let mut r = vec![0.0; b.len()];
        let mut last = norm(&b, NormKind::L2);
        for _ in 0..2 {
            h.vcycle_from(0, &mut x, &b, &cfg);
            fine.residual(&x, &b, &mut r);
            let now = norm(&r, NormKind::L2);
            assert!(now < last);
            last = now;
        }
    }

    #[test]
    fn exact_coarse_solve_reaches_round_off() {
        let h = CgHierarchy::new(2, 3).unwrap();
        let fine = h.finest();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = random_masked(fine, &mut rng);
        let x = h.solve_exact(&b, &MgConfig::default()).unwrap();
        let mut r = vec![0.0; b.len()];
        fine.residual(&x, &b, &mut r);
        assert!(norm(&r, NormKind::Linf) <= 1e-12 * norm(&b, NormKind::Linf));
    }

    #[test]
    fn vertex_transfer_reproduces_linear_functions() {
        let h = CgHierarchy::new(2, 2).unwrap();
        let (fine, coarse) = (&h.levels()[0], &h.levels()[1]);
        let f = |m: &Mesh, v: usize| {
            let c = m.vertex_coords(v);
            let s = m.h();
            2.0 * c[0] as f64 * s - 0.5 * c[1] as f64 * s + 1.0
        };
        let xc: Vec<f64> = (0..coarse.num_vertices()).map(|v| f(coarse.mesh(), v)).collect();
        let p = h.transfer_matrix(0);
        let xf = p.mul_vec(&xc);
        for (v, val) in xf.iter().enumerate() {
            assert!((val - f(fine.mesh(), v)).abs() < 1e-13);
        }
    }

    #[test]
    fn restriction_is_the_adjoint_of_prolongation() {
        let lv = dg_level(2, 2);
        let s = MultigridSolver::new(lv.clone(), SmootherConfig::default(), MgConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let mut v = VertexField::zeros(lv.mesh());
            v.as_mut_slice().iter_mut().for_each(|x| *x = rng.gen_range(-1.0..1.0));
            v.mask_boundary();
            let mut w = lv.zero_field();
            w.as_mut_slice().iter_mut().for_each(|x| *x = rng.gen_range(-1.0..1.0));
            let pv = s.prolongate(&v);
            let lhs: f64 = pv.as_slice().iter().zip(w.as_slice()).map(|(a, b)| a * b).sum();
            let ptw = s.restrict(&w);
            let rhs: f64 = v.as_slice().iter().zip(ptw.as_slice()).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn zero_residual_gives_zero_correction() {
        let lv = dg_level(2, 2);
        let s = MultigridSolver::new(lv.clone(), SmootherConfig::default(), MgConfig::default()).unwrap();
        let du = s.coarse_grid_correction(&lv.zero_field()).unwrap();
        assert!(du.as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn exact_correction_is_a_galerkin_projection() {
        let lv = dg_level(2, 2);
        let cfg = MgConfig {
            coarse_mode: CoarseMode::Exact,
            ..Default::default()
        };
        let s = MultigridSolver::new(lv.clone(), SmootherConfig::default(), cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut v = VertexField::zeros(lv.mesh());
        v.as_mut_slice().iter_mut().for_each(|x| *x = rng.gen_range(-1.0..1.0));
        v.mask_boundary();
        let b = lv.apply(&s.prolongate(&v));
        let u = s.coarse_grid_correction(&b).unwrap();
        let r = lv.residual(&u, &b);
        let ptr = s.restrict(&r).norm(NormKind::Linf);
        let ptb = s.restrict(&b).norm(NormKind::Linf);
        assert!(ptr <= 1e-9 * ptb, "{ptr} vs {ptb}");
    }

    #[test]
    fn zero_problem_needs_no_cycles() {
        let lv = dg_level(2, 2);
        let mut s = MultigridSolver::new(lv.clone(), SmootherConfig::default(), MgConfig::default()).unwrap();
        let out = s.solve(&lv.zero_field(), &lv.zero_field()).unwrap();
        assert!(out.converged);
        assert_eq!(out.cycles, 0);
        assert!(out.u.as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn traversal_count_follows_cycle_formula() {
        let lv = dg_level(2, 2);
        let cfg = MgConfig {
            nu: 2,
            max_cycles: 3,
            tolerance: f64::MIN_POSITIVE,
            ..Default::default()
        };
        let mut s = MultigridSolver::new(lv.clone(), SmootherConfig::default(), cfg).unwrap();
        let mut b = lv.zero_field();
        b.fill(1.0);
        let out = s.solve(&lv.zero_field(), &b).unwrap();
        assert_eq!(out.cycles, 3);
        assert!(!out.converged);
        assert_eq!(out.traversals, 13);
    }

    #[test]
    fn solution_is_a_fixed_point() {
        let lv = dg_level(2, 1);
        let a = lv.assemble_dense();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let b: Vec<f64> = (0..a.rows()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let u = CellField::from_vec(lv.n_cell(), solve_dense(&a, &b).unwrap());
        let b = CellField::from_vec(lv.n_cell(), b);
        let cfg = MgConfig {
            max_cycles: 1,
            ..Default::default()
        };
        let mut s = MultigridSolver::new(lv.clone(), SmootherConfig::default(), cfg).unwrap();
        let out = s.solve(&u, &b).unwrap();
        assert_eq!(out.cycles, 1);
        assert!(out.u.max_abs_diff(&u) <= 1e-12 * u.norm(NormKind::Linf));
    }

    #[test]
    fn trace_rates_and_thresholds() {
        let rec = |cycle: usize, r: f64| CycleRecord {
            cycle,
            r_l2: r,
            r_linf: r,
            rprec_l2: r,
            rprec_linf: r,
        };
        let trace = CycleTrace {
            r0_l2: 1.0,
            r0_linf: 1.0,
            rprec1_l2: 0.5,
            rprec1_linf: 0.5,
            records: (1..=6).map(|c| rec(c, 0.5f64.powi(c as i32))).collect(),
        };
        let rate = trace.asymptotic_rate(Criterion::Unpreconditioned, 3).unwrap();
        assert!((rate - 0.5).abs() < 1e-14);
        assert_eq!(trace.first_below(Criterion::Unpreconditioned, 0.1), Some(4));
        assert_eq!(trace.first_below(Criterion::Preconditioned, 0.1), Some(5));
        assert_eq!(
            CycleTrace::default().asymptotic_rate(Criterion::Preconditioned, 3),
            None
        );
        let csv = trace.to_csv();
        assert_eq!(csv.lines().count(), 7);
        assert!(csv.starts_with("cycle,r_l2,r_linf,rprec_l2,rprec_linf\n"));
    }

    #[test]
    fn invalid_configuration_is_rejected() {
        let lv = dg_level(1, 1);
        let cfg = MgConfig {
            nu: 0,
            ..Default::default()
        };
        assert!(MultigridSolver::new(lv.clone(), SmootherConfig::default(), cfg).is_err());
        let cfg = MgConfig {
            tolerance: 0.0,
            ..Default::default()
        };
        assert!(MultigridSolver::new(lv, SmootherConfig::default(), cfg).is_err());
    }
}
