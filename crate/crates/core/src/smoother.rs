//! Block-Jacobi smoothing of the DG level in four realisations.
//!
//! * `Vanilla`: backup, then residual from the diagonal and neighbour blocks.
//! * `ThreeStage`: projection traversal, facet flux loop, residual traversal.
//! * `Fused`: one traversal per sweep; fluxes are computed by the first cell
//!   of a subdomain that touches a facet, and each updated cell immediately
//!   re-projects itself, so projections are always current at sweep entry.
//! * `Tasked`: as `Fused`, but the cell-local part `b - Acc u` of the next
//!   residual (and, per-cell, the block inverse) is spawned to a task pool
//!   right after re-projection and awaited at the cell's next visit.
//!
//! All variants except `Vanilla` perform the same floating-point operations
//! in the same order per cell, so their iterates agree bitwise.

use std::ops::Range;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use crossbeam_channel::{Receiver, Sender};
use serde::{Deserialize, Serialize};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::fields::{build_subdomain_facets, exchange_interface, CellField, SubdomainFacets};
use crate::localops::{apply_flux, LocalBlocks};
use crate::mesh::{Partition, PartitionMode};
use crate::operator::DgLevel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Vanilla,
    #[serde(rename = "stages")]
    ThreeStage,
    Fused,
    Tasked,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Vanilla, Variant::ThreeStage, Variant::Fused, Variant::Tasked];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Vanilla => "vanilla",
            Variant::ThreeStage => "stages",
            Variant::Fused => "fused",
            Variant::Tasked => "tasked",
        }
    }

    fn keeps_projections(self) -> bool {
        matches!(self, Variant::Fused | Variant::Tasked)
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown smoother variant '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InverseMode {
    /// One interior-cell inverse shared by all cells.
    Precomputed,
    /// Re-assemble and invert the block at every cell visit.
    #[serde(rename = "percell")]
    PerCell,
}

impl std::str::FromStr for InverseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "precomputed" => Ok(InverseMode::Precomputed),
            "percell" => Ok(InverseMode::PerCell),
            other => Err(Error::InvalidArgument(format!("unknown inverse mode '{other}'"))),
        }
    }
}

/// The task types of a traversal. Only `CellResidual` and `MatrixInversion`
/// are deferred to the pool; everything else runs inline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    Projection,
    NumericalFlux,
    CellResidual,
    FacetResidual,
    SolutionUpdate,
    MatrixAssembly,
    MatrixInversion,
}

impl TaskKind {
    pub fn is_deferred(self) -> bool {
        matches!(self, TaskKind::CellResidual | TaskKind::MatrixInversion)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmootherConfig {
    pub variant: Variant,
    pub omega: f64,
    pub inverse: InverseMode,
    pub subdomains: usize,
    pub partition: PartitionMode,
    /// Task executors; only used by the tasked variant.
    pub executors: usize,
}

impl Default for SmootherConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Fused,
            omega: 0.7,
            inverse: InverseMode::Precomputed,
            subdomains: 1,
            partition: PartitionMode::Balanced,
            executors: 1,
        }
    }
}

/// Instrumentation counters. Cell accesses are counted in doubles; facet
/// accesses in facet records of `(p+1)^(d-1)` nodes, interior facets only.
/// Reads of a neighbour's cell data (vanilla variant) are facet-coupled and
/// counted separately, in doubles.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub cell_accesses: u64,
    pub facet_accesses: u64,
    pub neighbour_accesses: u64,
    pub tasks_spawned: u64,
    pub tasks_completed: u64,
    pub traversals: u64,
}

impl Counters {
    fn absorb(&mut self, other: &Counters) {
        self.cell_accesses += other.cell_accesses;
        self.facet_accesses += other.facet_accesses;
        self.neighbour_accesses += other.neighbour_accesses;
        self.tasks_spawned += other.tasks_spawned;
        self.tasks_completed += other.tasks_completed;
    }

    /// Accesses per cell: cell-local accesses per cell plus `d` times the
    /// facet-coupled accesses per interior facet, in units of doubles.
    pub fn per_cell(&self, level: &DgLevel) -> f64 {
        let mesh = level.mesh();
        let cells = mesh.num_cells() as f64;
        let interior = mesh.num_interior_facets() as f64;
        self.cell_accesses as f64 / cells
            + mesh.dim() as f64 * (self.facet_accesses as f64 * level.n_facet() as f64 + self.neighbour_accesses as f64)
                / interior
    }
}

type Job = Box<dyn FnOnce() + Send + 'static>;

/// Persistent executors fed through a channel.
struct TaskPool {
    tx: Option<Sender<Job>>,
    workers: Vec<JoinHandle<()>>,
    executed: Arc<AtomicU64>,
}

impl TaskPool {
    fn new(n: usize) -> Self {
        let (tx, rx) = crossbeam_channel::unbounded::<Job>();
        let executed = Arc::new(AtomicU64::new(0));
        let workers = (0..n.max(1))
            .map(|_| {
                let rx = rx.clone();
                let executed = executed.clone();
                std::thread::spawn(move || {
                    for job in rx {
                        job();
                        executed.fetch_add(1, Ordering::Relaxed);
                    }
                })
            })
            .collect();
        Self {
            tx: Some(tx),
            workers,
            executed,
        }
    }

    fn spawn(&self, job: Job) {
        self.tx
            .as_ref()
            .expect("pool alive")
            .send(job)
            .expect("executors alive while the pool exists");
    }
}

impl Drop for TaskPool {
    fn drop(&mut self) {
        self.tx.take();
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

#[derive(Default)]
struct Pending {
    residual: Option<Receiver<Vec<f64>>>,
    inverse: Option<Receiver<Result<DenseMatrix>>>,
}

/// Traversal state of one subdomain.
struct PartState {
    range: Range<usize>,
    /// Local facet of every face, `(pos - start) * 2d + face`.
    table: Vec<usize>,
    /// Whether the cell computes the facet's flux in a fused traversal.
    first: Vec<bool>,
    pending: Vec<Pending>,
    counters: Counters,
}

struct Ctx<'a> {
    level: &'a DgLevel,
    omega: f64,
    inverse: InverseMode,
    pool: Option<&'a TaskPool>,
    b: &'a CellField,
}

impl Ctx<'_> {
    fn nfaces(&self) -> usize {
        self.level.faces_per_cell()
    }

    /// Fluxes of the facets this cell touches first.
    fn first_touch_fluxes(&self, part: &mut PartState, facets: &mut SubdomainFacets, k: usize) {
        let pos = part.range.start + k;
        for (f, fi) in self.level.faces(pos).iter().enumerate() {
            let idx = k * self.nfaces() + f;
            if part.first[idx] {
                let (minus, plus, w) = facets.flux_inputs(part.table[idx]);
                apply_flux(minus, plus, fi.boundary, w);
                if !fi.boundary {
                    part.counters.facet_accesses += 3;
                }
            }
        }
    }

    /// `r = b - Acc u - sum_F Acf w`, the cell part either computed here or
    /// taken from the cell's deferred task.
    fn cell_residual(
        &self,
        part: &mut PartState,
        facets: &SubdomainFacets,
        k: usize,
        uk: &[f64],
        r: &mut [f64],
    ) -> Result<()> {
        let pos = part.range.start + k;
        let bk = self.b.cell(pos);
        if self.pool.is_some() {
            let rx = part.pending[k].residual.take().ok_or_else(|| {
                Error::Contract(format!("cell {pos} waits on a residual task that was never spawned"))
            })?;
            let cell_part = rx
                .recv()
                .map_err(|_| Error::Contract(format!("residual task of cell {pos} was dropped")))?;
            r.copy_from_slice(&cell_part);
            part.counters.tasks_completed += 1;
        } else {
            local_part(self.level.blocks(), uk, bk, r);
        }
        let blocks = self.level.blocks();
        for (f, fi) in self.level.faces(pos).iter().enumerate() {
            let l = part.table[k * self.nfaces() + f];
            blocks.face(f, fi.boundary).lift.mul_add(-1.0, facets.flux(l), r);
            if !fi.boundary {
                part.counters.facet_accesses += 1;
            }
        }
        Ok(())
    }

    /// `u_K += omega S^-1 r`.
    fn update(&self, part: &mut PartState, k: usize, uk: &mut [f64], r: &[f64]) -> Result<()> {
        let blocks = self.level.blocks();
        match self.inverse {
            InverseMode::Precomputed => blocks.schur_inverse().mul_add(self.omega, r, uk),
            InverseMode::PerCell => {
                let inv = if self.pool.is_some() {
                    let pos = part.range.start + k;
                    let rx = part.pending[k].inverse.take().ok_or_else(|| {
                        Error::Contract(format!("cell {pos} waits on an inversion task that was never spawned"))
                    })?;
                    part.counters.tasks_completed += 1;
                    rx.recv()
                        .map_err(|_| Error::Contract(format!("inversion task of cell {pos} was dropped")))??
                } else {
                    invert_cell_block(blocks)?
                };
                inv.mul_add(self.omega, r, uk);
            }
        }
        Ok(())
    }

    /// Writes the cell's side of each adjacent facet and, when tasked,
    /// spawns the next round of deferred work for the cell.
    fn project(&self, part: &mut PartState, facets: &mut SubdomainFacets, k: usize, uk: &[f64]) {
        let pos = part.range.start + k;
        let blocks = self.level.blocks();
        for (f, fi) in self.level.faces(pos).iter().enumerate() {
            let l = part.table[k * self.nfaces() + f];
            blocks
                .face(f, fi.boundary)
                .project
                .mul_into(uk, facets.side_mut(l, fi.side));
            if !fi.boundary {
                part.counters.facet_accesses += 1;
            }
        }
        if let Some(pool) = self.pool {
            let (tx, rx) = crossbeam_channel::bounded(1);
            let blocks_arc = self.level.blocks().clone();
            let u_copy = uk.to_vec();
            let b_copy = self.b.cell(pos).to_vec();
            pool.spawn(Box::new(move || {
                let mut r = vec![0.0; u_copy.len()];
                local_part(&blocks_arc, &u_copy, &b_copy, &mut r);
                let _ = tx.send(r);
            }));
            part.pending[k].residual = Some(rx);
            part.counters.tasks_spawned += 1;
            if self.inverse == InverseMode::PerCell && part.pending[k].inverse.is_none() {
                let (tx, rx) = crossbeam_channel::bounded(1);
                let blocks_arc = self.level.blocks().clone();
                pool.spawn(Box::new(move || {
                    let _ = tx.send(invert_cell_block(&blocks_arc));
                }));
                part.pending[k].inverse = Some(rx);
                part.counters.tasks_spawned += 1;
            }
        }
    }
}

/// `r = b - Acc u` in the canonical operation order.
fn local_part(blocks: &LocalBlocks, uk: &[f64], bk: &[f64], r: &mut [f64]) {
    blocks.acc().mul_into(uk, r);
    for (ri, bi) in r.iter_mut().zip(bk) {
        *ri = bi - *ri;
    }
}

/// Re-assembles the cell block from its reference terms and inverts it, as
/// an inhomogeneous problem would have to.
fn invert_cell_block(blocks: &LocalBlocks) -> Result<DenseMatrix> {
    blocks.reference_terms().assemble(blocks.h()).inverse()
}

pub struct Smoother {
    level: Arc<DgLevel>,
    cfg: SmootherConfig,
    partition: Partition,
    facets: Vec<SubdomainFacets>,
    parts: Vec<PartState>,
    pool: Option<TaskPool>,
    warm: bool,
    counters: Counters,
}

impl Smoother {
    pub fn new(level: Arc<DgLevel>, cfg: SmootherConfig) -> Result<Self> {
        if !(cfg.omega > 0.0 && cfg.omega <= 1.0) && cfg.omega != 0.0 {
            return Err(Error::InvalidArgument(format!(
                "relaxation {} not in (0, 1]",
                cfg.omega
            )));
        }
        let mesh = level.mesh().clone();
        let partition = Partition::new(&mesh, cfg.partition, cfg.subdomains)?;
        let (facets, tables) = build_subdomain_facets(&mesh, &partition, level.n_facet());
        let nfaces = mesh.faces_per_cell();
        let parts = tables
            .into_iter()
            .enumerate()
            .map(|(p, table)| {
                let range = partition.range(p);
                let mut first = Vec::with_capacity(table.len());
                for pos in range.clone() {
                    for fi in level.faces(pos) {
                        first.push(match fi.neighbour {
                            Some(q) if range.contains(&q) => pos < q,
                            _ => true,
                        });
                    }
                }
                debug_assert_eq!(first.len(), range.len() * nfaces);
                PartState {
                    pending: (0..range.len()).map(|_| Pending::default()).collect(),
                    range,
                    table,
                    first,
                    counters: Counters::default(),
                }
            })
            .collect();
        let pool = (cfg.variant == Variant::Tasked).then(|| TaskPool::new(cfg.executors));
        Ok(Self {
            level,
            cfg,
            partition,
            facets,
            parts,
            pool,
            warm: false,
            counters: Counters::default(),
        })
    }

    pub fn level(&self) -> &Arc<DgLevel> {
        &self.level
    }

    pub fn config(&self) -> &SmootherConfig {
        &self.cfg
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn counters(&self) -> Counters {
        let mut c = self.counters;
        for p in &self.parts {
            c.absorb(&p.counters);
        }
        c
    }

    pub fn reset_counters(&mut self) {
        self.counters = Counters::default();
        for p in &mut self.parts {
            p.counters = Counters::default();
        }
    }

    /// Tasks run by the executors so far (tasked variant only).
    pub fn tasks_executed(&self) -> u64 {
        self.pool.as_ref().map_or(0, |p| p.executed.load(Ordering::Relaxed))
    }

    pub fn is_warm(&self) -> bool {
        self.warm
    }

    /// Global projection field as seen by the subdomains, for tests.
    pub fn projections(&self) -> Vec<f64> {
        crate::fields::gather_projections(&self.facets, self.level.mesh().num_facets())
    }

    /// Runs `f` on every subdomain, in parallel when there are several.
    fn run<F>(&mut self, u: &mut CellField, b: &CellField, out: Option<&mut CellField>, f: F) -> Result<()>
    where
        F: Fn(&Ctx, &mut PartState, &mut SubdomainFacets, &mut [f64], &mut [f64]) -> Result<()> + Sync,
    {
        let ctx = Ctx {
            level: &self.level,
            omega: self.cfg.omega,
            inverse: self.cfg.inverse,
            pool: self.pool.as_ref(),
            b,
        };
        let ranges = self.partition.ranges().to_vec();
        let us = u.split_ranges_mut(&ranges);
        let outs: Vec<&mut [f64]> = match out {
            Some(o) => o.split_ranges_mut(&ranges),
            None => ranges.iter().map(|_| <&mut [f64]>::default()).collect(),
        };
        let work = self.parts.iter_mut().zip(self.facets.iter_mut()).zip(us).zip(outs);
        if ranges.len() == 1 {
            for (((part, facets), uk), ok) in work {
                f(&ctx, part, facets, uk, ok)?;
            }
            return Ok(());
        }
        let results: Vec<Result<()>> = std::thread::scope(|s| {
            let handles: Vec<_> = work
                .map(|(((part, facets), uk), ok)| {
                    let (ctx, f) = (&ctx, &f);
                    s.spawn(move || f(ctx, part, facets, uk, ok))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| {
                    h.join()
                        .unwrap_or_else(|_| Err(Error::Contract("traversal worker panicked".into())))
                })
                .collect()
        });
        results.into_iter().collect()
    }

    /// Projection traversal after `u` was set externally. Required before
    /// the first fused or tasked sweep; the tasked variant also spawns the
    /// first round of deferred tasks here.
    pub fn warm_up(&mut self, u: &mut CellField, b: &CellField) -> Result<()> {
        let n = self.level.n_cell();
        self.run(u, b, None, |ctx, part, facets, us, _| {
            for k in 0..part.range.len() {
                let uk = &us[k * n..(k + 1) * n];
                part.counters.cell_accesses += n as u64;
                ctx.project(part, facets, k, uk);
            }
            Ok(())
        })?;
        exchange_interface(&mut self.facets);
        self.counters.traversals += 1;
        self.warm = true;
        Ok(())
    }

    fn require_warm(&self) -> Result<()> {
        if self.cfg.variant.keeps_projections() && !self.warm {
            return Err(Error::Contract(format!(
                "{} sweep called without the projection warm-up",
                self.cfg.variant.name()
            )));
        }
        Ok(())
    }

    /// One block-Jacobi iteration.
    pub fn sweep(&mut self, u: &mut CellField, b: &CellField) -> Result<()> {
        match self.cfg.variant {
            Variant::Vanilla => self.sweep_vanilla(u, b),
            Variant::ThreeStage => self.sweep_three_stage(u, b),
            Variant::Fused | Variant::Tasked => self.sweep_fused(u, b),
        }
    }

    pub fn sweeps(&mut self, u: &mut CellField, b: &CellField, n: usize) -> Result<()> {
        for _ in 0..n {
            self.sweep(u, b)?;
        }
        Ok(())
    }

    fn sweep_vanilla(&mut self, u: &mut CellField, b: &CellField) -> Result<()> {
        let n = self.level.n_cell();
        let u_old = u.clone();
        let level = self.level.clone();
        self.run(u, b, None, |ctx, part, _facets, us, _| {
            let mut r = vec![0.0; n];
            for k in 0..part.range.len() {
                let pos = part.range.start + k;
                let uk = &mut us[k * n..(k + 1) * n];
                // backup (read u, write u_old), read b, read u_old, write u
                part.counters.cell_accesses += 5 * n as u64;
                level.diagonal_block(pos).mul_into(u_old.cell(pos), &mut r);
                for (ri, bi) in r.iter_mut().zip(ctx.b.cell(pos)) {
                    *ri = bi - *ri;
                }
                for (f, fi) in level.faces(pos).iter().enumerate() {
                    if let Some(q) = fi.neighbour {
                        level.neighbour_block(f).mul_add(-1.0, u_old.cell(q), &mut r);
                        part.counters.neighbour_accesses += n as u64;
                    }
                }
                ctx.update(part, k, uk, &r)?;
            }
            Ok(())
        })?;
        self.counters.traversals += 1;
        Ok(())
    }

    /// Stage 1 of the three-stage scheme: projection traversal plus exchange.
    fn project_traversal(&mut self, u: &mut CellField, b: &CellField) -> Result<()> {
        let n = self.level.n_cell();
        self.run(u, b, None, |ctx, part, facets, us, _| {
            for k in 0..part.range.len() {
                part.counters.cell_accesses += n as u64;
                ctx.project(part, facets, k, &us[k * n..(k + 1) * n]);
            }
            Ok(())
        })?;
        exchange_interface(&mut self.facets);
        self.counters.traversals += 1;
        Ok(())
    }

    /// Stage 2: every facet of every subdomain, interface facets redundantly.
    fn flux_loop(&mut self) {
        let level = &self.level;
        for (part, facets) in self.parts.iter_mut().zip(self.facets.iter_mut()) {
            for l in 0..facets.num_facets() {
                let boundary = level.mesh().facet(facets.global_id(l)).is_boundary();
                let (minus, plus, w) = facets.flux_inputs(l);
                apply_flux(minus, plus, boundary, w);
                if !boundary {
                    part.counters.facet_accesses += 3;
                }
            }
        }
    }

    fn sweep_three_stage(&mut self, u: &mut CellField, b: &CellField) -> Result<()> {
        self.project_traversal(u, b)?;
        self.flux_loop();
        let n = self.level.n_cell();
        self.run(u, b, None, |ctx, part, facets, us, _| {
            let mut r = vec![0.0; n];
            for k in 0..part.range.len() {
                let uk = &mut us[k * n..(k + 1) * n];
                part.counters.cell_accesses += 3 * n as u64;
                ctx.cell_residual(part, facets, k, uk, &mut r)?;
                ctx.update(part, k, uk, &r)?;
            }
            Ok(())
        })?;
        self.counters.traversals += 1;
        Ok(())
    }

    fn sweep_fused(&mut self, u: &mut CellField, b: &CellField) -> Result<()> {
        self.require_warm()?;
        let n = self.level.n_cell();
        self.run(u, b, None, |ctx, part, facets, us, _| {
            let mut r = vec![0.0; n];
            for k in 0..part.range.len() {
                let uk = &mut us[k * n..(k + 1) * n];
                // read u and b, write u; the re-projection reuses u in cache
                part.counters.cell_accesses += 3 * n as u64;
                ctx.first_touch_fluxes(part, facets, k);
                ctx.cell_residual(part, facets, k, uk, &mut r)?;
                ctx.update(part, k, uk, &r)?;
                ctx.project(part, facets, k, uk);
            }
            Ok(())
        })?;
        exchange_interface(&mut self.facets);
        self.counters.traversals += 1;
        Ok(())
    }

    /// `r = b - A u` without updating `u` (the restriction traversal).
    pub fn residual(&mut self, u: &mut CellField, b: &CellField, r: &mut CellField) -> Result<()> {
        let n = self.level.n_cell();
        if !self.cfg.variant.keeps_projections() {
            self.project_traversal(u, b)?;
            self.flux_loop();
            self.run(u, b, Some(r), |ctx, part, facets, us, rs| {
                for k in 0..part.range.len() {
                    part.counters.cell_accesses += 3 * n as u64;
                    ctx.cell_residual(part, facets, k, &us[k * n..(k + 1) * n], &mut rs[k * n..(k + 1) * n])?;
                }
                Ok(())
            })?;
            self.counters.traversals += 1;
            return Ok(());
        }
        self.require_warm()?;
        self.run(u, b, Some(r), |ctx, part, facets, us, rs| {
            for k in 0..part.range.len() {
                part.counters.cell_accesses += 3 * n as u64;
                ctx.first_touch_fluxes(part, facets, k);
                ctx.cell_residual(part, facets, k, &us[k * n..(k + 1) * n], &mut rs[k * n..(k + 1) * n])?;
            }
            Ok(())
        })?;
        self.counters.traversals += 1;
        Ok(())
    }

    /// Adds a per-cell correction and re-projects in the same traversal.
    /// `correct(pos, u_K)` is called once per cell with its SFC position.
    pub fn correct_and_project<C>(&mut self, u: &mut CellField, b: &CellField, correct: C) -> Result<()>
    where
        C: Fn(usize, &mut [f64]) + Sync,
    {
        let n = self.level.n_cell();
        let project = self.cfg.variant.keeps_projections();
        self.run(u, b, None, |ctx, part, facets, us, _| {
            for k in 0..part.range.len() {
                let uk = &mut us[k * n..(k + 1) * n];
                part.counters.cell_accesses += 2 * n as u64;
                correct(part.range.start + k, uk);
                if project {
                    ctx.project(part, facets, k, uk);
                }
            }
            Ok(())
        })?;
        if project {
            exchange_interface(&mut self.facets);
        }
        self.counters.traversals += 1;
        Ok(())
    }
}

impl Drop for Smoother {
    fn drop(&mut self) {
        // release receivers before joining the executors
        for p in &mut self.parts {
            p.pending.clear();
        }
        self.pool.take();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{BasisKind, NodalBasis1D};
    use crate::localops::IpParams;
    use crate::mesh::Mesh;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn level(p: usize, lvl: u32) -> Arc<DgLevel> {
        let mesh = Arc::new(Mesh::new(2, lvl).unwrap());
        let basis = NodalBasis1D::new(BasisKind::GaussLobatto, p).unwrap();
        Arc::new(DgLevel::new(mesh, basis, IpParams::default()).unwrap())
    }

    fn random_field(lv: &DgLevel, seed: u64) -> CellField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = lv.zero_field();
        f.as_mut_slice().iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
        f
    }

    fn run(lv: &Arc<DgLevel>, cfg: SmootherConfig, u0: &CellField, b: &CellField, n: usize) -> CellField {
        let mut s = Smoother::new(lv.clone(), cfg).unwrap();
        let mut u = u0.clone();
        s.warm_up(&mut u, b).unwrap();
        s.sweeps(&mut u, b, n).unwrap();
        u
    }

    #[test]
    fn fused_requires_warm_up() {
        let lv = level(1, 1);
        let mut s = Smoother::new(lv.clone(), SmootherConfig::default()).unwrap();
        let mut u = lv.zero_field();
        let b = lv.zero_field();
        assert!(matches!(s.sweep(&mut u, &b), Err(Error::Contract(_))));
    }

    #[test]
    fn zero_relaxation_leaves_u_unchanged() {
        let lv = level(2, 1);
        let u0 = random_field(&lv, 1);
        let b = random_field(&lv, 2);
        for variant in Variant::ALL {
            let cfg = SmootherConfig {
                variant,
                omega: 0.0,
                ..Default::default()
            };
            assert_eq!(run(&lv, cfg, &u0, &b, 2), u0);
        }
    }

    #[test]
    fn staged_fused_and_tasked_agree_bitwise() {
        let lv = level(2, 2);
        let u0 = random_field(&lv, 3);
        let b = random_field(&lv, 4);
        let base = SmootherConfig::default();
        let staged = run(
            &lv,
            SmootherConfig {
                variant: Variant::ThreeStage,
                ..base
            },
            &u0,
            &b,
            3,
        );
        let fused = run(&lv, base, &u0, &b, 3);
        assert_eq!(staged, fused);
        for (parts, executors) in [(1, 1), (3, 2), (5, 4)] {
            let cfg = SmootherConfig {
                variant: Variant::Tasked,
                subdomains: parts,
                partition: PartitionMode::Geometric,
                executors,
                ..base
            };
            assert_eq!(run(&lv, cfg, &u0, &b, 3), fused);
        }
        let vanilla = run(
            &lv,
            SmootherConfig {
                variant: Variant::Vanilla,
                ..base
            },
            &u0,
            &b,
            3,
        );
        let scale = fused.norm(crate::fields::NormKind::Linf);
        assert!(vanilla.max_abs_diff(&fused) <= 1e-13 * scale);
    }

    #[test]
    fn per_cell_inverse_matches_precomputed() {
        let lv = level(2, 1);
        let u0 = random_field(&lv, 5);
        let b = random_field(&lv, 6);
        for variant in [Variant::Fused, Variant::Tasked] {
            let pre = SmootherConfig {
                variant,
                ..Default::default()
            };
            let per = SmootherConfig {
                inverse: InverseMode::PerCell,
                ..pre
            };
            assert_eq!(run(&lv, pre, &u0, &b, 2), run(&lv, per, &u0, &b, 2));
        }
    }

    #[test]
    fn residual_traversal_matches_operator() {
        let lv = level(3, 1);
        let u0 = random_field(&lv, 7);
        let b = random_field(&lv, 8);
        let expect = lv.residual(&u0, &b);
        for variant in Variant::ALL {
            let mut s = Smoother::new(
                lv.clone(),
                SmootherConfig {
                    variant,
                    ..Default::default()
                },
            )
            .unwrap();
            let mut u = u0.clone();
            let mut r = lv.zero_field();
            s.warm_up(&mut u, &b).unwrap();
            s.residual(&mut u, &b, &mut r).unwrap();
            assert_eq!(r, expect, "{variant:?}");
            assert_eq!(u, u0);
        }
    }

    #[test]
    fn fused_counter_matches_model() {
        use crate::localops::{memory_access_model, AccessAlgorithm};
        for p in 1..=3 {
            let lv = level(p, 2);
            let b = lv.zero_field();
            let mut u = lv.zero_field();
            let mut s = Smoother::new(lv.clone(), SmootherConfig::default()).unwrap();
            s.warm_up(&mut u, &b).unwrap();
            s.reset_counters();
            s.sweep(&mut u, &b).unwrap();
            let per_cell = s.counters().per_cell(&lv);
            let model = memory_access_model(AccessAlgorithm::ThreeStage, 2, p) as f64;
            assert!((per_cell - model).abs() < 1e-9, "p={p}: {per_cell} vs {model}");
        }
    }
}
