//! The experiments behind the CLI subcommands. Each returns typed results
//! and renders them as CSV tables. Tables never contain timings or the
//! partition of a solve, so re-running a manifest reproduces them bit for bit.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hpdg::basis::NodalBasis1D;
use hpdg::fields::{CellField, NormKind};
use hpdg::localops::{memory_access_model, AccessAlgorithm};
use hpdg::mesh::{Mesh, PartitionMode};
use hpdg::multigrid::{CoarseMode, Criterion, CycleRecord, CycleTrace, MultigridSolver, SolveOutcome};
use hpdg::operator::DgLevel;
use hpdg::problems::{
    build_rhs, discretisation_error, fit_slope, interpolate_exact, ErrorNorms, ManufacturedProblem, ProblemKind,
};
use hpdg::smoother::{InverseMode, Smoother, Variant};
use hpdg::{Error, Result};

use crate::config::{build_id, mesh_summaries, Experiment, RunManifest, RunSpec, SolverSettings};
use crate::reference;
use crate::table::{num, opt, Table};

/// Experiments run on the unit square.
pub const DIM: usize = 2;
/// Cycles over which the asymptotic contraction is averaged.
pub const RATE_WINDOW: usize = 9;

/// Mesh, basis and operator of one `(p, level)` pair.
pub struct Discretisation {
    pub mesh: Arc<Mesh>,
    pub basis: NodalBasis1D,
    pub level: Arc<DgLevel>,
}

pub fn discretise(settings: &SolverSettings, p: usize, level: u32) -> Result<Discretisation> {
    let mesh = Arc::new(Mesh::new(DIM, level)?);
    let basis = NodalBasis1D::new(settings.basis, p)?;
    let level = Arc::new(DgLevel::new(mesh.clone(), basis.clone(), settings.ip_params())?);
    Ok(Discretisation { mesh, basis, level })
}

fn solver(settings: &SolverSettings, d: &Discretisation) -> Result<MultigridSolver> {
    MultigridSolver::new(d.level.clone(), settings.smoother(), settings.multigrid())
}

fn solve_problem(settings: &SolverSettings, d: &Discretisation, problem: ProblemKind) -> Result<SolveOutcome> {
    let pr = ManufacturedProblem::new(problem, DIM)?;
    let b = build_rhs(&pr, &d.mesh, &d.basis);
    solver(settings, d)?.solve(&d.level.zero_field(), &b)
}

fn mesh_label(level: u32) -> String {
    let n = 3usize.pow(level);
    format!("{n}x{n}")
}

// ---------------------------------------------------------------- convergence

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub p: usize,
    pub level: u32,
    pub cycles: usize,
    pub converged: bool,
    pub error: ErrorNorms,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlopeRow {
    pub p: usize,
    pub l2: f64,
    pub linf: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceResult {
    pub problem: ProblemKind,
    pub rows: Vec<ConvergenceRow>,
    /// Present for every degree when at least three levels were solved.
    pub slopes: Vec<SlopeRow>,
}

pub fn convergence(
    settings: &SolverSettings,
    p_list: &[usize],
    levels: &[u32],
    problem: ProblemKind,
) -> Result<ConvergenceResult> {
    let pr = ManufacturedProblem::new(problem, DIM)?;
    let mut rows = Vec::new();
    let mut slopes = Vec::new();
    for &p in p_list {
        let mut hs = Vec::new();
        let (mut e2, mut ei) = (Vec::new(), Vec::new());
        for &lvl in levels {
            let d = discretise(settings, p, lvl)?;
            let out = solve_problem(settings, &d, problem)?;
            let error = discretisation_error(&out.u, &pr, &d.mesh, &d.basis);
            hs.push(d.mesh.h());
            e2.push(error.l2);
            ei.push(error.linf);
            rows.push(ConvergenceRow {
                p,
                level: lvl,
                cycles: out.cycles,
                converged: out.converged,
                error,
            });
        }
        if levels.len() >= 3 {
            slopes.push(SlopeRow {
                p,
                l2: fit_slope(&hs, &e2),
                linf: fit_slope(&hs, &ei),
            });
        }
    }
    Ok(ConvergenceResult { problem, rows, slopes })
}

impl ConvergenceResult {
    pub fn tables(&self, settings: &SolverSettings) -> Vec<Table> {
        let basis = settings.basis.name();
        let mut t = Table::new(
            "convergence",
            &[
                "problem",
                "basis",
                "p",
                "level",
                "mesh",
                "h",
                "cycles",
                "converged",
                "e_l2",
                "e_linf",
            ],
        );
        for r in &self.rows {
            t.push(vec![
                self.problem.name().into(),
                basis.into(),
                r.p.to_string(),
                r.level.to_string(),
                mesh_label(r.level),
                num(3f64.powi(-(r.level as i32))),
                r.cycles.to_string(),
                r.converged.to_string(),
                num(r.error.l2),
                num(r.error.linf),
            ]);
        }
        let mut s = Table::new(
            "convergence_slopes",
            &["problem", "basis", "p", "slope_l2", "slope_linf", "published"],
        );
        for r in &self.slopes {
            s.push(vec![
                self.problem.name().into(),
                basis.into(),
                r.p.to_string(),
                num(r.l2),
                num(r.linf),
                (r.p + 1).to_string(),
            ]);
        }
        vec![t, s]
    }
}

// --------------------------------------------------------------------- cycles

#[derive(Debug, Clone, PartialEq)]
pub struct CyclesRow {
    pub level: u32,
    pub p: usize,
    pub cycles: usize,
    pub converged: bool,
    /// Mean contraction per cycle over the last cycles.
    pub rate: Option<f64>,
    pub published: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CyclesResult {
    pub problem: ProblemKind,
    pub rows: Vec<CyclesRow>,
}

impl CyclesResult {
    pub fn get(&self, level: u32, p: usize) -> Option<&CyclesRow> {
        self.rows.iter().find(|r| r.level == level && r.p == p)
    }

    pub fn tables(&self, settings: &SolverSettings) -> Vec<Table> {
        let mut t = Table::new(
            "cycles",
            &[
                "problem",
                "criterion",
                "basis",
                "level",
                "mesh",
                "p",
                "cycles",
                "converged",
                "rate",
                "published",
            ],
        );
        for r in &self.rows {
            t.push(vec![
                self.problem.name().into(),
                criterion_name(settings.criterion).into(),
                settings.basis.name().into(),
                r.level.to_string(),
                mesh_label(r.level),
                r.p.to_string(),
                r.cycles.to_string(),
                r.converged.to_string(),
                opt(r.rate.map(num)),
                opt(r.published),
            ]);
        }
        vec![t]
    }
}

fn criterion_name(c: Criterion) -> &'static str {
    match c {
        Criterion::Preconditioned => "prec",
        Criterion::Unpreconditioned => "unprec",
    }
}

pub fn cycles(
    settings: &SolverSettings,
    p_list: &[usize],
    levels: &[u32],
    problem: ProblemKind,
) -> Result<CyclesResult> {
    let mut rows = Vec::new();
    for &lvl in levels {
        for &p in p_list {
            let d = discretise(settings, p, lvl)?;
            let out = solve_problem(settings, &d, problem)?;
            rows.push(CyclesRow {
                level: lvl,
                p,
                cycles: out.cycles,
                converged: out.converged,
                rate: out.trace.asymptotic_rate(settings.criterion, RATE_WINDOW),
                published: reference::cycle_count(problem, settings.criterion, settings.basis, lvl, p),
            });
        }
    }
    Ok(CyclesResult { problem, rows })
}

// -------------------------------------------------------------------- history

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryCurve {
    /// `smoother`, `exact` or `vcycle`.
    pub method: &'static str,
    pub trace: CycleTrace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryResult {
    pub tolerance: f64,
    pub curves: Vec<HistoryCurve>,
}

impl HistoryResult {
    pub fn curve(&self, method: &str) -> Option<&CycleTrace> {
        self.curves.iter().find(|c| c.method == method).map(|c| &c.trace)
    }

    pub fn tables(&self) -> Vec<Table> {
        let mut t = Table::new(
            "history",
            &[
                "method",
                "cycle",
                "r_rel",
                "rprec_rel",
                "r_l2",
                "r_linf",
                "rprec_l2",
                "rprec_linf",
            ],
        );
        let mut s = Table::new(
            "history_summary",
            &[
                "method",
                "cycles",
                "first_prec_below_tol",
                "first_unprec_below_tol",
                "rate_prec",
                "rate_unprec",
            ],
        );
        for c in &self.curves {
            let tr = &c.trace;
            for r in &tr.records {
                t.push(vec![
                    c.method.into(),
                    r.cycle.to_string(),
                    num(tr.relative(r, Criterion::Unpreconditioned)),
                    num(tr.relative(r, Criterion::Preconditioned)),
                    num(r.r_l2),
                    num(r.r_linf),
                    num(r.rprec_l2),
                    num(r.rprec_linf),
                ]);
            }
            s.push(vec![
                c.method.into(),
                tr.records.len().to_string(),
                opt(tr.first_below(Criterion::Preconditioned, self.tolerance)),
                opt(tr.first_below(Criterion::Unpreconditioned, self.tolerance)),
                opt(tr.asymptotic_rate(Criterion::Preconditioned, RATE_WINDOW).map(num)),
                opt(tr.asymptotic_rate(Criterion::Unpreconditioned, RATE_WINDOW).map(num)),
            ]);
        }
        vec![t, s]
    }
}

/// The single-level smoother run for a fixed number of sweeps, traced like a
/// multigrid solve with one sweep per "cycle".
fn smoother_trace(
    settings: &SolverSettings,
    d: &Discretisation,
    b: &CellField,
    iterations: usize,
) -> Result<CycleTrace> {
    let lv = &d.level;
    let mut sm = Smoother::new(lv.clone(), settings.smoother())?;
    let mut u = lv.zero_field();
    sm.warm_up(&mut u, b)?;
    let r0 = lv.residual(&u, b);
    let mut trace = CycleTrace {
        r0_l2: r0.norm(NormKind::L2),
        r0_linf: r0.norm(NormKind::Linf),
        ..Default::default()
    };
    for k in 1..=iterations {
        let old = u.clone();
        sm.sweep(&mut u, b)?;
        let change = u.difference(&old);
        let r = lv.residual(&u, b);
        let rec = CycleRecord {
            cycle: k,
            r_l2: r.norm(NormKind::L2),
            r_linf: r.norm(NormKind::Linf),
            rprec_l2: change.norm(NormKind::L2),
            rprec_linf: change.norm(NormKind::Linf),
        };
        if k == 1 {
            trace.rprec1_l2 = rec.rprec_l2;
            trace.rprec1_linf = rec.rprec_linf;
        }
        trace.records.push(rec);
    }
    Ok(trace)
}

pub fn history(
    settings: &SolverSettings,
    p: usize,
    level: u32,
    problem: ProblemKind,
    smoother_iterations: usize,
) -> Result<HistoryResult> {
    let d = discretise(settings, p, level)?;
    let pr = ManufacturedProblem::new(problem, DIM)?;
    let b = build_rhs(&pr, &d.mesh, &d.basis);
    let mut curves = vec![HistoryCurve {
        method: "smoother",
        trace: smoother_trace(settings, &d, &b, smoother_iterations)?,
    }];
    for (method, coarse) in [("exact", CoarseMode::Exact), ("vcycle", CoarseMode::SingleVcycle)] {
        let s = SolverSettings { coarse, ..*settings };
        let out = solver(&s, &d)?.solve(&d.level.zero_field(), &b)?;
        curves.push(HistoryCurve {
            method,
            trace: out.trace,
        });
    }
    Ok(HistoryResult {
        tolerance: settings.tolerance,
        curves,
    })
}

// ---------------------------------------------------------- residual vs error

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualVsErrorRow {
    pub level: u32,
    pub p: usize,
    pub cycles: usize,
    /// The error threshold was reached within the cycle budget.
    pub reached: bool,
    /// `||u|| / ||u_ini||`; the exact solution is zero.
    pub error: f64,
    pub rprec_rel: f64,
    pub r_rel: f64,
    pub rprec_l2: f64,
    pub r_l2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualVsErrorResult {
    pub threshold: f64,
    pub rows: Vec<ResidualVsErrorRow>,
}

impl ResidualVsErrorResult {
    pub fn get(&self, level: u32, p: usize) -> Option<&ResidualVsErrorRow> {
        self.rows.iter().find(|r| r.level == level && r.p == p)
    }

    pub fn tables(&self) -> Vec<Table> {
        let mut t = Table::new(
            "residual_vs_error",
            &[
                "level",
                "mesh",
                "p",
                "cycles",
                "reached",
                "error",
                "rprec_rel",
                "r_rel",
                "rprec_l2",
                "r_l2",
            ],
        );
        for r in &self.rows {
            t.push(vec![
                r.level.to_string(),
                mesh_label(r.level),
                r.p.to_string(),
                r.cycles.to_string(),
                r.reached.to_string(),
                num(r.error),
                num(r.rprec_rel),
                num(r.r_rel),
                num(r.rprec_l2),
                num(r.r_l2),
            ]);
        }
        vec![t]
    }
}

/// Solves `A u = 0` from the two-peak interpolant until `||u|| / ||u_ini||`
/// drops below `threshold` and reports both residual flavours at that point.
pub fn residual_vs_error(
    settings: &SolverSettings,
    p_list: &[usize],
    levels: &[u32],
    threshold: f64,
) -> Result<ResidualVsErrorResult> {
    if threshold <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "threshold {threshold} must be positive"
        )));
    }
    let pr = ManufacturedProblem::new(ProblemKind::TwoPeak, DIM)?;
    // only the error threshold ends the run
    let s = SolverSettings {
        tolerance: f64::MIN_POSITIVE,
        ..*settings
    };
    let mut rows = Vec::new();
    for &lvl in levels {
        for &p in p_list {
            let d = discretise(&s, p, lvl)?;
            let u0 = interpolate_exact(&pr, &d.mesh, &d.basis);
            let b = d.level.zero_field();
            let n0 = u0.norm(NormKind::L2);
            let out = solver(&s, &d)?.solve_with(&u0, &b, |_, u| u.norm(NormKind::L2) <= threshold * n0)?;
            let error = out.u.norm(NormKind::L2) / n0;
            let last = out.trace.records.last().copied().unwrap_or(CycleRecord {
                cycle: 0,
                r_l2: out.trace.r0_l2,
                r_linf: out.trace.r0_linf,
                rprec_l2: 0.0,
                rprec_linf: 0.0,
            });
            rows.push(ResidualVsErrorRow {
                level: lvl,
                p,
                cycles: out.cycles,
                reached: error <= threshold,
                error,
                rprec_rel: out.trace.relative(&last, Criterion::Preconditioned),
                r_rel: out.trace.relative(&last, Criterion::Unpreconditioned),
                rprec_l2: last.rprec_l2,
                r_l2: last.r_l2,
            });
        }
    }
    Ok(ResidualVsErrorResult { threshold, rows })
}

// ---------------------------------------------------------------- equivalence

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub p: usize,
    pub variant: Variant,
    pub inverse: InverseMode,
    pub partition: PartitionMode,
    pub subdomains: usize,
    pub workers: usize,
    /// Max-norm deviation from the reference, relative to its max norm.
    pub deviation: f64,
    pub bitwise: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub p: usize,
    pub partition: PartitionMode,
    pub subdomains: usize,
    pub workers: usize,
    pub cycles: usize,
    /// Trace and final iterate are bitwise equal to the one-subdomain solve.
    pub identical: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CounterRow {
    pub p: usize,
    pub variant: Variant,
    pub per_cell: f64,
    pub model: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceResult {
    pub iterations: usize,
    pub sweeps: Vec<SweepRow>,
    pub traces: Vec<TraceRow>,
    pub counters: Vec<CounterRow>,
}

impl EquivalenceResult {
    pub fn max_deviation(&self) -> f64 {
        self.sweeps.iter().map(|r| r.deviation).fold(0.0, f64::max)
    }

    pub fn tables(&self) -> Vec<Table> {
        let mut s = Table::new(
            "equivalence_sweeps",
            &[
                "p",
                "variant",
                "inverse",
                "partition",
                "subdomains",
                "workers",
                "iterations",
                "deviation",
                "bitwise",
            ],
        );
        for r in &self.sweeps {
            s.push(vec![
                r.p.to_string(),
                r.variant.name().into(),
                inverse_name(r.inverse).into(),
                partition_name(r.partition).into(),
                r.subdomains.to_string(),
                r.workers.to_string(),
                self.iterations.to_string(),
                num(r.deviation),
                r.bitwise.to_string(),
            ]);
        }
        let mut t = Table::new(
            "equivalence_traces",
            &["p", "partition", "subdomains", "workers", "cycles", "identical"],
        );
        for r in &self.traces {
            t.push(vec![
                r.p.to_string(),
                partition_name(r.partition).into(),
                r.subdomains.to_string(),
                r.workers.to_string(),
                r.cycles.to_string(),
                r.identical.to_string(),
            ]);
        }
        let mut c = Table::new("equivalence_counters", &["p", "variant", "per_cell", "model"]);
        for r in &self.counters {
            c.push(vec![
                r.p.to_string(),
                r.variant.name().into(),
                num(r.per_cell),
                opt(r.model),
            ]);
        }
        vec![s, t, c]
    }
}

fn inverse_name(m: InverseMode) -> &'static str {
    match m {
        InverseMode::Precomputed => "precomputed",
        InverseMode::PerCell => "percell",
    }
}

fn partition_name(m: PartitionMode) -> &'static str {
    match m {
        PartitionMode::Balanced => "balanced",
        PartitionMode::Geometric => "geometric",
    }
}

/// Partition layouts for the given subdomain counts; one part has one layout.
pub fn partition_layouts(subdomains: &[usize]) -> Vec<(PartitionMode, usize)> {
    let mut out = Vec::new();
    for &n in subdomains {
        out.push((PartitionMode::Balanced, n));
        if n > 1 {
            out.push((PartitionMode::Geometric, n));
        }
    }
    out
}

fn model_for(variant: Variant, p: usize) -> Option<u64> {
    match variant {
        Variant::Vanilla => Some(memory_access_model(AccessAlgorithm::Vanilla, DIM, p)),
        Variant::Fused | Variant::Tasked => Some(memory_access_model(AccessAlgorithm::ThreeStage, DIM, p)),
        Variant::ThreeStage => None,
    }
}

fn sweep_from(
    settings: &SolverSettings,
    lv: &Arc<DgLevel>,
    u0: &CellField,
    b: &CellField,
    iterations: usize,
) -> Result<(CellField, f64)> {
    let mut sm = Smoother::new(lv.clone(), settings.smoother())?;
    let mut u = u0.clone();
    sm.warm_up(&mut u, b)?;
    sm.reset_counters();
    sm.sweeps(&mut u, b, iterations)?;
    let per_cell = sm.counters().per_cell(lv) / iterations.max(1) as f64;
    Ok((u, per_cell))
}

#[allow(clippy::too_many_arguments)]
pub fn equivalence(
    settings: &SolverSettings,
    seed: u64,
    p_list: &[usize],
    level: u32,
    problem: ProblemKind,
    iterations: usize,
    subdomains: &[usize],
    workers: &[usize],
) -> Result<EquivalenceResult> {
    let pr = ManufacturedProblem::new(problem, DIM)?;
    let layouts = partition_layouts(subdomains);
    let base = SolverSettings {
        subdomains: 1,
        partition: PartitionMode::Balanced,
        workers: 1,
        ..*settings
    };
    let mut result = EquivalenceResult {
        iterations,
        sweeps: Vec::new(),
        traces: Vec::new(),
        counters: Vec::new(),
    };
    for &p in p_list {
        let d = discretise(settings, p, level)?;
        let b = build_rhs(&pr, &d.mesh, &d.basis);
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(p as u64));
        let mut u0 = d.level.zero_field();
        u0.as_mut_slice().iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));

        let reference = SolverSettings {
            variant: Variant::Fused,
            inverse: InverseMode::Precomputed,
            ..base
        };
        let (u_ref, _) = sweep_from(&reference, &d.level, &u0, &b, iterations)?;
        let scale = u_ref.norm(NormKind::Linf).max(f64::MIN_POSITIVE);
        for variant in Variant::ALL {
            for inverse in [InverseMode::Precomputed, InverseMode::PerCell] {
                for &(partition, parts) in &layouts {
                    for &w in workers {
                        let s = SolverSettings {
                            variant,
                            inverse,
                            partition,
                            subdomains: parts,
                            workers: w,
                            ..*settings
                        };
                        let (u, _) = sweep_from(&s, &d.level, &u0, &b, iterations)?;
                        result.sweeps.push(SweepRow {
                            p,
                            variant,
                            inverse,
                            partition,
                            subdomains: parts,
                            workers: w,
                            deviation: u.max_abs_diff(&u_ref) / scale,
                            bitwise: u == u_ref,
                        });
                    }
                }
            }
            let s = SolverSettings { variant, ..base };
            let (_, per_cell) = sweep_from(&s, &d.level, &u0, &b, 1)?;
            result.counters.push(CounterRow {
                p,
                variant,
                per_cell,
                model: model_for(variant, p),
            });
        }

        let ref_out = solver(&base, &d)?.solve(&d.level.zero_field(), &b)?;
        for &(partition, parts) in &layouts {
            for &w in workers {
                let s = SolverSettings {
                    partition,
                    subdomains: parts,
                    workers: w,
                    ..*settings
                };
                let out = solver(&s, &d)?.solve(&d.level.zero_field(), &b)?;
                result.traces.push(TraceRow {
                    p,
                    partition,
                    subdomains: parts,
                    workers: w,
                    cycles: out.cycles,
                    identical: out.trace == ref_out.trace && out.u == ref_out.u,
                });
            }
        }
    }
    Ok(result)
}

// ---------------------------------------------------------------------- model

#[derive(Debug, Clone, PartialEq)]
pub struct ModelRow {
    pub algorithm: AccessAlgorithm,
    pub dim: usize,
    pub p: usize,
    pub model: u64,
    pub published: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelResult {
    /// Closed forms next to the published table, `p = 1..=10`, `d = 2, 3`.
    pub table: Vec<ModelRow>,
    /// Instrumented accesses per cell of one single-subdomain sweep, `d = 2`.
    /// Interface facets get their flux computed on both sides, so
    /// partitioned sweeps count more.
    pub counters: Vec<CounterRow>,
}

const ALGORITHMS: [AccessAlgorithm; 3] = [
    AccessAlgorithm::Vanilla,
    AccessAlgorithm::ThreeStage,
    AccessAlgorithm::ThreeStageStandalone,
];

fn algorithm_name(a: AccessAlgorithm) -> &'static str {
    match a {
        AccessAlgorithm::Vanilla => "vanilla",
        AccessAlgorithm::ThreeStage => "three-stage",
        AccessAlgorithm::ThreeStageStandalone => "three-stage-standalone",
    }
}

pub fn model(settings: &SolverSettings, p_list: &[usize], level: u32) -> Result<ModelResult> {
    let mut table = Vec::new();
    for dim in [2, 3] {
        for alg in ALGORITHMS {
            let published = reference::access_counts(alg, dim);
            for p in 1..=10 {
                table.push(ModelRow {
                    algorithm: alg,
                    dim,
                    p,
                    model: memory_access_model(alg, dim, p),
                    published: published.map(|row| row[p - 1]),
                });
            }
        }
    }
    let mut counters = Vec::new();
    for &p in p_list {
        let d = discretise(settings, p, level)?;
        let b = d.level.zero_field();
        let u0 = d.level.zero_field();
        for variant in [Variant::Vanilla, Variant::Fused, Variant::Tasked] {
            let s = SolverSettings {
                variant,
                subdomains: 1,
                ..*settings
            };
            let (_, per_cell) = sweep_from(&s, &d.level, &u0, &b, 1)?;
            counters.push(CounterRow {
                p,
                variant,
                per_cell,
                model: model_for(variant, p),
            });
        }
    }
    Ok(ModelResult { table, counters })
}

impl ModelResult {
    pub fn tables(&self) -> Vec<Table> {
        let mut t = Table::new("model_table", &["algorithm", "d", "p", "model", "published"]);
        for r in &self.table {
            t.push(vec![
                algorithm_name(r.algorithm).into(),
                r.dim.to_string(),
                r.p.to_string(),
                r.model.to_string(),
                opt(r.published),
            ]);
        }
        let mut c = Table::new("model_counters", &["p", "variant", "per_cell", "model"]);
        for r in &self.counters {
            c.push(vec![
                r.p.to_string(),
                r.variant.name().into(),
                num(r.per_cell),
                opt(r.model),
            ]);
        }
        vec![t, c]
    }
}

// ------------------------------------------------------------------- dispatch

/// Runs the experiment of `spec` and renders its tables.
pub fn run(spec: &RunSpec) -> Result<Vec<Table>> {
    let s = &spec.settings;
    Ok(match &spec.experiment {
        Experiment::Convergence { p, levels, problem } => convergence(s, p, levels, *problem)?.tables(s),
        Experiment::Cycles { p, levels, problem } => cycles(s, p, levels, *problem)?.tables(s),
        Experiment::History {
            p,
            level,
            problem,
            smoother_iterations,
        } => history(s, *p, *level, *problem, *smoother_iterations)?.tables(),
        Experiment::ResidualVsError { p, levels, threshold } => residual_vs_error(s, p, levels, *threshold)?.tables(),
        Experiment::Equivalence {
            p,
            level,
            problem,
            iterations,
            subdomains,
            workers,
        } => equivalence(s, spec.seed, p, *level, *problem, *iterations, subdomains, workers)?.tables(),
        Experiment::Model { p, level } => model(s, p, *level)?.tables(),
    })
}

/// Runs `spec`, and with `out` set writes every table and the manifest there.
pub fn execute(spec: &RunSpec, out: Option<&Path>) -> Result<(RunManifest, Vec<Table>)> {
    let start = Instant::now();
    let tables = run(spec)?;
    let manifest = RunManifest {
        build: build_id(),
        spec: spec.clone(),
        meshes: mesh_summaries(&spec.experiment.levels())?,
        outputs: tables.iter().map(Table::file_name).collect(),
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        for t in &tables {
            std::fs::write(dir.join(t.file_name()), t.to_csv())?;
        }
        let name = format!("{}.manifest.json", spec.experiment.name());
        std::fs::write(dir.join(name), serde_json::to_string_pretty(&manifest)?)?;
    }
    Ok((manifest, tables))
}

/// Reads a manifest written by [`execute`].
pub fn load_manifest(path: &Path) -> Result<RunManifest> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}
