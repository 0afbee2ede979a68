//! Solver settings, experiment descriptions and the run manifest.

use serde::{Deserialize, Serialize};

use hpdg::basis::BasisKind;
use hpdg::localops::IpParams;
use hpdg::mesh::{Mesh, MeshSummary, PartitionMode};
use hpdg::multigrid::{CoarseMode, Criterion, MgConfig};
use hpdg::problems::ProblemKind;
use hpdg::smoother::{InverseMode, SmootherConfig, Variant};
use hpdg::Result;

/// Every knob of a solve. Experiments are two-dimensional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub basis: BasisKind,
    pub theta: f64,
    pub penalty: f64,
    pub omega: f64,
    pub nu: usize,
    pub omega_cg: f64,
    pub nu_cg_pre: usize,
    pub nu_cg_post: usize,
    pub coarsest_iterations: usize,
    pub coarse: CoarseMode,
    pub criterion: Criterion,
    pub tolerance: f64,
    pub max_cycles: usize,
    pub variant: Variant,
    pub inverse: InverseMode,
    pub subdomains: usize,
    pub partition: PartitionMode,
    pub workers: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let ip = IpParams::default();
        let mg = MgConfig::default();
        let sm = SmootherConfig::default();
        Self {
            basis: BasisKind::GaussLobatto,
            theta: ip.theta,
            penalty: ip.penalty_const,
            omega: sm.omega,
            nu: mg.nu,
            omega_cg: mg.omega_cg,
            nu_cg_pre: mg.nu_cg_pre,
            nu_cg_post: mg.nu_cg_post,
            coarsest_iterations: mg.coarsest_iterations,
            coarse: mg.coarse_mode,
            criterion: mg.criterion,
            tolerance: mg.tolerance,
            max_cycles: mg.max_cycles,
            variant: sm.variant,
            inverse: sm.inverse,
            subdomains: sm.subdomains,
            partition: sm.partition,
            workers: sm.executors,
        }
    }
}

impl SolverSettings {
    pub fn ip_params(&self) -> IpParams {
        IpParams {
            theta: self.theta,
            penalty_const: self.penalty,
        }
    }

    pub fn smoother(&self) -> SmootherConfig {
        SmootherConfig {
            variant: self.variant,
            omega: self.omega,
            inverse: self.inverse,
            subdomains: self.subdomains,
            partition: self.partition,
            executors: self.workers,
        }
    }

    pub fn multigrid(&self) -> MgConfig {
        MgConfig {
            nu: self.nu,
            coarse_mode: self.coarse,
            nu_cg_pre: self.nu_cg_pre,
            nu_cg_post: self.nu_cg_post,
            omega_cg: self.omega_cg,
            coarsest_iterations: self.coarsest_iterations,
            max_cycles: self.max_cycles,
            tolerance: self.tolerance,
            criterion: self.criterion,
        }
    }
}

/// One experiment and its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    /// Discretisation error and fitted order per degree.
    Convergence {
        p: Vec<usize>,
        levels: Vec<u32>,
        problem: ProblemKind,
    },
    /// Multigrid cycles to the tolerance for every level and degree.
    Cycles {
        p: Vec<usize>,
        levels: Vec<u32>,
        problem: ProblemKind,
    },
    /// Residual histories of the smoother alone and of both coarse modes.
    History {
        p: usize,
        level: u32,
        problem: ProblemKind,
        smoother_iterations: usize,
    },
    /// Residuals once the error of the homogeneous problem is below `threshold`.
    ResidualVsError {
        p: Vec<usize>,
        levels: Vec<u32>,
        threshold: f64,
    },
    /// Smoother variants, partitions and worker splits against one reference.
    Equivalence {
        p: Vec<usize>,
        level: u32,
        problem: ProblemKind,
        iterations: usize,
        subdomains: Vec<usize>,
        workers: Vec<usize>,
    },
    /// Memory-access closed forms and instrumented counters.
    Model { p: Vec<usize>, level: u32 },
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Convergence { .. } => "convergence",
            Experiment::Cycles { .. } => "cycles",
            Experiment::History { .. } => "history",
            Experiment::ResidualVsError { .. } => "residual-vs-error",
            Experiment::Equivalence { .. } => "equivalence",
            Experiment::Model { .. } => "model",
        }
    }

    /// Mesh levels the experiment touches.
    pub fn levels(&self) -> Vec<u32> {
        match self {
            Experiment::Convergence { levels, .. }
            | Experiment::Cycles { levels, .. }
            | Experiment::ResidualVsError { levels, .. } => levels.clone(),
            Experiment::History { level, .. }
            | Experiment::Equivalence { level, .. }
            | Experiment::Model { level, .. } => vec![*level],
        }
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub seed: u64,
    pub settings: SolverSettings,
    pub experiment: Experiment,
}

/// Written next to the CSV outputs of every run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub build: String,
    #[serde(flatten)]
    pub spec: RunSpec,
    pub meshes: Vec<MeshSummary>,
    pub outputs: Vec<String>,
    pub wall_time_s: f64,
}

pub fn build_id() -> String {
    match option_env!("HPDG_BUILD_ID") {
        Some(id) => id.to_string(),
        None => format!("hpdg-{}", env!("CARGO_PKG_VERSION")),
    }
}

pub fn mesh_summaries(levels: &[u32]) -> Result<Vec<MeshSummary>> {
    levels.iter().map(|&l| Ok(Mesh::new(2, l)?.summary())).collect()
}
