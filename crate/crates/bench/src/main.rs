use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use hpdg::basis::BasisKind;
use hpdg::mesh::PartitionMode;
use hpdg::multigrid::{CoarseMode, Criterion};
use hpdg::problems::ProblemKind;
use hpdg::smoother::{InverseMode, Variant};
use hpdg_bench::experiments::execute;
use hpdg_bench::{experiments, Experiment, RunSpec, SolverSettings};

#[derive(Parser)]
#[command(name = "hpdg-bench", version, about = "Experiments for the hp-multigrid DG solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Discretisation error and fitted order of convergence.
    Convergence {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        par: Parallel,
    },
    /// Multigrid cycles to the tolerance per mesh level and degree.
    Cycles {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        par: Parallel,
    },
    /// Residual histories of the smoother alone and of both coarse modes.
    History {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        par: Parallel,
        /// Sweeps of the smoother-only run.
        #[arg(long, default_value_t = 2000)]
        smoother_iterations: usize,
    },
    /// Residual norms once the error of a homogeneous solve is below a threshold.
    ResidualVsError {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        par: Parallel,
        #[arg(long, default_value_t = 5e-9)]
        threshold: f64,
    },
    /// Smoother variants, partitions and worker splits against one reference.
    Equivalence {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
        subdomains: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "1,4")]
        workers: Vec<usize>,
        /// Smoother sweeps compared per configuration.
        #[arg(long, default_value_t = 10)]
        iterations: usize,
    },
    /// Memory-access closed forms and instrumented counters.
    Model {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Re-runs the experiment recorded in a manifest.
    Replay {
        manifest: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn parse<T: FromStr>(s: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e: T::Err| e.to_string())
}

#[derive(Args)]
struct RunArgs {
    /// Polynomial degrees, comma separated.
    #[arg(long, value_delimiter = ',')]
    p: Vec<usize>,
    /// Mesh levels (3^level cells per axis), comma separated or a range `a-b`.
    #[arg(long)]
    levels: Option<String>,
    #[arg(long, value_parser = parse::<ProblemKind>)]
    problem: Option<ProblemKind>,
    #[arg(long, value_parser = parse::<BasisKind>, default_value = "lobatto")]
    basis: BasisKind,
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<f64>,
    #[arg(long)]
    penalty: Option<f64>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    nu: Option<usize>,
    #[arg(long, value_parser = parse::<CoarseMode>)]
    coarse: Option<CoarseMode>,
    #[arg(long, value_parser = parse::<Criterion>)]
    criterion: Option<Criterion>,
    #[arg(long, value_parser = parse::<Variant>)]
    variant: Option<Variant>,
    #[arg(long, value_parser = parse::<InverseMode>)]
    inverse: Option<InverseMode>,
    /// Relative reduction of the stopping criterion.
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    max_cycles: Option<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct Parallel {
    #[arg(long, default_value_t = 1)]
    subdomains: usize,
    #[arg(long, value_parser = parse::<PartitionMode>, default_value = "balanced")]
    partition: PartitionMode,
    /// Task executors of the tasked smoother.
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

fn parse_levels(s: &str) -> anyhow::Result<Vec<u32>> {
    if let Some((a, b)) = s.split_once('-') {
        let (a, b): (u32, u32) = (a.trim().parse()?, b.trim().parse()?);
        if a > b {
            bail!("empty level range {s}");
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(|v| Ok(v.trim().parse()?)).collect()
}

/// Per-subcommand defaults for the flags left unset.
struct Defaults {
    p: &'static [usize],
    levels: &'static [u32],
    problem: ProblemKind,
    tolerance: f64,
    max_cycles: usize,
}

impl RunArgs {
    fn settings(&self, d: &Defaults, par: Option<&Parallel>) -> SolverSettings {
        let base = SolverSettings::default();
        let mut s = SolverSettings {
            basis: self.basis,
            theta: self.theta.unwrap_or(base.theta),
            penalty: self.penalty.unwrap_or(base.penalty),
            omega: self.omega.unwrap_or(base.omega),
            nu: self.nu.unwrap_or(base.nu),
            coarse: self.coarse.unwrap_or(base.coarse),
            criterion: self.criterion.unwrap_or(base.criterion),
            tolerance: self.tolerance.unwrap_or(d.tolerance),
            max_cycles: self.max_cycles.unwrap_or(d.max_cycles),
            variant: self.variant.unwrap_or(base.variant),
            inverse: self.inverse.unwrap_or(base.inverse),
            ..base
        };
        if let Some(par) = par {
            s.subdomains = par.subdomains;
            s.partition = par.partition;
            s.workers = par.workers;
        }
        s
    }

    fn p(&self, d: &Defaults) -> Vec<usize> {
        if self.p.is_empty() {
            d.p.to_vec()
        } else {
            self.p.clone()
        }
    }

    fn levels(&self, d: &Defaults) -> anyhow::Result<Vec<u32>> {
        match &self.levels {
            Some(s) => parse_levels(s),
            None => Ok(d.levels.to_vec()),
        }
    }

    fn problem(&self, d: &Defaults) -> ProblemKind {
        self.problem.unwrap_or(d.problem)
    }
}

fn single<T: Copy>(v: &[T], what: &str) -> anyhow::Result<T> {
    match v {
        [x] => Ok(*x),
        _ => bail!("this experiment takes exactly one {what}"),
    }
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let (run, spec) = match &cli.command {
        Command::Replay { manifest, out } => {
            let m = experiments::load_manifest(manifest).with_context(|| format!("reading {}", manifest.display()))?;
            let (_, tables) = execute(&m.spec, Some(out))?;
            for t in tables {
                println!("wrote {}", out.join(t.file_name()).display());
            }
            return Ok(());
        }
        Command::Convergence { run, par } => {
            let d = Defaults {
                p: &[1, 2, 3],
                levels: &[2, 3, 4],
                problem: ProblemKind::SinProduct,
                tolerance: 1e-10,
                max_cycles: 300,
            };
            let exp = Experiment::Convergence {
                p: run.p(&d),
                levels: run.levels(&d)?,
                problem: run.problem(&d),
            };
            (run, (run.settings(&d, Some(par)), exp))
        }
        Command::Cycles { run, par } => {
            let d = Defaults {
                p: &[2, 3, 4, 5, 6],
                levels: &[2, 3, 4, 5],
                problem: ProblemKind::SinProduct,
                tolerance: 1e-7,
                max_cycles: 500,
            };
            let exp = Experiment::Cycles {
                p: run.p(&d),
                levels: run.levels(&d)?,
                problem: run.problem(&d),
            };
            (run, (run.settings(&d, Some(par)), exp))
        }
        Command::History {
            run,
            par,
            smoother_iterations,
        } => {
            let d = Defaults {
                p: &[2],
                levels: &[3],
                problem: ProblemKind::TwoPeak,
                tolerance: 1e-10,
                max_cycles: 300,
            };
            let exp = Experiment::History {
                p: single(&run.p(&d), "degree")?,
                level: single(&run.levels(&d)?, "level")?,
                problem: run.problem(&d),
                smoother_iterations: *smoother_iterations,
            };
            (run, (run.settings(&d, Some(par)), exp))
        }
        Command::ResidualVsError { run, par, threshold } => {
            let d = Defaults {
                p: &[2, 3],
                levels: &[2, 3, 4],
                problem: ProblemKind::TwoPeak,
                tolerance: 1e-7,
                max_cycles: 300,
            };
            let exp = Experiment::ResidualVsError {
                p: run.p(&d),
                levels: run.levels(&d)?,
                threshold: *threshold,
            };
            (run, (run.settings(&d, Some(par)), exp))
        }
        Command::Equivalence {
            run,
            subdomains,
            workers,
            iterations,
        } => {
            let d = Defaults {
                p: &[2, 4],
                levels: &[3],
                problem: ProblemKind::TwoPeak,
                tolerance: 1e-7,
                max_cycles: 300,
            };
            let exp = Experiment::Equivalence {
                p: run.p(&d),
                level: single(&run.levels(&d)?, "level")?,
                problem: run.problem(&d),
                iterations: *iterations,
                subdomains: subdomains.clone(),
                workers: workers.clone(),
            };
            (run, (run.settings(&d, None), exp))
        }
        Command::Model { run } => {
            let d = Defaults {
                p: &[1, 2, 3, 4, 5, 6],
                levels: &[2],
                problem: ProblemKind::Zero,
                tolerance: 1e-7,
                max_cycles: 300,
            };
            let exp = Experiment::Model {
                p: run.p(&d),
                level: single(&run.levels(&d)?, "level")?,
            };
            (run, (run.settings(&d, None), exp))
        }
    };
    let (settings, experiment) = spec;
    let spec = RunSpec {
        seed: run.seed,
        settings,
        experiment,
    };
    let (manifest, tables) = execute(&spec, Some(&run.out))?;
    for t in &tables {
        println!("wrote {}", run.out.join(t.file_name()).display());
    }
    println!("{} finished in {:.2} s", spec.experiment.name(), manifest.wall_time_s);
    Ok(())
}
