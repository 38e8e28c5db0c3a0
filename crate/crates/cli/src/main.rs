use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use hyq::bench::{
    generate_instance, reports_to_csv, run_batch, run_experiment, ExperimentConfig, InstanceSource, OutputPaths,
    ProblemKind,
};
use hyq::cellform::SampleSelection;
use hyq::lp::{solve_lp, solve_milp, MilpModel};
use hyq::partition::{solve_partitioned, PartitionParams};
use hyq::qubo::QuboModel;
use hyq::sampler::{BackendKind, SamplerConfig};

#[derive(Parser)]
#[command(name = "hyq", version, about = "Hybrid QUBO decomposition solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// RNG seed shared by the samplers and the generator.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// bruteforce, sa, tabu or remote (reads HYQ_REMOTE_SAMPLER_URL).
    #[arg(long, default_value = "tabu")]
    backend: BackendKind,
    #[arg(long)]
    num_reads: Option<usize>,
    /// Solution JSON path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn sampler(&self) -> SamplerConfig {
        let mut cfg = SamplerConfig::with_seed(self.seed);
        if let Some(n) = self.num_reads {
            cfg.num_reads = n;
        }
        cfg
    }
}

#[derive(Args, Clone)]
struct Problem {
    #[command(flatten)]
    common: Common,
    /// Instance JSON file.
    #[arg(long, conflicts_with = "gen")]
    instance: Option<PathBuf>,
    /// Generate an instance with these comma-separated sizes instead.
    #[arg(long, value_delimiter = ',')]
    gen: Option<Vec<usize>>,
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Append a report row to this CSV.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    subqubo_size: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a QUBO model file.
    QuboSolve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        /// Use the partitioning solver with the backend on sub-QUBOs.
        #[arg(long)]
        partition: bool,
        #[arg(long, default_value_t = 64)]
        subqubo_size: usize,
        /// Number of best samples to print.
        #[arg(long, default_value_t = 1)]
        top: usize,
    },
    /// Solve an LP, or a MILP when any variable is integer.
    LpSolve {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Lattice conformation of a bead chain.
    Molconf {
        #[command(flatten)]
        problem: Problem,
    },
    /// Machine assignment and sequencing with integer cuts.
    Jobshop {
        #[command(flatten)]
        problem: Problem,
        /// Text Gantt chart output.
        #[arg(long)]
        gantt: Option<PathBuf>,
    },
    /// Manufacturing cell formation by stepwise decomposition.
    Cellform {
        #[command(flatten)]
        problem: Problem,
        /// Pick the lowest-energy sample rather than the lowest-bound one.
        #[arg(long)]
        lowest_energy: bool,
    },
    /// Vehicle routing with a cost / time ratio.
    Vrp {
        #[command(flatten)]
        problem: Problem,
        #[arg(long)]
        delta: Option<f64>,
        /// Same as --out.
        #[arg(long)]
        routes: Option<PathBuf>,
    },
    /// Write a random instance.
    Gen {
        #[arg(long)]
        kind: ProblemKind,
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a JSON list of experiment configs and write a CSV report.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json value");
    s.push('\n');
    s
}

fn run_problem(
    kind: ProblemKind,
    p: &Problem,
    gantt: Option<PathBuf>,
    delta: Option<f64>,
    out: Option<PathBuf>,
    selection: Option<SampleSelection>,
) -> Result<()> {
    let source = match (&p.instance, &p.gen) {
        (Some(path), None) => InstanceSource::Path(path.clone()),
        (None, Some(sizes)) => InstanceSource::Generate {
            sizes: sizes.clone(),
            seed: p.common.seed,
        },
        (None, None) if kind == ProblemKind::Molconf => InstanceSource::Path(PathBuf::new()),
        _ => bail!("pass --instance or --gen"),
    };
    let mut cfg = ExperimentConfig::new(kind, source);
    cfg.backend = p.common.backend;
    cfg.sampler = p.common.sampler();
    cfg.max_iters = p.max_iters;
    cfg.subqubo_size = p.subqubo_size;
    cfg.delta = delta;
    cfg.selection = selection;
    let out = out.or_else(|| p.common.out.clone());
    cfg.outputs = OutputPaths {
        report: p.report.clone(),
        solution: out.clone(),
        trace: p.trace.clone(),
        gantt,
    };
    if matches!(&cfg.source, InstanceSource::Path(path) if path.as_os_str().is_empty()) {
        cfg.source = InstanceSource::Butane;
    }
    let run = run_experiment(&cfg)?;
    log::info!(
        "{} {}: status {} objective {:?} in {} iterations",
        run.report.problem,
        run.report.instance,
        run.report.status,
        run.report.min_obj,
        run.report.iterations
    );
    if out.is_none() {
        print!("{}", run.solution_json());
    }
    if run.report.status == "error" {
        bail!("solver failed: {}", run.solution["error"]);
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::QuboSolve {
            common,
            model,
            partition,
            subqubo_size,
            top,
        } => {
            let text = fs::read_to_string(&model).with_context(|| format!("reading {}", model.display()))?;
            let q = QuboModel::from_json(&text)?;
            let backend = common.backend.build()?;
            let cfg = common.sampler();
            let doc = if partition {
                let params = PartitionParams {
                    subqubo_size,
                    sampler: cfg,
                    ..Default::default()
                };
                let r = solve_partitioned(&q, backend.as_ref(), &params)?;
                json!({
                    "backend": common.backend,
                    "samples": [{ "assignment": r.assignment, "energy": r.energy, "multiplicity": 1 }],
                })
            } else {
                let mut set = backend.sample(&q, &cfg, None)?;
                set.truncate(top.max(1));
                json!({ "backend": common.backend, "samples": set.samples() })
            };
            emit(common.out.as_deref(), &pretty(&doc))
        }
        Command::LpSolve { model, out } => {
            let text = fs::read_to_string(&model).with_context(|| format!("reading {}", model.display()))?;
            let m = MilpModel::from_json(&text)?;
            let doc = if m.num_integer() > 0 {
                let r = solve_milp(&m)?;
                json!({ "status": r.status, "objective": r.objective, "values": r.values, "nodes": r.nodes })
            } else {
                let r = solve_lp(&m.lp);
                json!({ "status": r.status, "objective": r.objective, "values": r.values, "iterations": r.iterations })
            };
            emit(out.as_deref(), &pretty(&doc))
        }
        Command::Molconf { problem } => run_problem(ProblemKind::Molconf, &problem, None, None, None, None),
        Command::Jobshop { problem, gantt } => run_problem(ProblemKind::Jobshop, &problem, gantt, None, None, None),
        Command::Cellform { problem, lowest_energy } => {
            let sel = lowest_energy.then_some(SampleSelection::LowestEnergy);
            run_problem(ProblemKind::Cellform, &problem, None, None, None, sel)
        }
        Command::Vrp { problem, delta, routes } => run_problem(ProblemKind::Vrp, &problem, None, delta, routes, None),
        Command::Gen { kind, sizes, seed, out } => {
            let inst = generate_instance(kind, &sizes, seed)?;
            let mut text = inst.to_json();
            text.push('\n');
            emit(out.as_deref(), &text)
        }
        Command::Bench { config, report } => {
            let text = fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let cfgs: Vec<ExperimentConfig> = serde_json::from_str(&text).context("parsing bench config")?;
            let mut rows = Vec::new();
            for (i, r) in run_batch(&cfgs).into_iter().enumerate() {
                match r {
                    Ok(out) => rows.push(out.report),
                    Err(e) => bail!("config {i}: {e}"),
                }
            }
            emit(report.as_deref(), &reports_to_csv(&rows))
        }
    }
}
