//! Experiment runs over generated or stored instances, with CSV reports.

mod gantt;
mod generate;

pub use gantt::render_gantt;
pub use generate::{generate_instance, DEFAULT_SLACK};

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::cellform::{solve_cellform_hybrid, CellFormationInstance, CellLimits, CellformError, SampleSelection};
use crate::jobshop::{solve_jobshop_hybrid, JobShopError, JobShopInstance, JobShopLimits, JobShopOutcome};
use crate::molconf::{solve_conformation, ConformationInstance};
use crate::partition::PartitionParams;
use crate::sampler::{BackendKind, SamplerConfig};
use crate::trace::HybridTrace;
use crate::vrp::{solve_vrp_parametric, VrpError, VrpInstance, VrpLimits};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("bad sizes: {0}")]
    Sizes(String),
    #[error("generation failed: {0}")]
    Generate(String),
    #[error("bad instance: {0}")]
    Instance(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BenchError + '_ {
    move |source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Molconf,
    Jobshop,
    Cellform,
    Vrp,
}

impl FromStr for ProblemKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "molconf" => Ok(ProblemKind::Molconf),
            "jobshop" => Ok(ProblemKind::Jobshop),
            "cellform" => Ok(ProblemKind::Cellform),
            "vrp" => Ok(ProblemKind::Vrp),
            other => Err(format!("unknown problem {other:?}")),
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProblemKind::Molconf => "molconf",
            ProblemKind::Jobshop => "jobshop",
            ProblemKind::Cellform => "cellform",
            ProblemKind::Vrp => "vrp",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Instance {
    Molconf(ConformationInstance),
    Jobshop(JobShopInstance),
    Cellform(CellFormationInstance),
    Vrp(VrpInstance),
}

impl Instance {
    pub fn kind(&self) -> ProblemKind {
        match self {
            Instance::Molconf(_) => ProblemKind::Molconf,
            Instance::Jobshop(_) => ProblemKind::Jobshop,
            Instance::Cellform(_) => ProblemKind::Cellform,
            Instance::Vrp(_) => ProblemKind::Vrp,
        }
    }

    pub fn from_json(kind: ProblemKind, text: &str) -> Result<Self, BenchError> {
        let e = |s: String| BenchError::Instance(s);
        Ok(match kind {
            ProblemKind::Molconf => Instance::Molconf(ConformationInstance::from_json(text).map_err(|x| e(x.to_string()))?),
            ProblemKind::Jobshop => Instance::Jobshop(JobShopInstance::from_json(text).map_err(|x| e(x.to_string()))?),
            ProblemKind::Cellform => {
                Instance::Cellform(CellFormationInstance::from_json(text).map_err(|x| e(x.to_string()))?)
            }
            ProblemKind::Vrp => Instance::Vrp(VrpInstance::from_json(text).map_err(|x| e(x.to_string()))?),
        })
    }

    pub fn to_json(&self) -> String {
        match self {
            Instance::Molconf(i) => i.to_json(),
            Instance::Jobshop(i) => i.to_json(),
            Instance::Cellform(i) => i.to_json(),
            Instance::Vrp(i) => i.to_json(),
        }
    }

    /// Size label in the order the generator takes them.
    pub fn sizes(&self) -> String {
        match self {
            Instance::Molconf(i) => format!("{}x{}", i.num_beads(), i.num_sites()),
            Instance::Jobshop(i) => format!("{}x{}", i.jobs, i.machines),
            Instance::Cellform(i) => format!("{}x{}x{}", i.parts, i.machines, i.cells),
            Instance::Vrp(i) => format!("{}x{}", i.vertices - 1, i.vehicles),
        }
    }

    /// `(binary, continuous)` variable counts of the original model.
    pub fn variable_counts(&self) -> (usize, usize) {
        match self {
            Instance::Molconf(i) => (i.num_vars(), 0),
            Instance::Jobshop(i) => (i.jobs * (i.jobs.saturating_sub(1)) + i.jobs * i.machines, i.jobs),
            Instance::Cellform(i) => i.variable_counts(),
            Instance::Vrp(i) => (i.num_vars(), 0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceSource {
    Path(PathBuf),
    Generate { sizes: Vec<usize>, seed: u64 },
    /// The bundled butane instance (molconf only).
    Butane,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputPaths {
    /// CSV report; the row is appended, with a header for a new file.
    pub report: Option<PathBuf>,
    pub solution: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    /// Job shop only.
    pub gantt: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemKind,
    pub source: InstanceSource,
    #[serde(default = "default_backend")]
    pub backend: BackendKind,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub max_iters: Option<usize>,
    #[serde(default)]
    pub subqubo_size: Option<usize>,
    #[serde(default)]
    pub delta: Option<f64>,
    /// Cell formation sample selection.
    #[serde(default)]
    pub selection: Option<SampleSelection>,
    #[serde(default)]
    pub outputs: OutputPaths,
}

fn default_backend() -> BackendKind {
    BackendKind::Tabu
}

impl ExperimentConfig {
    pub fn new(problem: ProblemKind, source: InstanceSource) -> Self {
        ExperimentConfig {
            problem,
            source,
            backend: default_backend(),
            sampler: SamplerConfig::default(),
            max_iters: None,
            subqubo_size: None,
            delta: None,
            selection: None,
            outputs: OutputPaths::default(),
        }
    }

    pub fn load_instance(&self) -> Result<(String, Instance), BenchError> {
        match &self.source {
            InstanceSource::Path(p) => {
                let text = fs::read_to_string(p).map_err(io_err(p))?;
                let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                Ok((name, Instance::from_json(self.problem, &text)?))
            }
            InstanceSource::Generate { sizes, seed } => {
                let inst = generate_instance(self.problem, sizes, *seed)?;
                Ok((format!("gen-{}-s{seed}", inst.sizes()), inst))
            }
            InstanceSource::Butane if self.problem == ProblemKind::Molconf => {
                Ok(("butane".into(), Instance::Molconf(ConformationInstance::butane())))
            }
            InstanceSource::Butane => Err(BenchError::Config("the butane instance is molconf only".into())),
        }
    }

    fn partition(&self) -> PartitionParams {
        let mut p = PartitionParams {
            sampler: self.sampler.clone(),
            ..Default::default()
        };
        if let Some(s) = self.subqubo_size {
            p.subqubo_size = s;
        }
        p
    }
}

/// One row of the report CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub problem: ProblemKind,
    pub instance: String,
    pub sizes: String,
    pub binary_vars: usize,
    pub continuous_vars: usize,
    pub iterations: usize,
    pub classical_time_s: f64,
    pub backend_time_s: f64,
    pub total_time_s: f64,
    pub min_obj: Option<f64>,
    pub status: String,
}

pub const REPORT_HEADER: [&str; 11] = [
    "problem",
    "instance",
    "sizes",
    "binary_vars",
    "continuous_vars",
    "iterations",
    "classical_time_s",
    "backend_time_s",
    "total_time_s",
    "min_obj",
    "status",
];

pub fn reports_to_csv(rows: &[RunReport]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub report: RunReport,
    /// Solution document without timings, so reruns compare byte for byte.
    pub solution: Value,
    pub trace: HybridTrace,
    pub gantt: Option<String>,
}

impl RunOutput {
    pub fn solution_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.solution).expect("json value");
        s.push('\n');
        s
    }
}

struct Solved {
    status: &'static str,
    objective: Option<f64>,
    iterations: usize,
    solution: Value,
    trace: HybridTrace,
    gantt: Option<String>,
}

fn failed(status: &'static str, message: String, trace: HybridTrace, iterations: usize) -> Solved {
    Solved {
        status,
        objective: None,
        iterations,
        solution: json!({ "status": status, "error": message }),
        trace,
        gantt: None,
    }
}

/// Runs the solver for the configured problem and writes any requested
/// artifacts. Solver failures end up in the report's status column.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput, BenchError> {
    let (name, instance) = cfg.load_instance()?;
    if instance.kind() != cfg.problem {
        return Err(BenchError::Config("instance kind does not match problem".into()));
    }
    let backend = cfg.backend.build().map_err(|e| BenchError::Config(e.to_string()))?;
    let backend = backend.as_ref();
    let start = Instant::now();
    let solved = match &instance {
        Instance::Molconf(inst) => match solve_conformation(inst, backend, &cfg.partition()) {
            Ok(s) => {
                let valid = s.report.is_valid();
                Solved {
                    status: if valid { "ok" } else { "infeasible" },
                    objective: Some(s.energy),
                    iterations: s.trace.rows.iter().map(|r| r.iteration).max().unwrap_or(0),
                    solution: json!({
                        "status": if valid { "ok" } else { "infeasible" },
                        "energy": s.energy,
                        "placement": s.report.placement(),
                        "penalty": s.penalty,
                        "num_vars": s.num_vars,
                        "assignment": s.assignment,
                    }),
                    trace: s.trace,
                    gantt: None,
                }
            }
            Err(e) => failed("error", e.to_string(), HybridTrace::default(), 0),
        },
        Instance::Jobshop(inst) => {
            let mut limits = JobShopLimits {
                sampler: cfg.sampler.clone(),
                partition: cfg.partition(),
                ..Default::default()
            };
            if let Some(m) = cfg.max_iters {
                limits.max_iters = m;
            }
            match solve_jobshop_hybrid(inst, backend, &limits) {
                Ok(run) => {
                    let (status, objective, gantt) = match &run.outcome {
                        JobShopOutcome::Scheduled { schedule, objective } => {
                            ("ok", Some(*objective), Some(render_gantt(inst, schedule)))
                        }
                        JobShopOutcome::NoSolution => ("no_solution", None, None),
                    };
                    let mut doc = serde_json::to_value(&run.outcome).expect("outcome serializes");
                    doc["iterations"] = json!(run.iterations);
                    doc["cuts"] = json!(run.cuts);
                    Solved {
                        status,
                        objective,
                        iterations: run.iterations,
                        solution: doc,
                        trace: run.trace,
                        gantt,
                    }
                }
                Err(JobShopError::IterationLimit { iterations, trace }) => {
                    failed("iteration_limit", "iteration limit reached".into(), trace, iterations)
                }
                Err(e) => failed("error", e.to_string(), HybridTrace::default(), 0),
            }
        }
        Instance::Cellform(inst) => {
            let mut limits = CellLimits {
                sampler: cfg.sampler.clone(),
                partition: cfg.partition(),
                ..Default::default()
            };
            if let Some(m) = cfg.max_iters {
                limits.max_iters = m;
            }
            if let Some(sel) = cfg.selection {
                limits.selection = sel;
            }
            match solve_cellform_hybrid(inst, backend, &limits) {
                Ok(run) => Solved {
                    status: "ok",
                    objective: Some(run.solution.objective),
                    iterations: run.iterations,
                    solution: json!({
                        "status": "ok",
                        "objective": run.solution.objective,
                        "machine_cell": run.solution.machine_cell,
                        "x": run.solution.x,
                        "lower_bound": run.lower_bound,
                        "upper_bound": run.upper_bound,
                        "iterations": run.iterations,
                    }),
                    trace: run.trace,
                    gantt: None,
                },
                Err(CellformError::IterationLimit {
                    iterations,
                    upper_bound,
                    incumbent,
                    trace,
                }) => Solved {
                    status: "iteration_limit",
                    objective: Some(upper_bound),
                    iterations,
                    solution: json!({
                        "status": "iteration_limit",
                        "objective": incumbent.objective,
                        "machine_cell": incumbent.machine_cell,
                        "x": incumbent.x,
                        "iterations": iterations,
                    }),
                    trace,
                    gantt: None,
                },
                Err(e) => failed("error", e.to_string(), HybridTrace::default(), 0),
            }
        }
        Instance::Vrp(inst) => {
            let mut limits = VrpLimits {
                sampler: cfg.sampler.clone(),
                partition: cfg.partition(),
                ..Default::default()
            };
            if let Some(m) = cfg.max_iters {
                limits.max_iters = m;
            }
            if let Some(d) = cfg.delta {
                limits.delta = d;
            }
            match solve_vrp_parametric(inst, backend, &limits) {
                Ok(run) => Solved {
                    status: "ok",
                    objective: Some(run.lambda),
                    iterations: run.iterations,
                    solution: json!({
                        "status": "ok",
                        "routes": run.plan.routes,
                        "cost": run.plan.cost,
                        "time": run.plan.time,
                        "ratio": run.lambda,
                        "lambdas": run.lambdas,
                        "iterations": run.iterations,
                    }),
                    trace: run.trace,
                    gantt: None,
                },
                Err(VrpError::NoSolution { iteration, trace }) => {
                    failed("no_solution", "infeasible routes returned".into(), trace, iteration)
                }
                Err(VrpError::IterationLimit { iterations, trace }) => {
                    failed("iteration_limit", "iteration limit reached".into(), trace, iterations)
                }
                Err(e) => failed("error", e.to_string(), HybridTrace::default(), 0),
            }
        }
    };
    let total = start.elapsed().as_secs_f64();
    let (binary_vars, continuous_vars) = instance.variable_counts();
    let backend_time = solved.trace.backend_seconds();
    let report = RunReport {
        problem: cfg.problem,
        instance: name,
        sizes: instance.sizes(),
        binary_vars,
        continuous_vars,
        iterations: solved.iterations,
        classical_time_s: (total - backend_time).max(0.0),
        backend_time_s: backend_time,
        total_time_s: total,
        min_obj: solved.objective,
        status: solved.status.into(),
    };
    let out = RunOutput {
        report,
        solution: solved.solution,
        trace: solved.trace,
        gantt: solved.gantt,
    };
    write_artifacts(&out, &cfg.outputs)?;
    Ok(out)
}

fn write_artifacts(out: &RunOutput, paths: &OutputPaths) -> Result<(), BenchError> {
    if let Some(p) = &paths.solution {
        fs::write(p, out.solution_json()).map_err(io_err(p))?;
    }
    if let Some(p) = &paths.trace {
        fs::write(p, out.trace.to_csv_string()).map_err(io_err(p))?;
    }
    if let (Some(p), Some(g)) = (&paths.gantt, &out.gantt) {
        fs::write(p, g).map_err(io_err(p))?;
    }
    if let Some(p) = &paths.report {
        append_report(p, &out.report)?;
    }
    Ok(())
}

pub fn append_report(path: &Path, row: &RunReport) -> Result<(), BenchError> {
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(io_err(path))?;
    let mut w = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
    w.serialize(row)
        .and_then(|_| w.flush().map_err(csv::Error::from))
        .map_err(|e| BenchError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::other(e),
        })
}

/// Runs configs in parallel. Results keep the input order.
pub fn run_batch(cfgs: &[ExperimentConfig]) -> Vec<Result<RunOutput, BenchError>> {
    cfgs.par_iter()
        .map(|c| {
            let mut c = c.clone();
            c.outputs.report = None;
            run_experiment(&c)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_header_matches() {
        let row = RunReport {
            problem: ProblemKind::Vrp,
            instance: "x".into(),
            sizes: "3x2".into(),
            binary_vars: 32,
            continuous_vars: 0,
            iterations: 2,
            classical_time_s: 0.0,
            backend_time_s: 0.0,
            total_time_s: 0.0,
            min_obj: Some(1.5),
            status: "ok".into(),
        };
        let csv = reports_to_csv(&[row]);
        assert_eq!(csv.lines().next().unwrap(), REPORT_HEADER.join(","));
    }

    #[test]
    fn table_size_columns() {
        let j = generate_instance(ProblemKind::Jobshop, &[50, 50], 1).unwrap();
        assert_eq!(j.variable_counts().0, 4950);
        let c = generate_instance(ProblemKind::Cellform, &[10, 10, 4], 1).unwrap();
        assert_eq!(c.variable_counts(), (40, 40));
        let m = generate_instance(ProblemKind::Molconf, &[3, 3], 1).unwrap();
        assert_eq!(m.variable_counts(), (81, 0));
    }

    #[test]
    fn molconf_run_is_repeatable() {
        let mut cfg = ExperimentConfig::new(ProblemKind::Molconf, InstanceSource::Generate { sizes: vec![3, 2], seed: 0 });
        cfg.backend = BackendKind::BruteForce;
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.solution_json(), b.solution_json());
        assert_eq!(a.report.status, "ok");
        assert_eq!(a.report.binary_vars, 24);
    }
}
