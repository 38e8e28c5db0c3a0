//! Single-stage parallel-machine scheduling. A relaxed MILP assigns jobs to
//! machines and a QUBO orders each machine; failed machines become integer
//! cuts. The full MILP is kept as an exact reference.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{solve_milp, LpError, LpStatus, MilpError, MilpModel, Relation, Sense};
use crate::partition::{solve_partitioned, PartitionError, PartitionParams};
use crate::qubo::{Assignment, QuboModel};
use crate::sampler::{Sampler, SamplerConfig, SamplerError};
use crate::trace::{HybridTrace, TraceRow};

/// Slack for start-time comparisons in the schedule check.
const TIME_TOL: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum JobShopError {
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("no schedule after {iterations} iterations")]
    IterationLimit { iterations: usize, trace: HybridTrace },
    #[error("relaxed MILP: {0}")]
    Milp(#[from] MilpError),
    #[error("relaxed MILP ended with status {0:?}")]
    Relaxation(LpStatus),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Lp(#[from] LpError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobShopInstance {
    pub jobs: usize,
    pub machines: usize,
    #[serde(rename = "C")]
    pub cost: Vec<Vec<f64>>,
    #[serde(rename = "P")]
    pub processing: Vec<Vec<f64>>,
    #[serde(rename = "R")]
    pub release: Vec<f64>,
    #[serde(rename = "D")]
    pub due: Vec<f64>,
}

impl JobShopInstance {
    pub fn from_json(text: &str) -> Result<Self, JobShopError> {
        let inst: JobShopInstance =
            serde_json::from_str(text).map_err(|e| JobShopError::Invalid(e.to_string()))?;
        inst.validate()?;
        Ok(inst)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    pub fn validate(&self) -> Result<(), JobShopError> {
        let (n, m) = (self.jobs, self.machines);
        let bad = |s: String| Err(JobShopError::Invalid(s));
        if m == 0 {
            return bad("at least one machine is required".into());
        }
        if n > 100_000 || m > 100_000 {
            return bad("instance too large".into());
        }
        let shaped = |t: &Vec<Vec<f64>>| t.len() == n && t.iter().all(|r| r.len() == m);
        if !shaped(&self.cost) || !shaped(&self.processing) {
            return bad(format!("C and P must be {n}×{m}"));
        }
        if self.release.len() != n || self.due.len() != n {
            return bad(format!("R and D need {n} entries"));
        }
        if self.cost.iter().flatten().any(|v| !v.is_finite()) {
            return bad("costs must be finite".into());
        }
        if self.processing.iter().flatten().any(|&p| !(p > 0.0 && p.is_finite())) {
            return bad("processing times must be positive and finite".into());
        }
        for i in 0..n {
            if !self.release[i].is_finite() || !self.due[i].is_finite() || self.release[i] > self.due[i] {
                return bad(format!("job {i} needs finite R ≤ D"));
            }
        }
        Ok(())
    }
}

/// `U = Σᵢ maxₘ Pᵢₘ`.
pub fn big_u(inst: &JobShopInstance) -> f64 {
    inst.processing
        .iter()
        .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .filter(|v| v.is_finite())
        .sum()
}

/// Full scheduling MILP with its variable layout.
#[derive(Clone, Debug)]
pub struct FullMilp {
    pub model: MilpModel,
    pub ts: Vec<usize>,
    pub x: Vec<Vec<usize>>,
    /// `y[(i, j)]` for every ordered pair `i ≠ j`.
    pub y: BTreeMap<(usize, usize), usize>,
}

/// Start-time lower bounds merge `ts ≥ R` and `ts ≥ 0` into the variable bound.
pub fn build_full_milp(inst: &JobShopInstance) -> FullMilp {
    let (n, nm) = (inst.jobs, inst.machines);
    let u = big_u(inst);
    let mut model = MilpModel::new(Sense::Min);
    let ts: Vec<usize> = (0..n)
        .map(|i| model.add_continuous(format!("ts[{i}]"), inst.release[i].max(0.0), f64::INFINITY, 0.0))
        .collect();
    let x: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..nm).map(|m| model.add_binary(format!("x[{i},{m}]"), inst.cost[i][m])).collect())
        .collect();
    let mut y = BTreeMap::new();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                y.insert((i, j), model.add_binary(format!("y[{i},{j}]"), 0.0));
            }
        }
    }
    let mut terms = Vec::with_capacity(nm + 2);
    for i in 0..n {
        terms.clear();
        terms.push((ts[i], 1.0));
        terms.extend((0..nm).map(|m| (x[i][m], inst.processing[i][m])));
        model.add_constraint(&terms, Relation::Le, inst.due[i]);
        let assign: Vec<(usize, f64)> = (0..nm).map(|m| (x[i][m], 1.0)).collect();
        model.add_constraint(&assign, Relation::Eq, 1.0);
    }
    for i in 0..n {
        for j in i + 1..n {
            let (yij, yji) = (y[&(i, j)], y[&(j, i)]);
            for m in 0..nm {
                model.add_constraint(
                    &[(yij, 1.0), (yji, 1.0), (x[i][m], -1.0), (x[j][m], -1.0)],
                    Relation::Ge,
                    -1.0,
                );
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            terms.clear();
            terms.push((ts[j], 1.0));
            terms.push((ts[i], -1.0));
            terms.extend((0..nm).map(|m| (x[i][m], -inst.processing[i][m])));
            terms.push((y[&(i, j)], -u));
            model.add_constraint(&terms, Relation::Ge, -u);
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            let (yij, yji) = (y[&(i, j)], y[&(j, i)]);
            model.add_constraint(&[(yij, 1.0), (yji, 1.0)], Relation::Le, 1.0);
            for m in 0..nm {
                for k in 0..nm {
                    if m != k {
                        model.add_constraint(
                            &[(yij, 1.0), (yji, 1.0), (x[i][m], 1.0), (x[j][k], 1.0)],
                            Relation::Le,
                            2.0,
                        );
                    }
                }
            }
        }
    }
    FullMilp { model, ts, x, y }
}

/// Excludes assigning every job of `jobs` to `machine` at once.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IntegerCut {
    pub machine: usize,
    pub jobs: Vec<usize>,
}

/// Assignment MILP restricted to `jobs`, with the cuts that touch them.
#[derive(Clone, Debug)]
pub struct RelaxedMilp {
    pub model: MilpModel,
    pub jobs: Vec<usize>,
    pub ts: Vec<usize>,
    pub x: Vec<Vec<usize>>,
}

pub fn build_relaxed_milp(inst: &JobShopInstance, cuts: &[IntegerCut]) -> RelaxedMilp {
    build_relaxed_for(inst, &(0..inst.jobs).collect::<Vec<_>>(), cuts)
}

fn build_relaxed_for(inst: &JobShopInstance, jobs: &[usize], cuts: &[IntegerCut]) -> RelaxedMilp {
    let nm = inst.machines;
    let mut model = MilpModel::new(Sense::Min);
    let mut ts = Vec::with_capacity(jobs.len());
    let mut x = Vec::with_capacity(jobs.len());
    let mut local = BTreeMap::new();
    for (a, &i) in jobs.iter().enumerate() {
        local.insert(i, a);
        ts.push(model.add_continuous(format!("ts[{i}]"), inst.release[i].max(0.0), f64::INFINITY, 0.0));
        x.push((0..nm).map(|m| model.add_binary(format!("x[{i},{m}]"), inst.cost[i][m])).collect::<Vec<_>>());
    }
    for (a, &i) in jobs.iter().enumerate() {
        let mut terms = vec![(ts[a], 1.0)];
        terms.extend((0..nm).map(|m| (x[a][m], inst.processing[i][m])));
        model.add_constraint(&terms, Relation::Le, inst.due[i]);
        let assign: Vec<(usize, f64)> = (0..nm).map(|m| (x[a][m], 1.0)).collect();
        model.add_constraint(&assign, Relation::Eq, 1.0);
    }
    for cut in cuts {
        if cut.jobs.iter().all(|i| local.contains_key(i)) {
            let terms: Vec<(usize, f64)> = cut.jobs.iter().map(|i| (x[local[i]][cut.machine], 1.0)).collect();
            model.add_constraint(&terms, Relation::Le, cut.jobs.len() as f64 - 1.0);
        }
    }
    RelaxedMilp {
        model,
        jobs: jobs.to_vec(),
        ts,
        x,
    }
}

/// Machine choice and start time per job.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssignmentSolution {
    pub machine: Vec<usize>,
    pub start: Vec<f64>,
}

impl AssignmentSolution {
    pub fn processing(&self, inst: &JobShopInstance, i: usize) -> f64 {
        inst.processing[i][self.machine[i]]
    }

    pub fn jobs_on(&self, m: usize) -> Vec<usize> {
        (0..self.machine.len()).filter(|&i| self.machine[i] == m).collect()
    }

    /// Unordered same-machine pairs `(i, j)` with `i < j`.
    pub fn shared_pairs(&self) -> Vec<(usize, usize)> {
        let n = self.machine.len();
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if self.machine[i] == self.machine[j] {
                    pairs.push((i, j));
                }
            }
        }
        pairs
    }

    pub fn cost(&self, inst: &JobShopInstance) -> f64 {
        self.machine.iter().enumerate().map(|(i, &m)| inst.cost[i][m]).sum()
    }
}

/// Solves the relaxed MILP. Jobs not linked by a cut are independent, so each
/// connected group is solved on its own. `None` means infeasible.
pub fn solve_relaxed(
    inst: &JobShopInstance,
    cuts: &[IntegerCut],
) -> Result<Option<(AssignmentSolution, f64)>, JobShopError> {
    let n = inst.jobs;
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut a: usize) -> usize {
        while p[a] != a {
            p[a] = p[p[a]];
            a = p[a];
        }
        a
    }
    for cut in cuts {
        for w in cut.jobs.windows(2) {
            let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(i);
    }

    let mut sol = AssignmentSolution {
        machine: vec![0; n],
        start: vec![0.0; n],
    };
    for jobs in groups.values() {
        let relaxed = build_relaxed_for(inst, jobs, cuts);
        let r = solve_milp(&relaxed.model)?;
        match r.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => return Ok(None),
            other => return Err(JobShopError::Relaxation(other)),
        }
        for (a, &i) in jobs.iter().enumerate() {
            sol.machine[i] = (0..inst.machines)
                .find(|&m| r.values[relaxed.x[a][m]] > 0.5)
                .expect("assignment row forces one machine");
            sol.start[i] = r.values[relaxed.ts[a]];
        }
    }
    let objective = sol.cost(inst);
    Ok(Some((sol, objective)))
}

/// Sequencing QUBO; variable `2p` is `y_ij` and `2p + 1` is `y_ji` for the
/// `p`-th same-machine pair `(i, j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SequencingQubo {
    pub model: QuboModel,
    pub pairs: Vec<(usize, usize)>,
}

impl SequencingQubo {
    /// Ordered pairs `(i, j)` whose `y_ij` is set.
    pub fn decode(&self, a: &Assignment) -> BTreeMap<(usize, usize), bool> {
        let mut y = BTreeMap::new();
        for (p, &(i, j)) in self.pairs.iter().enumerate() {
            y.insert((i, j), a.get(2 * p));
            y.insert((j, i), a.get(2 * p + 1));
        }
        y
    }
}

/// Per same-machine pair: `1 − y_ij − y_ji + 2y_ij·y_ji` plus a timing term
/// `U(tsᵢ − tsⱼ) + Pᵢ` on `y_ij` and the mirrored one on `y_ji`.
pub fn build_sequencing_qubo(inst: &JobShopInstance, sol: &AssignmentSolution) -> SequencingQubo {
    let u = big_u(inst);
    let pairs = sol.shared_pairs();
    let mut model = QuboModel::new(2 * pairs.len());
    for (p, &(i, j)) in pairs.iter().enumerate() {
        let (a, b) = (2 * p, 2 * p + 1);
        model.set_label(a, format!("y[{i},{j}]"));
        model.set_label(b, format!("y[{j},{i}]"));
        model.add_offset(1.0);
        model.add_linear(a, -1.0 + u * (sol.start[i] - sol.start[j]) + sol.processing(inst, i));
        model.add_linear(b, -1.0 + u * (sol.start[j] - sol.start[i]) + sol.processing(inst, j));
        model.add_quadratic(a, b, 2.0);
    }
    SequencingQubo { model, pairs }
}

/// Machines whose pairs are not ordered exactly once or whose ordering
/// violates the fixed start times.
pub fn check_schedule(
    inst: &JobShopInstance,
    sol: &AssignmentSolution,
    y: &BTreeMap<(usize, usize), bool>,
) -> Vec<usize> {
    let mut failing = Vec::new();
    for m in 0..inst.machines {
        let jobs = sol.jobs_on(m);
        let ok = jobs.iter().enumerate().all(|(a, &i)| {
            jobs[a + 1..].iter().all(|&j| {
                let yij = y.get(&(i, j)).copied().unwrap_or(false);
                let yji = y.get(&(j, i)).copied().unwrap_or(false);
                match (yij, yji) {
                    (true, false) => sol.start[j] + TIME_TOL >= sol.start[i] + sol.processing(inst, i),
                    (false, true) => sol.start[i] + TIME_TOL >= sol.start[j] + sol.processing(inst, j),
                    _ => false,
                }
            })
        });
        if !ok {
            failing.push(m);
        }
    }
    failing
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub machine: Vec<usize>,
    pub start: Vec<f64>,
    /// Ordered same-machine pairs `(i, j)` with `i` before `j`.
    pub precedes: Vec<(usize, usize)>,
}

impl Schedule {
    pub fn end(&self, inst: &JobShopInstance, i: usize) -> f64 {
        self.start[i] + inst.processing[i][self.machine[i]]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum JobShopOutcome {
    Scheduled { schedule: Schedule, objective: f64 },
    NoSolution,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JobShopRun {
    pub outcome: JobShopOutcome,
    pub iterations: usize,
    pub cuts: Vec<IntegerCut>,
    pub trace: HybridTrace,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JobShopLimits {
    pub max_iters: usize,
    pub sampler: SamplerConfig,
    /// Used when the sequencing QUBO exceeds the backend's capacity.
    pub partition: PartitionParams,
}

impl Default for JobShopLimits {
    fn default() -> Self {
        JobShopLimits {
            max_iters: 500,
            sampler: SamplerConfig::default(),
            partition: PartitionParams::default(),
        }
    }
}

/// Alternates the relaxed MILP with the sequencing QUBO, adding an integer
/// cut for every machine whose jobs cannot be ordered at the fixed starts.
pub fn solve_jobshop_hybrid(
    inst: &JobShopInstance,
    backend: &dyn Sampler,
    limits: &JobShopLimits,
) -> Result<JobShopRun, JobShopError> {
    inst.validate()?;
    let mut cuts: Vec<IntegerCut> = Vec::new();
    let mut trace = HybridTrace::default();
    for iteration in 1..=limits.max_iters {
        let classical = Instant::now();
        let relaxed = solve_relaxed(inst, &cuts)?;
        let mut row = TraceRow::new(iteration);
        let Some((sol, objective)) = relaxed else {
            row.classical_s = classical.elapsed().as_secs_f64();
            row.note = "relaxed MILP infeasible".into();
            trace.push(row);
            return Ok(JobShopRun {
                outcome: JobShopOutcome::NoSolution,
                iterations: iteration,
                cuts,
                trace,
            });
        };
        let q = build_sequencing_qubo(inst, &sol);
        let mut classical_s = classical.elapsed().as_secs_f64();
        row.objective = Some(objective);
        row.qubo_vars = Some(q.model.num_vars());

        let backend_start = Instant::now();
        let candidates: Vec<Assignment> = if q.model.num_vars() == 0 {
            vec![Assignment::zeros(0)]
        } else if backend.capacity().is_some_and(|cap| q.model.num_vars() > cap) {
            let params = PartitionParams {
                sampler: limits.sampler.clone(),
                ..limits.partition.clone()
            };
            vec![solve_partitioned(&q.model, backend, &params)?.assignment]
        } else {
            backend
                .sample(&q.model, &limits.sampler, None)?
                .iter()
                .map(|s| s.assignment.clone())
                .collect()
        };
        row.backend_s = backend_start.elapsed().as_secs_f64();

        let check_start = Instant::now();
        let mut first_failing = None;
        let mut accepted = None;
        for a in &candidates {
            let y = q.decode(a);
            let failing = check_schedule(inst, &sol, &y);
            if failing.is_empty() {
                accepted = Some((a, y));
                break;
            }
            first_failing.get_or_insert(failing);
        }
        row.best_energy = candidates.first().map(|a| q.model.energy(a)).transpose().ok().flatten();
        if let Some((_, y)) = accepted {
            row.cuts_added = Some(0);
            row.classical_s = classical_s + check_start.elapsed().as_secs_f64();
            row.note = "feasible schedule".into();
            trace.push(row);
            let precedes = y.iter().filter(|(_, &v)| v).map(|(&k, _)| k).collect();
            return Ok(JobShopRun {
                outcome: JobShopOutcome::Scheduled {
                    schedule: Schedule {
                        machine: sol.machine,
                        start: sol.start,
                        precedes,
                    },
                    objective,
                },
                iterations: iteration,
                cuts,
                trace,
            });
        }
        let failing = first_failing.unwrap_or_default();
        for &m in &failing {
            cuts.push(IntegerCut {
                machine: m,
                jobs: sol.jobs_on(m),
            });
        }
        classical_s += check_start.elapsed().as_secs_f64();
        row.cuts_added = Some(failing.len());
        row.classical_s = classical_s;
        row.note = format!("cut machines {failing:?}");
        trace.push(row);
    }
    Err(JobShopError::IterationLimit {
        iterations: limits.max_iters,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{brute_force, BruteForce};

    fn inst(c: Vec<Vec<f64>>, p: Vec<Vec<f64>>, r: Vec<f64>, d: Vec<f64>) -> JobShopInstance {
        JobShopInstance {
            jobs: c.len(),
            machines: c[0].len(),
            cost: c,
            processing: p,
            release: r,
            due: d,
        }
    }

    #[test]
    fn big_u_examples() {
        let one = inst(vec![vec![1.0, 1.0]], vec![vec![3.0, 5.0]], vec![0.0], vec![10.0]);
        assert_eq!(big_u(&one), 5.0);
        let two = inst(
            vec![vec![1.0, 1.0]; 2],
            vec![vec![2.0, 4.0], vec![7.0, 1.0]],
            vec![0.0; 2],
            vec![20.0; 2],
        );
        assert_eq!(big_u(&two), 11.0);
    }

    #[test]
    fn full_milp_single_job() {
        let one = inst(vec![vec![2.0]], vec![vec![3.0]], vec![1.0], vec![10.0]);
        let f = build_full_milp(&one);
        let r = solve_milp(&f.model).unwrap();
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.objective - 2.0).abs() < 1e-9);
    }

    #[test]
    fn full_milp_counts() {
        let big = inst(vec![vec![1.0; 6]; 5], vec![vec![1.0; 6]; 5], vec![0.0; 5], vec![9.0; 5]);
        let f = build_full_milp(&big);
        assert_eq!(f.model.num_binary(), 5 * 6 + 5 * 4);
        assert_eq!(f.model.num_continuous(), 5);
    }

    #[test]
    fn relaxed_equal_costs_and_cut_infeasibility() {
        let eq = inst(vec![vec![4.0, 4.0]; 3], vec![vec![1.0, 1.0]; 3], vec![0.0; 3], vec![5.0; 3]);
        let (_, obj) = solve_relaxed(&eq, &[]).unwrap().unwrap();
        assert_eq!(obj, 12.0);
        let single = inst(vec![vec![1.0]; 2], vec![vec![1.0]; 2], vec![0.0; 2], vec![5.0; 2]);
        let cut = IntegerCut { machine: 0, jobs: vec![0, 1] };
        assert!(solve_relaxed(&single, std::slice::from_ref(&cut)).unwrap().is_none());
        let model = build_relaxed_milp(&single, &[cut]).model;
        assert_eq!(solve_milp(&model).unwrap().status, LpStatus::Infeasible);
    }

    fn two_on_one(start: [f64; 2], p1: f64) -> (JobShopInstance, AssignmentSolution) {
        // U = 13 with P = (p1, 13 − p1).
        let i = inst(
            vec![vec![1.0]; 2],
            vec![vec![p1], vec![13.0 - p1]],
            vec![0.0; 2],
            vec![100.0; 2],
        );
        (
            i,
            AssignmentSolution {
                machine: vec![0, 0],
                start: start.to_vec(),
            },
        )
    }

    #[test]
    fn sequencing_qubo_prefers_earlier_job_first() {
        let (i, sol) = two_on_one([0.0, 10.0], 3.0);
        assert_eq!(big_u(&i), 13.0);
        let q = build_sequencing_qubo(&i, &sol);
        let best = brute_force(&q.model).unwrap().first().unwrap().clone();
        assert_eq!(best.assignment.to_u8(), vec![1, 0]);
        assert_eq!(best.energy, -127.0);
        assert!(check_schedule(&i, &sol, &q.decode(&best.assignment)).is_empty());
    }

    #[test]
    fn overlapping_starts_fail_the_check() {
        let (i, sol) = two_on_one([0.0, 1.0], 5.0);
        let q = build_sequencing_qubo(&i, &sol);
        let best = brute_force(&q.model).unwrap().first().unwrap().assignment.clone();
        assert_eq!(check_schedule(&i, &sol, &q.decode(&best)), vec![0]);
    }

    #[test]
    fn singleton_machines_are_trivially_feasible() {
        let i = inst(vec![vec![1.0, 9.0], vec![9.0, 1.0]], vec![vec![2.0; 2]; 2], vec![0.0; 2], vec![5.0; 2]);
        let (sol, _) = solve_relaxed(&i, &[]).unwrap().unwrap();
        let q = build_sequencing_qubo(&i, &sol);
        assert_eq!(q.model.num_vars(), 0);
        assert!(check_schedule(&i, &sol, &BTreeMap::new()).is_empty());
    }

    #[test]
    fn hybrid_conflict_free_terminates_first_iteration() {
        let i = inst(vec![vec![1.0, 9.0], vec![9.0, 1.0]], vec![vec![2.0; 2]; 2], vec![0.0; 2], vec![5.0; 2]);
        let run = solve_jobshop_hybrid(&i, &BruteForce::default(), &JobShopLimits::default()).unwrap();
        assert_eq!(run.iterations, 1);
        assert!(matches!(run.outcome, JobShopOutcome::Scheduled { objective, .. } if objective == 2.0));
    }

    #[test]
    fn hybrid_adds_cut_when_cheapest_machine_is_overloaded() {
        // Both jobs prefer machine 0 but share a release date.
        let i = inst(vec![vec![1.0, 5.0], vec![1.0, 5.0]], vec![vec![3.0; 2]; 2], vec![0.0; 2], vec![3.0; 2]);
        let run = solve_jobshop_hybrid(&i, &BruteForce::default(), &JobShopLimits::default()).unwrap();
        assert_eq!(run.cuts, vec![IntegerCut { machine: 0, jobs: vec![0, 1] }]);
        assert!(matches!(run.outcome, JobShopOutcome::Scheduled { objective, .. } if objective == 6.0));
        let full = solve_milp(&build_full_milp(&i).model).unwrap();
        assert_eq!(full.objective, 6.0);
    }

    #[test]
    fn hybrid_reports_no_solution() {
        let i = inst(vec![vec![1.0]], vec![vec![5.0]], vec![0.0], vec![3.0]);
        let run = solve_jobshop_hybrid(&i, &BruteForce::default(), &JobShopLimits::default()).unwrap();
        assert_eq!(run.outcome, JobShopOutcome::NoSolution);
    }

    #[test]
    fn json_validation() {
        let i = inst(vec![vec![1.0]], vec![vec![5.0]], vec![0.0], vec![9.0]);
        assert_eq!(JobShopInstance::from_json(&i.to_json()).unwrap(), i);
        assert!(JobShopInstance::from_json(r#"{"jobs":1,"machines":1,"C":[[1]],"P":[[0]],"R":[0],"D":[1]}"#).is_err());
        assert!(JobShopInstance::from_json(r#"{"jobs":1,"machines":1,"C":[[1]],"P":[[1]],"R":[2],"D":[1]}"#).is_err());
    }
}
