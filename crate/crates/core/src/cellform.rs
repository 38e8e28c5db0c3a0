//! Manufacturing cell formation. Each step prices the current machine cells
//! with a dual LP and lets a master QUBO propose the next ones.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{solve_lp, LpModel, LpStatus, Relation, Sense};
use crate::partition::{solve_partitioned, PartitionError, PartitionParams};
use crate::qubo::{Assignment, QuboError, QuboModel};
use crate::sampler::{Sampler, SamplerConfig, SamplerError};
use crate::trace::{HybridTrace, TraceRow};

#[derive(Debug, Error)]
pub enum CellformError {
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("dual LP infeasible at iteration {0}: the cell formation problem is unbounded")]
    Unbounded(usize),
    #[error("dual LP ended with status {0:?}")]
    Dual(LpStatus),
    #[error("master QUBO needs at least one cut")]
    EmptyHistory,
    #[error("no convergence after {iterations} iterations (upper bound {upper_bound})")]
    IterationLimit {
        iterations: usize,
        upper_bound: f64,
        incumbent: Box<CellSolution>,
        trace: HybridTrace,
    },
    #[error(transparent)]
    Qubo(#[from] QuboError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellFormationInstance {
    pub parts: usize,
    pub machines: usize,
    pub cells: usize,
    /// Inter-cell move cost per unit of part.
    pub c: Vec<f64>,
    /// Units per part.
    pub v: Vec<f64>,
    /// Underutilization cost, parts × machines.
    pub u: Vec<Vec<f64>>,
    /// Operation counts, parts × machines.
    pub o: Vec<Vec<f64>>,
    /// Requirement indicator in [0, 1], parts × machines.
    pub a: Vec<Vec<f64>>,
}

impl CellFormationInstance {
    pub fn from_json(text: &str) -> Result<Self, CellformError> {
        let inst: CellFormationInstance =
            serde_json::from_str(text).map_err(|e| CellformError::Invalid(e.to_string()))?;
        inst.validate()?;
        Ok(inst)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    pub fn validate(&self) -> Result<(), CellformError> {
        let (p, m) = (self.parts, self.machines);
        let bad = |s: String| Err(CellformError::Invalid(s));
        if self.cells == 0 {
            return bad("at least one cell is required".into());
        }
        if p.saturating_mul(m).saturating_mul(self.cells) > 10_000_000 {
            return bad("instance too large".into());
        }
        if self.c.len() != p || self.v.len() != p {
            return bad(format!("c and v need {p} entries"));
        }
        for (name, t) in [("u", &self.u), ("o", &self.o), ("a", &self.a)] {
            if t.len() != p || t.iter().any(|r| r.len() != m) {
                return bad(format!("{name} must be {p}×{m}"));
            }
        }
        let nonneg = |x: &f64| x.is_finite() && *x >= 0.0;
        if !self.c.iter().all(nonneg)
            || !self.v.iter().all(nonneg)
            || !self.u.iter().flatten().all(nonneg)
            || !self.o.iter().flatten().all(nonneg)
        {
            return bad("costs, units and counts must be finite and non-negative".into());
        }
        if !self.a.iter().flatten().all(|x| (0.0..=1.0).contains(x)) {
            return bad("a must lie in [0, 1]".into());
        }
        Ok(())
    }

    /// `(binary, continuous)` = `(|M|·|R|, |P|·|R|)`.
    pub fn variable_counts(&self) -> (usize, usize) {
        (self.machines * self.cells, self.parts * self.cells)
    }

    fn move_cost(&self, i: usize, j: usize) -> f64 {
        self.c[i] * self.v[i] * self.o[i][j] * self.a[i][j]
    }

    fn idle_cost(&self, i: usize, j: usize) -> f64 {
        self.u[i][j] * self.v[i] * (1.0 - self.a[i][j])
    }

    /// Cost of placing all of part `i` in cell `k` given machine cells.
    fn part_cost(&self, i: usize, k: usize, machine_cell: &[usize]) -> f64 {
        (0..self.machines)
            .map(|j| {
                if machine_cell[j] == k {
                    self.idle_cost(i, j)
                } else {
                    self.move_cost(i, j)
                }
            })
            .sum()
    }
}

/// Cost with fractional part weights `x` (parts × cells) and machine cells.
pub fn total_cost(inst: &CellFormationInstance, x: &[Vec<f64>], machine_cell: &[usize]) -> f64 {
    let mut total = 0.0;
    for i in 0..inst.parts {
        for k in 0..inst.cells {
            if x[i][k] != 0.0 {
                total += x[i][k] * inst.part_cost(i, k, machine_cell);
            }
        }
    }
    total
}

/// Each part goes wholly to its cheapest cell, lowest index on ties.
pub fn optimal_parts_given_cells(inst: &CellFormationInstance, machine_cell: &[usize]) -> Vec<Vec<f64>> {
    (0..inst.parts)
        .map(|i| {
            let mut best = 0;
            let mut best_cost = f64::INFINITY;
            for k in 0..inst.cells {
                let c = inst.part_cost(i, k, machine_cell);
                if c < best_cost {
                    best = k;
                    best_cost = c;
                }
            }
            let mut row = vec![0.0; inst.cells];
            row[best] = 1.0;
            row
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSolution {
    /// Part weights, parts × cells.
    pub x: Vec<Vec<f64>>,
    /// Cell of each machine.
    pub machine_cell: Vec<usize>,
    pub objective: f64,
}

impl CellSolution {
    pub fn for_cells(inst: &CellFormationInstance, machine_cell: Vec<usize>) -> Self {
        let x = optimal_parts_given_cells(inst, &machine_cell);
        let objective = total_cost(inst, &x, &machine_cell);
        CellSolution { x, machine_cell, objective }
    }

    /// One-hot `y` as a machines × cells matrix.
    pub fn y(&self, cells: usize) -> Vec<Vec<u8>> {
        self.machine_cell
            .iter()
            .map(|&k| (0..cells).map(|c| u8::from(c == k)).collect())
            .collect()
    }
}

/// Dual LP with its variable layout. `l`, `m`, `n` are indexed by
/// `(i·|M| + j)·|R| + k`.
#[derive(Clone, Debug)]
pub struct DualLp {
    pub model: LpModel,
    pub l: Vec<usize>,
    pub m: Vec<usize>,
    pub n: Vec<usize>,
    pub s: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DualSolution {
    pub l: Vec<f64>,
    pub m: Vec<f64>,
    pub n: Vec<f64>,
    pub s: Vec<f64>,
    pub objective: f64,
}

pub fn build_dual_lp(inst: &CellFormationInstance, machine_cell: &[usize]) -> DualLp {
    let (pn, mn, rn) = (inst.parts, inst.machines, inst.cells);
    let mut model = LpModel::new(Sense::Max);
    let size = pn * mn * rn;
    let (mut l, mut m, mut n) = (Vec::with_capacity(size), Vec::with_capacity(size), Vec::with_capacity(size));
    for i in 0..pn {
        for j in 0..mn {
            for k in 0..rn {
                let y = if machine_cell[j] == k { 1.0 } else { 0.0 };
                l.push(model.add_named_var(format!("l[{i},{j},{k}]"), 0.0, f64::INFINITY, 0.0));
                m.push(model.add_named_var(format!("m[{i},{j},{k}]"), 0.0, f64::INFINITY, -y));
                n.push(model.add_named_var(format!("n[{i},{j},{k}]"), 0.0, f64::INFINITY, y - 1.0));
            }
        }
    }
    let s: Vec<usize> = (0..pn)
        .map(|i| model.add_named_var(format!("s[{i}]"), f64::NEG_INFINITY, f64::INFINITY, 1.0))
        .collect();
    let idx = |i: usize, j: usize, k: usize| (i * mn + j) * rn + k;
    for i in 0..pn {
        let rhs: f64 = (0..mn).map(|j| inst.move_cost(i, j)).sum();
        for k in 0..rn {
            let mut terms = Vec::with_capacity(2 * mn + 1);
            for j in 0..mn {
                terms.push((l[idx(i, j, k)], 1.0));
                terms.push((n[idx(i, j, k)], -1.0));
            }
            terms.push((s[i], 1.0));
            model.add_constraint(&terms, Relation::Le, rhs);
        }
    }
    for i in 0..pn {
        for j in 0..mn {
            for k in 0..rn {
                let t = idx(i, j, k);
                model.add_constraint(
                    &[(n[t], 1.0), (l[t], -1.0), (m[t], -1.0)],
                    Relation::Le,
                    inst.idle_cost(i, j) - inst.move_cost(i, j),
                );
            }
        }
    }
    DualLp { model, l, m, n, s }
}

/// `Ok(None)` when the dual is infeasible.
pub fn solve_dual(inst: &CellFormationInstance, machine_cell: &[usize]) -> Result<Option<DualSolution>, CellformError> {
    let d = build_dual_lp(inst, machine_cell);
    let r = solve_lp(&d.model);
    match r.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Ok(None),
        other => return Err(CellformError::Dual(other)),
    }
    let pick = |ix: &[usize]| ix.iter().map(|&j| r.values[j]).collect::<Vec<_>>();
    Ok(Some(DualSolution {
        l: pick(&d.l),
        m: pick(&d.m),
        n: pick(&d.n),
        s: pick(&d.s),
        objective: r.objective,
    }))
}

/// Cut data from one dual solve: `Q[j·|R| + k]` and `F`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BendersCut {
    pub q: Vec<f64>,
    pub f: f64,
}

impl BendersCut {
    pub fn from_dual(inst: &CellFormationInstance, d: &DualSolution) -> Self {
        let (mn, rn) = (inst.machines, inst.cells);
        let mut q = vec![0.0; mn * rn];
        for i in 0..inst.parts {
            for j in 0..mn {
                for k in 0..rn {
                    let t = (i * mn + j) * rn + k;
                    q[j * rn + k] += d.m[t] - d.n[t];
                }
            }
        }
        let f = d.s.iter().sum::<f64>() - d.n.iter().sum::<f64>();
        BendersCut { q, f }
    }

    /// `F − Σ Q·y` at a one-hot `y`.
    pub fn value(&self, cells: usize, machine_cell: &[usize]) -> f64 {
        self.f
            - machine_cell
                .iter()
                .enumerate()
                .map(|(j, &k)| self.q[j * cells + k])
                .sum::<f64>()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BendersState {
    pub machines: usize,
    pub cells: usize,
    pub history: Vec<BendersCut>,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub a: f64,
    pub b: f64,
    /// Dual objective of the previous iteration.
    pub previous_dual: f64,
    pub current: Vec<usize>,
}

impl BendersState {
    pub fn iteration(&self) -> usize {
        self.history.len()
    }
}

/// `max_t (F_t − Σ Q_t·ŷ)`.
pub fn lower_bound_value(state: &BendersState, machine_cell: &[usize]) -> f64 {
    state
        .history
        .iter()
        .map(|c| c.value(state.cells, machine_cell))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Objective part of the master QUBO, without the one-cell-per-machine term.
pub fn master_objective(state: &BendersState) -> Result<QuboModel, CellformError> {
    if state.history.is_empty() {
        return Err(CellformError::EmptyHistory);
    }
    let nv = state.machines * state.cells;
    let mut h = QuboModel::new(nv);
    for cut in &state.history {
        let shift = cut.f - state.previous_dual;
        for a in 0..nv {
            h.add_linear(a, -(state.a * cut.q[a] + 2.0 * state.b * cut.q[a] * shift));
            if cut.q[a] == 0.0 {
                continue;
            }
            for b in 0..nv {
                let w = cut.q[a] * cut.q[b];
                if w != 0.0 {
                    h.add_quadratic(a, b, w);
                }
            }
        }
    }
    for j in 0..state.machines {
        for k in 0..state.cells {
            h.set_label(j * state.cells + k, format!("y[{j},{k}]"));
        }
    }
    Ok(h)
}

/// Master QUBO with the one-cell-per-machine term at the safe weight.
pub fn build_master_qubo(state: &BendersState) -> Result<QuboModel, CellformError> {
    let mut h = master_objective(state)?;
    let weight = h.safe_penalty_weight();
    for j in 0..state.machines {
        let group: Vec<usize> = (0..state.cells).map(|k| j * state.cells + k).collect();
        h.add_exact_one_penalty(&group, weight)?;
    }
    Ok(h)
}

/// Reads a one-hot `y`; machines with zero or several cells are moved to
/// the cell with the lowest linear coefficient. Returns the number repaired.
pub fn decode_cells(objective: &QuboModel, machines: usize, cells: usize, a: &Assignment) -> (Vec<usize>, usize) {
    let mut repaired = 0;
    let out = (0..machines)
        .map(|j| {
            let on: Vec<usize> = (0..cells).filter(|&k| a.get(j * cells + k)).collect();
            if on.len() == 1 {
                on[0]
            } else {
                repaired += 1;
                (0..cells)
                    .min_by(|&x, &y| {
                        objective
                            .linear(j * cells + x)
                            .total_cmp(&objective.linear(j * cells + y))
                    })
                    .expect("at least one cell")
            }
        })
        .collect();
    (out, repaired)
}

/// How `ŷ` is picked from the backend's samples.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleSelection {
    /// Lowest-energy sample.
    LowestEnergy,
    /// Returned sample with the lowest cut bound `max_t (F_t − Q_t·ŷ)`, ties
    /// to the lower energy. With a sample set covering every feasible `y`
    /// this makes the lower bound exact.
    #[default]
    LowestBound,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellLimits {
    pub max_iters: usize,
    pub tolerance: f64,
    pub a: f64,
    pub b: f64,
    pub selection: SampleSelection,
    pub sampler: SamplerConfig,
    pub partition: PartitionParams,
}

impl Default for CellLimits {
    fn default() -> Self {
        CellLimits {
            max_iters: 100,
            tolerance: 1e-6,
            a: 1.0,
            b: 1.0,
            selection: SampleSelection::default(),
            sampler: SamplerConfig::default(),
            partition: PartitionParams::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellRun {
    pub solution: CellSolution,
    pub iterations: usize,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub trace: HybridTrace,
}

/// Initial machine cells: machine `j` in cell `j mod |R|`.
pub fn initial_cells(inst: &CellFormationInstance) -> Vec<usize> {
    (0..inst.machines).map(|j| j % inst.cells).collect()
}

pub fn solve_cellform_hybrid(
    inst: &CellFormationInstance,
    backend: &dyn Sampler,
    limits: &CellLimits,
) -> Result<CellRun, CellformError> {
    inst.validate()?;
    let mut state = BendersState {
        machines: inst.machines,
        cells: inst.cells,
        history: Vec::new(),
        lower_bound: f64::NEG_INFINITY,
        upper_bound: f64::INFINITY,
        a: limits.a,
        b: limits.b,
        previous_dual: 0.0,
        current: initial_cells(inst),
    };
    let mut incumbent = state.current.clone();
    let mut trace = HybridTrace::default();
    for iteration in 1..=limits.max_iters {
        let classical = Instant::now();
        let dual = solve_dual(inst, &state.current)?.ok_or(CellformError::Unbounded(iteration))?;
        let mut row = TraceRow::new(iteration);
        let mut notes = Vec::new();
        if iteration == 1 {
            state.previous_dual = dual.objective;
            notes.push(format!("Z*0 = {}", dual.objective));
        }
        if dual.objective < state.upper_bound {
            state.upper_bound = dual.objective;
            incumbent = state.current.clone();
        }
        state.history.push(BendersCut::from_dual(inst, &dual));
        let objective = master_objective(&state)?;
        let master = build_master_qubo(&state)?;
        let mut classical_s = classical.elapsed().as_secs_f64();

        let backend_start = Instant::now();
        let samples: Vec<Assignment> = if backend.capacity().is_some_and(|cap| master.num_vars() > cap) {
            let params = PartitionParams {
                sampler: limits.sampler.clone(),
                ..limits.partition.clone()
            };
            vec![solve_partitioned(&master, backend, &params)?.assignment]
        } else {
            backend
                .sample(&master, &limits.sampler, None)?
                .iter()
                .map(|s| s.assignment.clone())
                .collect()
        };
        row.backend_s = backend_start.elapsed().as_secs_f64();
        row.best_energy = samples.first().map(|a| master.energy(a)).transpose()?;

        let pick = Instant::now();
        let (next, repaired) = match limits.selection {
            SampleSelection::LowestEnergy => decode_cells(&objective, inst.machines, inst.cells, &samples[0]),
            SampleSelection::LowestBound => samples
                .iter()
                .map(|a| decode_cells(&objective, inst.machines, inst.cells, a))
                .min_by(|x, y| lower_bound_value(&state, &x.0).total_cmp(&lower_bound_value(&state, &y.0)))
                .expect("backend returns at least one sample"),
        };
        if repaired > 0 {
            notes.push(format!("repaired {repaired} machines"));
        }
        let z_hat = lower_bound_value(&state, &next);
        state.lower_bound = state.lower_bound.max(z_hat);
        classical_s += pick.elapsed().as_secs_f64();

        row.objective = Some(dual.objective);
        row.lower_bound = Some(state.lower_bound);
        row.upper_bound = Some(state.upper_bound);
        row.qubo_vars = Some(master.num_vars());
        row.cuts_added = Some(1);
        row.classical_s = classical_s;
        row.note = notes.join("; ");
        trace.push(row);

        if state.lower_bound >= state.upper_bound - limits.tolerance {
            return Ok(CellRun {
                solution: CellSolution::for_cells(inst, incumbent),
                iterations: iteration,
                lower_bound: state.lower_bound,
                upper_bound: state.upper_bound,
                trace,
            });
        }
        state.previous_dual = dual.objective;
        state.current = next;
    }
    Err(CellformError::IterationLimit {
        iterations: limits.max_iters,
        upper_bound: state.upper_bound,
        incumbent: Box::new(CellSolution::for_cells(inst, incumbent)),
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{brute_force, BruteForce};

    fn single() -> CellFormationInstance {
        CellFormationInstance {
            parts: 1,
            machines: 1,
            cells: 2,
            c: vec![7.0],
            v: vec![1.0],
            u: vec![vec![0.0]],
            o: vec![vec![1.0]],
            a: vec![vec![1.0]],
        }
    }

    fn separable() -> CellFormationInstance {
        CellFormationInstance {
            parts: 2,
            machines: 2,
            cells: 2,
            c: vec![3.0, 2.0],
            v: vec![1.0, 2.0],
            u: vec![vec![0.0, 5.0], vec![5.0, 0.0]],
            o: vec![vec![2.0, 0.0], vec![0.0, 1.0]],
            a: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        }
    }

    #[test]
    fn total_cost_examples() {
        let inst = single();
        assert_eq!(total_cost(&inst, &[vec![1.0, 0.0]], &[1]), 7.0);
        assert_eq!(total_cost(&inst, &[vec![1.0, 0.0]], &[0]), 0.0);
        let x = optimal_parts_given_cells(&inst, &[1]);
        assert_eq!(x, vec![vec![0.0, 1.0]]);
        let sym = CellFormationInstance { c: vec![0.0], ..inst };
        assert_eq!(optimal_parts_given_cells(&sym, &[1]), vec![vec![1.0, 0.0]]);
    }

    #[test]
    fn dual_matches_primal() {
        let inst = separable();
        for cells in [[0, 0], [0, 1], [1, 0], [1, 1]] {
            let d = solve_dual(&inst, &cells).unwrap().unwrap();
            let primal = CellSolution::for_cells(&inst, cells.to_vec()).objective;
            assert!((d.objective - primal).abs() < 1e-6, "{cells:?}: {} vs {primal}", d.objective);
            let cut = BendersCut::from_dual(&inst, &d);
            assert!((cut.value(2, &cells) - d.objective).abs() < 1e-6);
        }
    }

    #[test]
    fn master_qubo_hand_example() {
        let state = BendersState {
            machines: 1,
            cells: 2,
            history: vec![BendersCut { q: vec![2.0, -1.0], f: 0.0 }],
            lower_bound: f64::NEG_INFINITY,
            upper_bound: f64::INFINITY,
            a: 1.0,
            b: 1.0,
            previous_dual: 0.0,
            current: vec![0],
        };
        let obj = master_objective(&state).unwrap();
        assert_eq!(obj.linear(0), -2.0 + 4.0);
        assert_eq!(obj.linear(1), 1.0 + 1.0);
        assert_eq!(obj.quadratic_coefficient(0, 1), -4.0);
        let h = build_master_qubo(&state).unwrap();
        let best = brute_force(&h).unwrap();
        assert_eq!(best.first().unwrap().assignment.to_u8(), vec![0, 1]);
        for s in best.iter().filter(|s| s.assignment.count_ones() == 1) {
            assert!((s.energy - obj.energy(&s.assignment).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_cuts_leave_only_feasible_ground_states() {
        let state = BendersState {
            machines: 2,
            cells: 3,
            history: vec![BendersCut { q: vec![0.0; 6], f: 0.0 }],
            lower_bound: 0.0,
            upper_bound: 0.0,
            a: 1.0,
            b: 1.0,
            previous_dual: 0.0,
            current: vec![0, 0],
        };
        let h = build_master_qubo(&state).unwrap();
        let set = brute_force(&h).unwrap();
        let ground: Vec<_> = set.iter().filter(|s| s.energy.abs() < 1e-12).collect();
        assert_eq!(ground.len(), 9);
        assert!(ground.iter().all(|s| s.assignment.count_ones() == 2));
    }

    #[test]
    fn lower_bound_takes_max() {
        let mut state = BendersState {
            machines: 1,
            cells: 1,
            history: vec![BendersCut { q: vec![0.0], f: 4.0 }],
            lower_bound: 0.0,
            upper_bound: 0.0,
            a: 1.0,
            b: 1.0,
            previous_dual: 0.0,
            current: vec![0],
        };
        assert_eq!(lower_bound_value(&state, &[0]), 4.0);
        state.history = vec![BendersCut { q: vec![1.0], f: 4.0 }, BendersCut { q: vec![-1.0], f: 6.0 }];
        assert_eq!(lower_bound_value(&state, &[0]), 7.0);
    }

    #[test]
    fn decode_repairs_bad_rows() {
        let mut obj = QuboModel::new(4);
        obj.add_linear(1, -3.0);
        obj.add_linear(2, -1.0);
        let a = Assignment::from(vec![false, false, true, true]);
        let (cells, repaired) = decode_cells(&obj, 2, 2, &a);
        assert_eq!((cells, repaired), (vec![1, 0], 2));
    }

    #[test]
    fn hybrid_separable_reaches_zero() {
        let run = solve_cellform_hybrid(&separable(), &BruteForce::default(), &CellLimits::default()).unwrap();
        assert!(run.solution.objective.abs() < 1e-9);
        assert!(run.lower_bound >= run.upper_bound - 1e-6);
    }

    #[test]
    fn counts_and_json() {
        let inst = separable();
        assert_eq!(inst.variable_counts(), (4, 4));
        assert_eq!(CellFormationInstance::from_json(&inst.to_json()).unwrap(), inst);
        let mut bad = inst.clone();
        bad.a[0][0] = 1.5;
        assert!(CellFormationInstance::from_json(&bad.to_json()).is_err());
    }
}
