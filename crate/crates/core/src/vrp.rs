//! Vehicle routing with a cost / working-time ratio objective, solved by a
//! parametric loop over a step-indexed routing QUBO.
//!
//! Variable `x[v][p][i]` says vehicle `v` is at vertex `i` on step `p`,
//! `p = 1..=|V|`. Every vehicle implicitly sits at the depot on step 0, so
//! arcs out of the depot are linear terms on step 1. A route ends when the
//! depot variable of the next step is set.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::partition::{solve_partitioned, PartitionError, PartitionParams};
use crate::qubo::{Assignment, QuboError, QuboModel};
use crate::sampler::{Sampler, SamplerConfig, SamplerError};
use crate::trace::{HybridTrace, TraceRow};

#[derive(Debug, Error)]
pub enum VrpError {
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("route plan has no working time")]
    Domain,
    #[error("delta must be positive")]
    Delta,
    #[error("no feasible routes returned at iteration {iteration}")]
    NoSolution { iteration: usize, trace: HybridTrace },
    #[error("no convergence after {iterations} iterations")]
    IterationLimit { iterations: usize, trace: HybridTrace },
    #[error(transparent)]
    Qubo(#[from] QuboError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VrpInstance {
    /// Vertex count including the depot at index 0.
    pub vertices: usize,
    pub vehicles: usize,
    #[serde(rename = "C")]
    pub cost: Vec<Vec<f64>>,
    #[serde(rename = "W")]
    pub time: Vec<Vec<f64>>,
}

impl VrpInstance {
    pub fn from_json(text: &str) -> Result<Self, VrpError> {
        let inst: VrpInstance = serde_json::from_str(text).map_err(|e| VrpError::Invalid(e.to_string()))?;
        inst.validate()?;
        Ok(inst)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    pub fn validate(&self) -> Result<(), VrpError> {
        let n = self.vertices;
        let bad = |s: String| Err(VrpError::Invalid(s));
        if n < 2 || self.vehicles == 0 {
            return bad("need a depot, one customer and one vehicle".into());
        }
        if n.saturating_mul(n).saturating_mul(self.vehicles) > 10_000_000 {
            return bad("instance too large".into());
        }
        for (name, t) in [("C", &self.cost), ("W", &self.time)] {
            if t.len() != n || t.iter().any(|r| r.len() != n) {
                return bad(format!("{name} must be {n}×{n}"));
            }
        }
        for i in 0..n {
            for j in 0..n {
                let (c, w) = (self.cost[i][j], self.time[i][j]);
                if !(c.is_finite() && c >= 0.0) {
                    return bad(format!("C[{i}][{j}] must be finite and non-negative"));
                }
                if !w.is_finite() || w < 0.0 || (i != j && w == 0.0) {
                    return bad(format!("W[{i}][{j}] must be finite and positive off the diagonal"));
                }
            }
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        self.vertices
    }

    pub fn num_vars(&self) -> usize {
        self.vehicles * self.steps() * self.vertices
    }

    /// Index of `x[v][p][i]`, `p` in `1..=steps`.
    pub fn var(&self, v: usize, p: usize, i: usize) -> usize {
        debug_assert!(p >= 1 && p <= self.steps());
        (v * self.steps() + p - 1) * self.vertices + i
    }

    /// Variables that are zero in every well-formed plan: the depot on
    /// step 1 and customers on the last step.
    pub fn structural_zeros(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for v in 0..self.vehicles {
            out.push(self.var(v, 1, 0));
            for i in 1..self.vertices {
                out.push(self.var(v, self.steps(), i));
            }
        }
        out.sort_unstable();
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoutePlan {
    /// Customer sequence per vehicle, depot excluded.
    pub routes: Vec<Vec<usize>>,
    pub cost: f64,
    pub time: f64,
}

impl RoutePlan {
    /// Builds a plan from customer sequences, counting the start and return
    /// arcs of every nonempty route.
    pub fn from_routes(inst: &VrpInstance, routes: Vec<Vec<usize>>) -> Self {
        let (mut cost, mut time) = (0.0, 0.0);
        for route in routes.iter().filter(|r| !r.is_empty()) {
            let mut prev = 0;
            for &i in route.iter().chain(std::iter::once(&0)) {
                cost += inst.cost[prev][i];
                time += inst.time[prev][i];
                prev = i;
            }
        }
        RoutePlan { routes, cost, time }
    }

    pub fn encode(&self, inst: &VrpInstance) -> Assignment {
        let mut a = Assignment::zeros(inst.num_vars());
        for (v, route) in self.routes.iter().enumerate() {
            if route.is_empty() {
                continue;
            }
            for (p, &i) in route.iter().enumerate() {
                a.set(inst.var(v, p + 1, i), true);
            }
            a.set(inst.var(v, route.len() + 1, 0), true);
        }
        a
    }
}

pub fn logistic_ratio(plan: &RoutePlan) -> Result<f64, VrpError> {
    if plan.time > 0.0 {
        Ok(plan.cost / plan.time)
    } else {
        Err(VrpError::Domain)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RouteViolation {
    /// Customer visited `count` times instead of once.
    Service { customer: usize, count: usize },
    /// Customers at `step` do not match the vertices at `step + 1`.
    Continuity { vehicle: usize, step: usize },
    /// More than one vertex on one step.
    Crowded { vehicle: usize, step: usize },
    /// Depot on step 1.
    EmptyStart { vehicle: usize },
}

pub fn decode_routes(inst: &VrpInstance, a: &Assignment) -> Result<RoutePlan, Vec<RouteViolation>> {
    assert_eq!(a.len(), inst.num_vars(), "assignment length");
    let (n, steps) = (inst.vertices, inst.steps());
    let mut violations = Vec::new();
    let mut count = vec![0usize; n];
    let mut routes = Vec::with_capacity(inst.vehicles);
    for v in 0..inst.vehicles {
        let at = |p: usize| -> Vec<usize> {
            if p > steps {
                return Vec::new();
            }
            (0..n).filter(|&i| a.get(inst.var(v, p, i))).collect()
        };
        if a.get(inst.var(v, 1, 0)) {
            violations.push(RouteViolation::EmptyStart { vehicle: v });
        }
        let mut route = Vec::new();
        let mut ended = false;
        for p in 1..=steps {
            let here = at(p);
            for &i in here.iter().filter(|&&i| i != 0) {
                count[i] += 1;
            }
            if here.len() > 1 {
                violations.push(RouteViolation::Crowded { vehicle: v, step: p });
            }
            let customers = here.iter().filter(|&&i| i != 0).count();
            if customers != at(p + 1).len() {
                violations.push(RouteViolation::Continuity { vehicle: v, step: p });
            }
            if !ended {
                match here.as_slice() {
                    [0] | [] => ended = true,
                    [i] => route.push(*i),
                    _ => {}
                }
            }
        }
        routes.push(route);
    }
    for (i, &c) in count.iter().enumerate().skip(1) {
        if c != 1 {
            violations.push(RouteViolation::Service { customer: i, count: c });
        }
    }
    if violations.is_empty() {
        Ok(RoutePlan::from_routes(inst, routes))
    } else {
        Err(violations)
    }
}

/// Arc part of the routing QUBO: `Σ (C − λW) x[v][p][i]·x[v][p+1][j]`, with
/// step-0 depot arcs folded into linear terms.
pub fn vrp_objective(inst: &VrpInstance, lambda: f64) -> QuboModel {
    let (n, steps) = (inst.vertices, inst.steps());
    let mut h = QuboModel::new(inst.num_vars());
    let w = |i: usize, j: usize| inst.cost[i][j] - lambda * inst.time[i][j];
    for v in 0..inst.vehicles {
        for j in 0..n {
            h.add_linear(inst.var(v, 1, j), w(0, j));
        }
        for p in 1..steps {
            for i in 0..n {
                for j in 0..n {
                    let c = w(i, j);
                    if c != 0.0 {
                        h.add_quadratic(inst.var(v, p, i), inst.var(v, p + 1, j), c);
                    }
                }
            }
        }
        for p in 1..=steps {
            for i in 0..n {
                h.set_label(inst.var(v, p, i), format!("x[{v},{p},{i}]"));
            }
        }
    }
    h
}

/// Unweighted constraint penalties. `RouteViolation` lists what each one rules out.
pub fn vrp_constraints(inst: &VrpInstance) -> QuboModel {
    let (n, steps) = (inst.vertices, inst.steps());
    let mut h = QuboModel::new(inst.num_vars());
    for i in 1..n {
        let group: Vec<usize> = (0..inst.vehicles)
            .flat_map(|v| (1..=steps).map(move |p| (v, p)))
            .map(|(v, p)| inst.var(v, p, i))
            .collect();
        h.add_exact_one_penalty(&group, 1.0).expect("indices in range");
    }
    for v in 0..inst.vehicles {
        for p in 1..=steps {
            // (Σ a − Σ b)² with a the customers at p and b everything at p+1.
            let mut terms: Vec<(usize, f64)> = (1..n).map(|i| (inst.var(v, p, i), 1.0)).collect();
            if p < steps {
                terms.extend((0..n).map(|i| (inst.var(v, p + 1, i), -1.0)));
            }
            for (x, &(a, ca)) in terms.iter().enumerate() {
                h.add_linear(a, ca * ca);
                for &(b, cb) in &terms[x + 1..] {
                    h.add_quadratic(a, b, 2.0 * ca * cb);
                }
            }
        }
        let first: Vec<usize> = (0..n).map(|i| inst.var(v, 1, i)).collect();
        h.add_at_most_one_penalty(&first, 1.0).expect("indices in range");
    }
    h
}

/// Full QUBO `H_obj + A·H_c`.
pub fn build_vrp_qubo(inst: &VrpInstance, lambda: f64, penalty: f64) -> QuboModel {
    let mut h = vrp_objective(inst, lambda);
    let mut c = vrp_constraints(inst);
    c.scale(penalty);
    h.add_model(&c).expect("same size");
    h
}

/// Penalty that keeps every violation above the objective's range.
pub fn safe_vrp_penalty(inst: &VrpInstance, lambda: f64) -> f64 {
    vrp_objective(inst, lambda).safe_penalty_weight()
}

#[derive(Clone, Debug, PartialEq)]
pub struct VrpLimits {
    pub delta: f64,
    pub max_iters: usize,
    /// Extra draws after an infeasible sample; 0 stops at the first one.
    pub resamples: usize,
    pub sampler: SamplerConfig,
    pub partition: PartitionParams,
}

impl Default for VrpLimits {
    fn default() -> Self {
        VrpLimits {
            delta: 1e-6,
            max_iters: 100,
            resamples: 3,
            sampler: SamplerConfig::default(),
            partition: PartitionParams::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VrpRun {
    pub plan: RoutePlan,
    pub lambda: f64,
    /// λ before the last update.
    pub obj: f64,
    pub iterations: usize,
    pub lambdas: Vec<f64>,
    pub trace: HybridTrace,
}

fn derived_seed(seed: u64, iteration: usize, attempt: usize) -> u64 {
    let mut z = seed ^ (iteration as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (attempt as u64) << 32;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn sample_once(
    inst: &VrpInstance,
    sub: &QuboModel,
    map: &[usize],
    backend: &dyn Sampler,
    cfg: &SamplerConfig,
    partition: &PartitionParams,
) -> Result<Assignment, VrpError> {
    let best = if sub.num_vars() == 0 {
        Assignment::zeros(0)
    } else if backend.capacity().is_some_and(|cap| sub.num_vars() > cap) {
        let params = PartitionParams {
            sampler: cfg.clone(),
            ..partition.clone()
        };
        solve_partitioned(sub, backend, &params)?.assignment
    } else {
        let set = backend.sample(sub, cfg, None)?;
        set.first()
            .map(|s| s.assignment.clone())
            .ok_or_else(|| SamplerError::Config("backend returned no samples".into()))?
    };
    let mut full = Assignment::zeros(inst.num_vars());
    for (k, &orig) in map.iter().enumerate() {
        full.set(orig, best.get(k));
    }
    Ok(full)
}

/// Parametric loop: minimize `Σ (C − λW)` over routes, then set λ to the
/// ratio of the routes found, until λ stops moving by more than δ.
pub fn solve_vrp_parametric(
    inst: &VrpInstance,
    backend: &dyn Sampler,
    limits: &VrpLimits,
) -> Result<VrpRun, VrpError> {
    inst.validate()?;
    if !(limits.delta > 0.0) {
        return Err(VrpError::Delta);
    }
    let fixed: BTreeMap<usize, bool> = inst.structural_zeros().into_iter().map(|i| (i, false)).collect();
    let mut lambda = 0.0;
    let mut obj = f64::INFINITY;
    let mut lambdas = Vec::new();
    let mut trace = HybridTrace::default();
    let mut iteration = 0;
    let mut plan = None;
    while (lambda - obj).abs() > limits.delta {
        iteration += 1;
        if iteration > limits.max_iters {
            return Err(VrpError::IterationLimit {
                iterations: limits.max_iters,
                trace,
            });
        }
        let classical = Instant::now();
        let penalty = safe_vrp_penalty(inst, lambda);
        let model = build_vrp_qubo(inst, lambda, penalty);
        let (sub, map) = model.clamp(&fixed)?;
        let mut row = TraceRow::new(iteration);
        row.lambda = Some(lambda);
        row.qubo_vars = Some(model.num_vars());
        row.classical_s = classical.elapsed().as_secs_f64();

        let mut decoded = None;
        let mut attempts = 0;
        for attempt in 0..=limits.resamples {
            attempts = attempt + 1;
            let cfg = if attempt == 0 {
                limits.sampler.clone()
            } else {
                SamplerConfig {
                    seed: derived_seed(limits.sampler.seed, iteration, attempt),
                    ..limits.sampler.clone()
                }
            };
            let backend_start = Instant::now();
            let a = sample_once(inst, &sub, &map, backend, &cfg, &limits.partition)?;
            row.backend_s += backend_start.elapsed().as_secs_f64();
            let check = Instant::now();
            let result = decode_routes(inst, &a);
            row.classical_s += check.elapsed().as_secs_f64();
            if let Ok(p) = result {
                row.best_energy = Some(model.energy(&a)?);
                decoded = Some(p);
                break;
            }
        }
        let Some(found) = decoded else {
            row.note = format!("infeasible after {attempts} draws");
            trace.push(row);
            return Err(VrpError::NoSolution { iteration, trace });
        };
        obj = lambda;
        lambda = logistic_ratio(&found)?;
        lambdas.push(lambda);
        row.objective = Some(lambda);
        if attempts > 1 {
            row.note = format!("{attempts} draws");
        }
        trace.push(row);
        plan = Some(found);
    }
    Ok(VrpRun {
        plan: plan.expect("loop runs at least once"),
        lambda,
        obj,
        iterations: iteration,
        lambdas,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{brute_force, BruteForce};

    fn uniform(n: usize, vehicles: usize, c: f64, w: f64) -> VrpInstance {
        let m = |x: f64| (0..n).map(|i| (0..n).map(|j| if i == j { 0.0 } else { x }).collect()).collect();
        VrpInstance {
            vertices: n,
            vehicles,
            cost: m(c),
            time: m(w),
        }
    }

    #[test]
    fn counts() {
        let inst = uniform(4, 2, 1.0, 1.0);
        assert_eq!(inst.num_vars(), 32);
        assert_eq!(build_vrp_qubo(&inst, 0.0, 10.0).num_vars(), 32);
        assert_eq!(inst.structural_zeros().len(), 8);
    }

    #[test]
    fn single_customer_ratio() {
        let inst = uniform(2, 1, 2.0, 4.0);
        let plan = RoutePlan::from_routes(&inst, vec![vec![1]]);
        assert_eq!(logistic_ratio(&plan).unwrap(), 0.5);
        assert_eq!(decode_routes(&inst, &plan.encode(&inst)).unwrap(), plan);
        let empty = RoutePlan::from_routes(&inst, vec![vec![]]);
        assert!(matches!(logistic_ratio(&empty), Err(VrpError::Domain)));
    }

    #[test]
    fn penalties_vanish_on_feasible_plans() {
        let mut inst = uniform(4, 2, 1.0, 1.0);
        inst.cost[0][2] = 5.0;
        inst.time[2][3] = 3.0;
        let lambda = 0.7;
        let plan = RoutePlan::from_routes(&inst, vec![vec![2, 3], vec![1]]);
        let a = plan.encode(&inst);
        assert_eq!(decode_routes(&inst, &a).unwrap(), plan);
        assert_eq!(vrp_constraints(&inst).energy(&a).unwrap(), 0.0);
        let h = build_vrp_qubo(&inst, lambda, 100.0);
        let expected = plan.cost - lambda * plan.time;
        assert!((h.energy(&a).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn violations_are_reported() {
        let inst = uniform(3, 1, 1.0, 1.0);
        let zeros = decode_routes(&inst, &Assignment::zeros(inst.num_vars())).unwrap_err();
        assert!(zeros.contains(&RouteViolation::Service { customer: 1, count: 0 }));
        let mut a = Assignment::zeros(inst.num_vars());
        a.set(inst.var(0, 1, 1), true);
        a.set(inst.var(0, 2, 2), true);
        let v = decode_routes(&inst, &a).unwrap_err();
        assert!(v.contains(&RouteViolation::Continuity { vehicle: 0, step: 2 }));
    }

    #[test]
    fn ground_state_is_feasible() {
        let mut inst = uniform(3, 2, 1.0, 2.0);
        inst.cost[1][2] = 0.1;
        let h = build_vrp_qubo(&inst, 0.3, safe_vrp_penalty(&inst, 0.3));
        let best = brute_force(&h).unwrap().first().unwrap().clone();
        assert!(decode_routes(&inst, &best.assignment).is_ok());
    }

    #[test]
    fn proportional_costs_converge_in_two_iterations() {
        let inst = uniform(3, 2, 3.0, 2.0);
        let run = solve_vrp_parametric(&inst, &BruteForce::default(), &VrpLimits::default()).unwrap();
        assert_eq!(run.iterations, 2);
        assert!((run.lambda - 1.5).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let inst = uniform(3, 1, 1.0, 1.0);
        assert_eq!(VrpInstance::from_json(&inst.to_json()).unwrap(), inst);
        let mut bad = inst.clone();
        bad.time[0][1] = 0.0;
        assert!(VrpInstance::from_json(&bad.to_json()).is_err());
    }
}
