//! Dense two-phase primal simplex on a full tableau with Bland's rule.

use serde::{Deserialize, Serialize};

use super::{LpModel, Relation, Sense, FEAS_TOL};

/// Pivot and reduced-cost threshold.
const EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
    IterationLimit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpOptions {
    pub max_iterations: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions {
            max_iterations: 50_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpResult {
    pub status: LpStatus,
    /// Objective in the model's own sense; meaningful only when optimal.
    pub objective: f64,
    pub values: Vec<f64>,
    pub iterations: usize,
    /// Phase-one optimum when the model is infeasible.
    pub infeasibility: Option<f64>,
}

impl LpResult {
    fn status_only(status: LpStatus, n: usize, iterations: usize) -> Self {
        LpResult {
            status,
            objective: f64::NAN,
            values: vec![f64::NAN; n],
            iterations,
            infeasibility: None,
        }
    }

    fn infeasible(n: usize, iterations: usize, certificate: f64) -> Self {
        LpResult {
            infeasibility: Some(certificate),
            ..Self::status_only(LpStatus::Infeasible, n, iterations)
        }
    }
}

pub fn solve_lp(lp: &LpModel) -> LpResult {
    solve_lp_with(lp, &LpOptions::default())
}

pub fn solve_lp_with(lp: &LpModel, opts: &LpOptions) -> LpResult {
    solve_bounded(lp, &lp.lower, &lp.upper, opts)
}

/// How an original variable is expressed through nonnegative columns.
#[derive(Clone, Copy)]
enum Map {
    Fixed(f64),
    Shift { col: usize, base: f64 },
    Mirror { col: usize, base: f64 },
    Split { pos: usize, neg: usize },
}

/// Solves `lp` with its variable bounds replaced by `lower`/`upper`.
pub(crate) fn solve_bounded(lp: &LpModel, lower: &[f64], upper: &[f64], opts: &LpOptions) -> LpResult {
    let n = lp.num_vars();
    let sign = if lp.sense == Sense::Max { -1.0 } else { 1.0 };

    let mut maps = Vec::with_capacity(n);
    let mut cost_z = Vec::new();
    let mut bound_rows = Vec::new();
    for j in 0..n {
        let (l, u, c) = (lower[j], upper[j], sign * lp.cost[j]);
        if l > u + FEAS_TOL {
            return LpResult::infeasible(n, 0, l - u);
        }
        let map = if l.is_finite() && u.is_finite() && u - l <= 0.0 {
            Map::Fixed(l)
        } else if l.is_finite() {
            cost_z.push(c);
            if u.is_finite() {
                bound_rows.push((cost_z.len() - 1, u - l));
            }
            Map::Shift { col: cost_z.len() - 1, base: l }
        } else if u.is_finite() {
            cost_z.push(-c);
            Map::Mirror { col: cost_z.len() - 1, base: u }
        } else {
            cost_z.push(c);
            cost_z.push(-c);
            Map::Split { pos: cost_z.len() - 2, neg: cost_z.len() - 1 }
        };
        maps.push(map);
    }
    let nz = cost_z.len();

    // Rows in z-space with nonnegative right-hand sides.
    let mut rows: Vec<(Vec<f64>, Relation, f64)> = Vec::new();
    for r in 0..lp.num_constraints() {
        let mut coef = vec![0.0; nz];
        let mut rhs = lp.rhs[r];
        for (j, a) in lp.row(r) {
            match maps[j] {
                Map::Fixed(v) => rhs -= a * v,
                Map::Shift { col, base } => {
                    coef[col] += a;
                    rhs -= a * base;
                }
                Map::Mirror { col, base } => {
                    coef[col] -= a;
                    rhs -= a * base;
                }
                Map::Split { pos, neg } => {
                    coef[pos] += a;
                    coef[neg] -= a;
                }
            }
        }
        let rel = lp.relations[r];
        if coef.iter().all(|&a| a == 0.0) {
            let scale = 1.0 + lp.rhs[r].abs();
            if !rel.holds(0.0, rhs, FEAS_TOL * scale) {
                return LpResult::infeasible(n, 0, rhs.abs());
            }
            continue;
        }
        rows.push((coef, rel, rhs));
    }
    for (col, width) in bound_rows {
        let mut coef = vec![0.0; nz];
        coef[col] = 1.0;
        rows.push((coef, Relation::Le, width));
    }
    for (coef, rel, rhs) in rows.iter_mut() {
        if *rhs < 0.0 {
            coef.iter_mut().for_each(|a| *a = -*a);
            *rhs = -*rhs;
            *rel = match *rel {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
    }

    let m = rows.len();
    let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let n_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
    let first_art = nz + n_slack;
    let ncols = first_art + n_art;
    let mut t = Tableau::new(m, ncols);
    let mut next_slack = nz;
    let mut next_art = first_art;
    let mut b_scale = 0.0f64;
    for (i, (coef, rel, rhs)) in rows.iter().enumerate() {
        t.row_mut(i)[..nz].copy_from_slice(coef);
        *t.rhs_mut(i) = *rhs;
        b_scale = b_scale.max(rhs.abs());
        match rel {
            Relation::Le => {
                t.row_mut(i)[next_slack] = 1.0;
                t.basis[i] = next_slack;
                next_slack += 1;
            }
            Relation::Ge => {
                t.row_mut(i)[next_slack] = -1.0;
                next_slack += 1;
                t.row_mut(i)[next_art] = 1.0;
                t.basis[i] = next_art;
                next_art += 1;
            }
            Relation::Eq => {
                t.row_mut(i)[next_art] = 1.0;
                t.basis[i] = next_art;
                next_art += 1;
            }
        }
    }
    drop(rows);

    let mut iterations = 0;
    if n_art > 0 {
        let phase1: Vec<f64> = (0..ncols).map(|j| if j >= first_art { 1.0 } else { 0.0 }).collect();
        t.price(&phase1);
        match t.run(ncols, opts.max_iterations, &mut iterations) {
            Outcome::Optimal => {}
            Outcome::Unbounded => return LpResult::status_only(LpStatus::NumericalFailure, n, iterations),
            Outcome::IterationLimit => return LpResult::status_only(LpStatus::IterationLimit, n, iterations),
        }
        let w = -t.obj_rhs();
        if w > FEAS_TOL * (1.0 + b_scale) {
            return LpResult::infeasible(n, iterations, w);
        }
        t.expel_artificials(first_art);
    }

    let mut phase2 = vec![0.0; ncols];
    phase2[..nz].copy_from_slice(&cost_z);
    t.price(&phase2);
    match t.run(first_art, opts.max_iterations, &mut iterations) {
        Outcome::Optimal => {}
        Outcome::Unbounded => return LpResult::status_only(LpStatus::Unbounded, n, iterations),
        Outcome::IterationLimit => return LpResult::status_only(LpStatus::IterationLimit, n, iterations),
    }

    let mut z = vec![0.0; ncols];
    for i in 0..t.m {
        z[t.basis[i]] = t.rhs(i).max(0.0);
    }
    let values: Vec<f64> = maps
        .iter()
        .map(|map| match *map {
            Map::Fixed(v) => v,
            Map::Shift { col, base } => base + z[col],
            Map::Mirror { col, base } => base - z[col],
            Map::Split { pos, neg } => z[pos] - z[neg],
        })
        .collect();

    if !(lp.max_violation_within(&values, lower, upper) <= FEAS_TOL) {
        return LpResult::status_only(LpStatus::NumericalFailure, n, iterations);
    }
    LpResult {
        status: LpStatus::Optimal,
        objective: lp.objective_value(&values),
        values,
        iterations,
        infeasibility: None,
    }
}

enum Outcome {
    Optimal,
    Unbounded,
    IterationLimit,
}

struct Tableau {
    m: usize,
    width: usize,
    /// `m` constraint rows followed by the reduced-cost row; last column is the rhs.
    data: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn new(m: usize, ncols: usize) -> Self {
        let width = ncols + 1;
        Tableau {
            m,
            width,
            data: vec![0.0; (m + 1) * width],
            basis: vec![usize::MAX; m],
        }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.width..(i + 1) * self.width]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.data[i * self.width + self.width - 1]
    }

    fn rhs_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.data[i * self.width + self.width - 1]
    }

    fn obj_rhs(&self) -> f64 {
        self.rhs(self.m)
    }

    /// Reduced costs `c − c_B·T` and `−c_B·b` into the objective row.
    fn price(&mut self, costs: &[f64]) {
        let (m, w) = (self.m, self.width);
        let mut obj = vec![0.0; w];
        obj[..costs.len()].copy_from_slice(costs);
        for i in 0..m {
            let cb = costs[self.basis[i]];
            if cb != 0.0 {
                for (o, a) in obj.iter_mut().zip(&self.data[i * w..(i + 1) * w]) {
                    *o -= cb * a;
                }
            }
        }
        self.data[m * w..].copy_from_slice(&obj);
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width;
        let p = self.data[r * w + c];
        let (before, rest) = self.data.split_at_mut(r * w);
        let (prow, after) = rest.split_at_mut(w);
        prow.iter_mut().for_each(|a| *a /= p);
        prow[c] = 1.0;
        for row in before.chunks_exact_mut(w).chain(after.chunks_exact_mut(w)) {
            let f = row[c];
            if f != 0.0 {
                for (a, b) in row.iter_mut().zip(prow.iter()) {
                    *a -= f * b;
                }
                row[c] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    /// Bland's rule over columns `0..allowed`.
    fn run(&mut self, allowed: usize, max_iterations: usize, iterations: &mut usize) -> Outcome {
        loop {
            let obj = self.row(self.m);
            let Some(c) = (0..allowed).find(|&j| obj[j] < -EPS) else {
                return Outcome::Optimal;
            };
            if *iterations >= max_iterations {
                return Outcome::IterationLimit;
            }
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let a = self.data[i * self.width + c];
                if a > EPS {
                    let ratio = self.rhs(i) / a;
                    let better = match leave {
                        None => true,
                        Some((r, best)) => {
                            ratio < best - 1e-12 || (ratio <= best + 1e-12 && self.basis[i] < self.basis[r])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, _)) = leave else {
                return Outcome::Unbounded;
            };
            self.pivot(r, c);
            *iterations += 1;
        }
    }

    /// Pivots basic artificials out where possible and drops rows that
    /// turn out to be linearly dependent.
    fn expel_artificials(&mut self, first_art: usize) {
        let mut redundant = Vec::new();
        for i in 0..self.m {
            if self.basis[i] < first_art {
                continue;
            }
            let row = self.row(i);
            let mut best: Option<(usize, f64)> = None;
            for (j, &a) in row[..first_art].iter().enumerate() {
                if a.abs() > 1e-7 && best.is_none_or(|(_, b)| a.abs() > b) {
                    best = Some((j, a.abs()));
                }
            }
            match best {
                Some((j, _)) => self.pivot(i, j),
                None => redundant.push(i),
            }
        }
        if redundant.is_empty() {
            return;
        }
        let w = self.width;
        let keep: Vec<usize> = (0..=self.m).filter(|i| !redundant.contains(i)).collect();
        let mut data = Vec::with_capacity(keep.len() * w);
        let mut basis = Vec::with_capacity(keep.len());
        for &i in &keep {
            data.extend_from_slice(&self.data[i * w..(i + 1) * w]);
            if i < self.m {
                basis.push(self.basis[i]);
            }
        }
        self.m = basis.len();
        self.data = data;
        self.basis = basis;
        debug_assert_eq!(self.data.len(), (self.m + 1) * self.width);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn max_single_bound() {
        let mut lp = LpModel::new(Sense::Max);
        let x = lp.add_var(0.0, f64::INFINITY, 1.0);
        lp.add_constraint(&[(x, 1.0)], Relation::Le, 3.0);
        let r = solve_lp(&lp);
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.objective - 3.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_reports_certificate() {
        let mut lp = LpModel::new(Sense::Min);
        let x = lp.add_var(0.0, f64::INFINITY, 0.0);
        lp.add_constraint(&[(x, 1.0)], Relation::Le, -1.0);
        let r = solve_lp(&lp);
        assert_eq!(r.status, LpStatus::Infeasible);
        assert!(r.infeasibility.unwrap() > 0.5);
    }

    #[test]
    fn unbounded_detected() {
        let mut lp = LpModel::new(Sense::Max);
        let x = lp.add_var(0.0, f64::INFINITY, 1.0);
        let y = lp.add_var(0.0, f64::INFINITY, 0.0);
        lp.add_constraint(&[(x, 1.0), (y, -1.0)], Relation::Le, 1.0);
        assert_eq!(solve_lp(&lp).status, LpStatus::Unbounded);
    }

    #[test]
    fn free_and_mirrored_variables() {
        // min s − t with s free, t ≤ 2, s ≥ −5, s + t = 0
        let mut lp = LpModel::new(Sense::Min);
        let s = lp.add_var(f64::NEG_INFINITY, f64::INFINITY, 1.0);
        let t = lp.add_var(f64::NEG_INFINITY, 2.0, -1.0);
        lp.add_constraint(&[(s, 1.0)], Relation::Ge, -5.0);
        lp.add_constraint(&[(s, 1.0), (t, 1.0)], Relation::Eq, 0.0);
        let r = solve_lp(&lp);
        assert_eq!(r.status, LpStatus::Optimal);
        // s = −2 is forced by t ≤ 2 and s = −t; objective −4.
        assert!((r.objective + 4.0).abs() < 1e-9, "{r:?}");
    }

    #[test]
    fn redundant_equalities_are_dropped() {
        let mut lp = LpModel::new(Sense::Min);
        let x = lp.add_var(0.0, f64::INFINITY, 1.0);
        let y = lp.add_var(0.0, f64::INFINITY, 2.0);
        lp.add_constraint(&[(x, 1.0), (y, 1.0)], Relation::Eq, 2.0);
        lp.add_constraint(&[(x, 2.0), (y, 2.0)], Relation::Eq, 4.0);
        let r = solve_lp(&lp);
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.objective - 2.0).abs() < 1e-9);
    }

    #[test]
    fn fixed_variables_are_substituted() {
        let mut lp = LpModel::new(Sense::Min);
        let x = lp.add_var(1.5, 1.5, 2.0);
        let y = lp.add_var(0.0, 10.0, 1.0);
        lp.add_constraint(&[(x, 1.0), (y, 1.0)], Relation::Ge, 4.0);
        let r = solve_lp(&lp);
        assert!((r.objective - 5.5).abs() < 1e-9);
        assert_eq!(r.values[0], 1.5);
    }

    #[test]
    fn empty_row_violation_is_infeasible() {
        let mut lp = LpModel::new(Sense::Min);
        let x = lp.add_var(2.0, 2.0, 0.0);
        lp.add_constraint(&[(x, 1.0)], Relation::Le, 1.0);
        assert_eq!(solve_lp(&lp).status, LpStatus::Infeasible);
    }

    #[test]
    fn iteration_cap_is_reported() {
        let mut lp = LpModel::new(Sense::Max);
        let x = lp.add_var(0.0, 4.0, 1.0);
        let y = lp.add_var(0.0, 4.0, 1.0);
        lp.add_constraint(&[(x, 1.0), (y, 1.0)], Relation::Le, 5.0);
        let r = solve_lp_with(&lp, &LpOptions { max_iterations: 1 });
        assert_eq!(r.status, LpStatus::IterationLimit);
    }
}
