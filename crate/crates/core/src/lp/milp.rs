//! Depth-first LP-based branch and bound.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::simplex::{solve_bounded, LpOptions, LpStatus};
use super::{LpError, MilpModel, Sense, INT_TOL};

#[derive(Clone, Debug, PartialEq)]
pub struct MilpOptions {
    pub node_limit: usize,
    pub lp: LpOptions,
}

impl Default for MilpOptions {
    fn default() -> Self {
        MilpOptions {
            node_limit: 1_000_000,
            lp: LpOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MilpResult {
    /// `Optimal`, `Infeasible` or `Unbounded`.
    pub status: LpStatus,
    pub objective: f64,
    pub values: Vec<f64>,
    pub nodes: usize,
}

#[derive(Debug, Error)]
pub enum MilpError {
    #[error(transparent)]
    Model(#[from] LpError),
    #[error("node limit reached after {nodes} nodes (incumbent objective {:?})", incumbent.as_ref().map(|i| i.0))]
    NodeLimit {
        nodes: usize,
        incumbent: Option<(f64, Vec<f64>)>,
    },
    #[error("LP relaxation ended with status {status:?} at node {nodes}")]
    Relaxation { status: LpStatus, nodes: usize },
}

pub fn solve_milp(m: &MilpModel) -> Result<MilpResult, MilpError> {
    solve_milp_with(m, &MilpOptions::default())
}

/// Branches on the most fractional integer variable (lowest index on ties),
/// explores the down branch first and prunes nodes whose relaxation cannot
/// beat the incumbent.
pub fn solve_milp_with(m: &MilpModel, opts: &MilpOptions) -> Result<MilpResult, MilpError> {
    m.validate()?;
    let lp = &m.lp;
    let n = lp.num_vars();
    let sign = if lp.sense() == Sense::Max { -1.0 } else { 1.0 };
    let mut root_lo = lp.lower().to_vec();
    let mut root_hi = lp.upper().to_vec();
    for j in (0..n).filter(|&j| m.is_integer(j)) {
        root_lo[j] = (root_lo[j] - INT_TOL).ceil();
        root_hi[j] = (root_hi[j] + INT_TOL).floor();
    }

    let mut stack = vec![(root_lo, root_hi)];
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut nodes = 0;
    while let Some((lo, hi)) = stack.pop() {
        if nodes >= opts.node_limit {
            return Err(MilpError::NodeLimit {
                nodes,
                incumbent: incumbent.map(|(v, x)| (sign * v, x)),
            });
        }
        nodes += 1;
        let r = solve_bounded(lp, &lo, &hi, &opts.lp);
        match r.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                return Ok(MilpResult {
                    status: LpStatus::Unbounded,
                    objective: sign * f64::NEG_INFINITY,
                    values: vec![f64::NAN; n],
                    nodes,
                })
            }
            status => return Err(MilpError::Relaxation { status, nodes }),
        }
        let value = sign * r.objective;
        if incumbent.as_ref().is_some_and(|(best, _)| value >= best - 1e-9) {
            continue;
        }
        let mut branch: Option<(usize, f64)> = None;
        for j in (0..n).filter(|&j| m.is_integer(j)) {
            let x = r.values[j];
            let frac = (x - x.floor()).min(x.ceil() - x);
            if frac > INT_TOL && branch.is_none_or(|(_, f)| frac > f) {
                branch = Some((j, frac));
            }
        }
        match branch {
            None => {
                let mut x = r.values;
                for j in (0..n).filter(|&j| m.is_integer(j)) {
                    x[j] = x[j].round();
                }
                let v = sign * lp.objective_value(&x);
                incumbent = Some((v, x));
            }
            Some((j, _)) => {
                let f = r.values[j].floor();
                let mut up_lo = lo.clone();
                up_lo[j] = f + 1.0;
                let mut down_hi = hi.clone();
                down_hi[j] = f;
                stack.push((up_lo, hi));
                stack.push((lo, down_hi));
            }
        }
    }
    Ok(match incumbent {
        Some((v, values)) => MilpResult {
            status: LpStatus::Optimal,
            objective: sign * v,
            values,
            nodes,
        },
        None => MilpResult {
            status: LpStatus::Infeasible,
            objective: f64::NAN,
            values: vec![f64::NAN; n],
            nodes,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{solve_lp, Relation};

    #[test]
    fn knapsack() {
        let mut m = MilpModel::new(Sense::Max);
        let a = m.add_binary("x0", 5.0);
        let b = m.add_binary("x1", 4.0);
        m.add_constraint(&[(a, 3.0), (b, 2.0)], Relation::Le, 4.0);
        let r = solve_milp(&m).unwrap();
        assert_eq!(r.status, LpStatus::Optimal);
        assert_eq!(r.objective, 5.0);
        assert_eq!(r.values, vec![1.0, 0.0]);
    }

    #[test]
    fn continuous_model_matches_lp() {
        let mut m = MilpModel::new(Sense::Min);
        let x = m.add_continuous("x", 0.0, 10.0, 1.0);
        let y = m.add_continuous("y", 0.0, 10.0, 3.0);
        m.add_constraint(&[(x, 1.0), (y, 2.0)], Relation::Ge, 7.0);
        m.add_constraint(&[(x, 1.0)], Relation::Le, 3.0);
        let r = solve_milp(&m).unwrap();
        let l = solve_lp(&m.lp);
        assert_eq!(r.nodes, 1);
        assert!((r.objective - l.objective).abs() < 1e-12);
    }

    #[test]
    fn integer_infeasible() {
        let mut m = MilpModel::new(Sense::Min);
        let x = m.add_integer("x", 0.0, 3.0, 1.0);
        m.add_constraint(&[(x, 2.0)], Relation::Eq, 3.0);
        assert_eq!(solve_milp(&m).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn node_limit_reports_incumbent() {
        let mut m = MilpModel::new(Sense::Max);
        let xs: Vec<usize> = (0..6).map(|i| m.add_binary(format!("x{i}"), 1.0 + i as f64 * 0.1)).collect();
        let terms: Vec<(usize, f64)> = xs.iter().map(|&j| (j, 2.0)).collect();
        m.add_constraint(&terms, Relation::Le, 5.0);
        let opts = MilpOptions {
            node_limit: 2,
            ..Default::default()
        };
        assert!(matches!(solve_milp_with(&m, &opts), Err(MilpError::NodeLimit { nodes: 2, .. })));
    }
}
