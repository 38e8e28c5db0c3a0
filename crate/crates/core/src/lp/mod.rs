//! Linear and mixed-integer linear programs: model, JSON interchange,
//! dense two-phase simplex and depth-first branch and bound.

mod milp;
mod simplex;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use milp::{solve_milp, solve_milp_with, MilpError, MilpOptions, MilpResult};
pub use simplex::{solve_lp, solve_lp_with, LpOptions, LpResult, LpStatus};

/// Constraint feasibility tolerance used in post-solve checks.
pub const FEAS_TOL: f64 = 1e-7;
/// Distance from an integer below which a value counts as integral.
pub const INT_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("malformed model: {0}")]
    Format(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    #[default]
    #[serde(alias = "minimize")]
    Min,
    #[serde(alias = "maximize")]
    Max,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "=", alias = "==")]
    Eq,
}

impl Relation {
    pub fn holds(self, activity: f64, rhs: f64, tol: f64) -> bool {
        match self {
            Relation::Le => activity <= rhs + tol,
            Relation::Ge => activity >= rhs - tol,
            Relation::Eq => (activity - rhs).abs() <= tol,
        }
    }
}

/// A linear program. Constraint rows are stored back to back so that models
/// with millions of short rows stay cheap to build.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LpModel {
    sense: Sense,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    names: BTreeMap<usize, String>,
    row_start: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    relations: Vec<Relation>,
    rhs: Vec<f64>,
}

impl LpModel {
    pub fn new(sense: Sense) -> Self {
        LpModel {
            sense,
            row_start: vec![0],
            ..Default::default()
        }
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.rhs.len()
    }

    /// Adds a variable with bounds `[lower, upper]` (either may be infinite).
    pub fn add_var(&mut self, lower: f64, upper: f64, cost: f64) -> usize {
        self.lower.push(lower);
        self.upper.push(upper);
        self.cost.push(cost);
        self.cost.len() - 1
    }

    pub fn add_named_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, cost: f64) -> usize {
        let j = self.add_var(lower, upper, cost);
        self.names.insert(j, name.into());
        j
    }

    pub fn name(&self, j: usize) -> Option<&str> {
        self.names.get(&j).map(String::as_str)
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn cost(&self) -> &[f64] {
        &self.cost
    }

    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        self.lower[j] = lower;
        self.upper[j] = upper;
    }

    pub fn set_cost(&mut self, j: usize, cost: f64) {
        self.cost[j] = cost;
    }

    /// # Panics
    /// If a term references a variable that does not exist.
    pub fn add_constraint(&mut self, terms: &[(usize, f64)], relation: Relation, rhs: f64) -> usize {
        for &(j, a) in terms {
            assert!(j < self.num_vars(), "constraint references variable {j}");
            self.cols.push(j as u32);
            self.vals.push(a);
        }
        self.row_start.push(self.cols.len());
        self.relations.push(relation);
        self.rhs.push(rhs);
        self.rhs.len() - 1
    }

    /// Terms of row `r` as `(column, coefficient)` pairs.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_start[r]..self.row_start[r + 1];
        self.cols[span.clone()]
            .iter()
            .zip(&self.vals[span])
            .map(|(&j, &a)| (j as usize, a))
    }

    pub fn relation(&self, r: usize) -> Relation {
        self.relations[r]
    }

    pub fn rhs(&self, r: usize) -> f64 {
        self.rhs[r]
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.cost.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    pub fn activity(&self, r: usize, x: &[f64]) -> f64 {
        self.row(r).map(|(j, a)| a * x[j]).sum()
    }

    /// Largest scaled violation of any bound or constraint at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.max_violation_within(x, &self.lower, &self.upper)
    }

    pub(crate) fn max_violation_within(&self, x: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..self.num_vars() {
            worst = worst.max(lower[j] - x[j]).max(x[j] - upper[j]);
        }
        for r in 0..self.num_constraints() {
            let mut act = 0.0;
            let mut scale = 1.0f64.max(self.rhs[r].abs());
            for (j, a) in self.row(r) {
                act += a * x[j];
                scale = scale.max((a * x[j]).abs());
            }
            let v = match self.relations[r] {
                Relation::Le => act - self.rhs[r],
                Relation::Ge => self.rhs[r] - act,
                Relation::Eq => (act - self.rhs[r]).abs(),
            };
            worst = worst.max(v / scale);
        }
        worst
    }

    pub fn validate(&self) -> Result<(), LpError> {
        for j in 0..self.num_vars() {
            if self.lower[j].is_nan() || self.upper[j].is_nan() || !self.cost[j].is_finite() {
                return Err(LpError::Format(format!("variable {j} has a non-finite cost or NaN bound")));
            }
            if self.lower[j] == f64::INFINITY || self.upper[j] == f64::NEG_INFINITY {
                return Err(LpError::Format(format!("variable {j} has an unsatisfiable infinite bound")));
            }
        }
        if self.vals.iter().any(|a| !a.is_finite()) || self.rhs.iter().any(|b| !b.is_finite()) {
            return Err(LpError::Format("non-finite constraint coefficient".into()));
        }
        Ok(())
    }
}

/// An [`LpModel`] with integrality marks.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MilpModel {
    pub lp: LpModel,
    integer: Vec<bool>,
}

impl MilpModel {
    pub fn new(sense: Sense) -> Self {
        MilpModel {
            lp: LpModel::new(sense),
            integer: Vec::new(),
        }
    }

    pub fn from_lp(lp: LpModel) -> Self {
        let integer = vec![false; lp.num_vars()];
        MilpModel { lp, integer }
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64, cost: f64) -> usize {
        self.integer.resize(self.lp.num_vars(), false);
        self.integer.push(false);
        self.lp.add_named_var(name, lower, upper, cost)
    }

    pub fn add_binary(&mut self, name: impl Into<String>, cost: f64) -> usize {
        self.integer.resize(self.lp.num_vars(), false);
        self.integer.push(true);
        self.lp.add_named_var(name, 0.0, 1.0, cost)
    }

    pub fn add_integer(&mut self, name: impl Into<String>, lower: f64, upper: f64, cost: f64) -> usize {
        self.integer.resize(self.lp.num_vars(), false);
        self.integer.push(true);
        self.lp.add_named_var(name, lower, upper, cost)
    }

    pub fn add_constraint(&mut self, terms: &[(usize, f64)], relation: Relation, rhs: f64) -> usize {
        self.lp.add_constraint(terms, relation, rhs)
    }

    /// Variables added through `lp` directly count as continuous.
    pub fn is_integer(&self, j: usize) -> bool {
        self.integer.get(j).copied().unwrap_or(false)
    }

    pub fn set_integer(&mut self, j: usize, integral: bool) {
        assert!(j < self.lp.num_vars(), "no variable {j}");
        self.integer.resize(self.lp.num_vars(), false);
        self.integer[j] = integral;
    }

    pub fn num_integer(&self) -> usize {
        self.integer.iter().filter(|&&b| b).count()
    }

    pub fn num_continuous(&self) -> usize {
        self.lp.num_vars() - self.num_integer()
    }

    /// Integer variables with bounds `[0, 1]`.
    pub fn num_binary(&self) -> usize {
        (0..self.integer.len())
            .filter(|&j| self.integer[j] && self.lp.lower[j] == 0.0 && self.lp.upper[j] == 1.0)
            .count()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        self.lp.validate()?;
        for j in 0..self.integer.len() {
            if self.integer[j] && j < self.lp.num_vars() && !(self.lp.lower[j].is_finite() && self.lp.upper[j].is_finite()) {
                return Err(LpError::Format(format!("integer variable {j} must have finite bounds")));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&LinearDocument::from(self)).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, LpError> {
        let doc: LinearDocument =
            serde_json::from_str(text).map_err(|e| LpError::Format(e.to_string()))?;
        MilpModel::try_from(doc)
    }
}

/// JSON interchange form. A missing `lower` means 0; `null` bounds are infinite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearDocument {
    #[serde(default)]
    pub sense: Sense,
    pub variables: Vec<VariableDocument>,
    #[serde(default)]
    pub constraints: Vec<ConstraintDocument>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default = "zero_lower")]
    pub lower: Option<f64>,
    #[serde(default)]
    pub upper: Option<f64>,
    #[serde(default)]
    pub objective: f64,
    #[serde(default)]
    pub integer: bool,
}

fn zero_lower() -> Option<f64> {
    Some(0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintDocument {
    pub terms: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl From<&MilpModel> for LinearDocument {
    fn from(m: &MilpModel) -> Self {
        let lp = &m.lp;
        let finite = |v: f64| v.is_finite().then_some(v);
        LinearDocument {
            sense: lp.sense,
            variables: (0..lp.num_vars())
                .map(|j| VariableDocument {
                    name: lp.names.get(&j).cloned(),
                    lower: finite(lp.lower[j]),
                    upper: finite(lp.upper[j]),
                    objective: lp.cost[j],
                    integer: m.is_integer(j),
                })
                .collect(),
            constraints: (0..lp.num_constraints())
                .map(|r| ConstraintDocument {
                    terms: lp.row(r).collect(),
                    relation: lp.relations[r],
                    rhs: lp.rhs[r],
                })
                .collect(),
        }
    }
}

impl TryFrom<LinearDocument> for MilpModel {
    type Error = LpError;

    fn try_from(doc: LinearDocument) -> Result<Self, LpError> {
        let mut m = MilpModel::new(doc.sense);
        for (j, v) in doc.variables.into_iter().enumerate() {
            let lower = v.lower.unwrap_or(f64::NEG_INFINITY);
            let upper = v.upper.unwrap_or(f64::INFINITY);
            m.lp.add_var(lower, upper, v.objective);
            if let Some(name) = v.name {
                m.lp.names.insert(j, name);
            }
            m.integer.push(v.integer);
        }
        for (r, c) in doc.constraints.into_iter().enumerate() {
            if let Some(&(j, _)) = c.terms.iter().find(|(j, _)| *j >= m.lp.num_vars()) {
                return Err(LpError::Format(format!("constraint {r} references variable {j}")));
            }
            m.lp.add_constraint(&c.terms, c.relation, c.rhs);
        }
        m.validate()?;
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_keeps_infinite_bounds() {
        let mut m = MilpModel::new(Sense::Max);
        let s = m.add_continuous("s", f64::NEG_INFINITY, f64::INFINITY, 1.0);
        let x = m.add_binary("x", 2.0);
        m.add_constraint(&[(s, 1.0), (x, 3.0)], Relation::Le, 4.0);
        let back = MilpModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.num_binary(), 1);
        assert_eq!(back.num_continuous(), 1);
    }

    #[test]
    fn json_defaults_and_errors() {
        let m = MilpModel::from_json(r#"{"variables":[{"objective":1}],"constraints":[]}"#).unwrap();
        assert_eq!(m.lp.lower(), &[0.0]);
        assert_eq!(m.lp.upper(), &[f64::INFINITY]);
        assert!(MilpModel::from_json(
            r#"{"variables":[{}],"constraints":[{"terms":[[3,1.0]],"relation":"<=","rhs":1}]}"#
        )
        .is_err());
        assert!(MilpModel::from_json(r#"{"variables":[{"upper":null,"integer":true}]}"#).is_err());
        assert!(MilpModel::from_json(r#"{"variables":[{"bogus":1}]}"#).is_err());
    }

    #[test]
    fn violation_measure() {
        let mut lp = LpModel::new(Sense::Min);
        let x = lp.add_var(0.0, 1.0, 0.0);
        lp.add_constraint(&[(x, 1.0)], Relation::Ge, 0.5);
        assert_eq!(lp.max_violation(&[0.75]), 0.0);
        assert!(lp.max_violation(&[0.25]) > 0.2);
        assert!(lp.max_violation(&[1.5]) > 0.4);
    }
}
