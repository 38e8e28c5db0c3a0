//! Quadratic unconstrained binary objectives.
//!
//! A [`QuboModel`] stores an objective `offset + Σ lᵢ xᵢ + Σ_{i<j} qᵢⱼ xᵢ xⱼ` over
//! binary variables. Diagonal quadratic contributions are folded into the
//! linear part on insertion since `x² = x` for binary `x`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Upper bound on the variable count accepted from external input.
pub const MAX_VARS: usize = 1 << 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuboError {
    #[error("assignment has {got} values but the model has {expected} variables")]
    Dimension { expected: usize, got: usize },
    #[error("variable index {index} out of range for {num_vars} variables")]
    Index { index: usize, num_vars: usize },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("malformed QUBO document: {0}")]
    Format(String),
}

/// A bit vector evaluated against a [`QuboModel`].
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Assignment(Vec<bool>);

impl Assignment {
    pub fn zeros(n: usize) -> Self {
        Assignment(vec![false; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn set(&mut self, i: usize, value: bool) {
        self.0[i] = value;
    }

    pub fn flip(&mut self, i: usize) {
        self.0[i] = !self.0[i];
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    /// Bits as 0/1 bytes.
    pub fn to_u8(&self) -> Vec<u8> {
        self.0.iter().map(|&b| b as u8).collect()
    }

    pub fn into_inner(self) -> Vec<bool> {
        self.0
    }
}

impl From<Vec<bool>> for Assignment {
    fn from(bits: Vec<bool>) -> Self {
        Assignment(bits)
    }
}

impl From<&[u8]> for Assignment {
    fn from(bits: &[u8]) -> Self {
        Assignment(bits.iter().map(|&b| b != 0).collect())
    }
}

impl Serialize for Assignment {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_u8().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Assignment {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = Vec::<u8>::deserialize(d)?;
        if let Some(bad) = raw.iter().find(|&&b| b > 1) {
            return Err(serde::de::Error::custom(format!("bit value {bad} is not 0 or 1")));
        }
        Ok(Assignment::from(raw.as_slice()))
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct QuboModel {
    num_vars: usize,
    linear: Vec<f64>,
    quadratic: BTreeMap<(usize, usize), f64>,
    offset: f64,
    labels: BTreeMap<usize, String>,
}

impl QuboModel {
    pub fn new(num_vars: usize) -> Self {
        QuboModel {
            num_vars,
            linear: vec![0.0; num_vars],
            ..Default::default()
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn linear(&self, i: usize) -> f64 {
        self.linear[i]
    }

    pub fn linear_coefficients(&self) -> &[f64] {
        &self.linear
    }

    /// Quadratic terms keyed by `(i, j)` with `i < j`.
    pub fn quadratic(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.quadratic
    }

    pub fn quadratic_coefficient(&self, i: usize, j: usize) -> f64 {
        let key = if i < j { (i, j) } else { (j, i) };
        self.quadratic.get(&key).copied().unwrap_or(0.0)
    }

    pub fn labels(&self) -> &BTreeMap<usize, String> {
        &self.labels
    }

    pub fn set_label(&mut self, i: usize, label: impl Into<String>) {
        assert!(i < self.num_vars, "label index {i} out of range");
        self.labels.insert(i, label.into());
    }

    pub fn add_offset(&mut self, value: f64) {
        self.offset += value;
    }

    pub fn add_linear(&mut self, i: usize, value: f64) {
        assert!(i < self.num_vars, "linear index {i} out of range");
        self.linear[i] += value;
    }

    /// Adds `value·xᵢ·xⱼ`; `i == j` folds into the linear coefficient.
    pub fn add_quadratic(&mut self, i: usize, j: usize, value: f64) {
        assert!(
            i < self.num_vars && j < self.num_vars,
            "quadratic index ({i}, {j}) out of range"
        );
        if i == j {
            self.linear[i] += value;
            return;
        }
        if value == 0.0 {
            return;
        }
        let key = if i < j { (i, j) } else { (j, i) };
        *self.quadratic.entry(key).or_insert(0.0) += value;
    }

    /// Coefficient-wise sum with another model over the same variables.
    pub fn add_model(&mut self, other: &QuboModel) -> Result<(), QuboError> {
        if other.num_vars != self.num_vars {
            return Err(QuboError::Dimension {
                expected: self.num_vars,
                got: other.num_vars,
            });
        }
        self.offset += other.offset;
        for (a, b) in self.linear.iter_mut().zip(&other.linear) {
            *a += b;
        }
        for (&(i, j), &v) in &other.quadratic {
            *self.quadratic.entry((i, j)).or_insert(0.0) += v;
        }
        for (i, l) in &other.labels {
            self.labels.entry(*i).or_insert_with(|| l.clone());
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        self.offset *= factor;
        self.linear.iter_mut().for_each(|v| *v *= factor);
        self.quadratic.values_mut().for_each(|v| *v *= factor);
    }

    pub fn is_finite(&self) -> bool {
        self.offset.is_finite()
            && self.linear.iter().all(|v| v.is_finite())
            && self.quadratic.values().all(|v| v.is_finite())
    }

    pub fn energy(&self, a: &Assignment) -> Result<f64, QuboError> {
        if a.len() != self.num_vars {
            return Err(QuboError::Dimension {
                expected: self.num_vars,
                got: a.len(),
            });
        }
        Ok(self.energy_unchecked(a.bits()))
    }

    pub(crate) fn energy_unchecked(&self, bits: &[bool]) -> f64 {
        let mut e = self.offset;
        for (i, &b) in bits.iter().enumerate() {
            if b {
                e += self.linear[i];
            }
        }
        for (&(i, j), &v) in &self.quadratic {
            if bits[i] && bits[j] {
                e += v;
            }
        }
        e
    }

    /// Energy change of flipping each variable alone from `a`.
    pub fn flip_deltas(&self, a: &Assignment) -> Result<Vec<f64>, QuboError> {
        if a.len() != self.num_vars {
            return Err(QuboError::Dimension {
                expected: self.num_vars,
                got: a.len(),
            });
        }
        let bits = a.bits();
        let mut field = self.linear.clone();
        for (&(i, j), &v) in &self.quadratic {
            if bits[j] {
                field[i] += v;
            }
            if bits[i] {
                field[j] += v;
            }
        }
        Ok(field
            .iter()
            .zip(bits)
            .map(|(&h, &b)| if b { -h } else { h })
            .collect())
    }

    fn check_group(&self, group: &[usize], weight: f64) -> Result<(), QuboError> {
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(QuboError::Argument(format!(
                "penalty weight must be positive and finite, got {weight}"
            )));
        }
        let mut seen = BTreeSet::new();
        for &i in group {
            if i >= self.num_vars {
                return Err(QuboError::Index {
                    index: i,
                    num_vars: self.num_vars,
                });
            }
            if !seen.insert(i) {
                return Err(QuboError::Argument(format!("variable {i} repeated in group")));
            }
        }
        Ok(())
    }

    /// Adds `weight·(Σ_{v∈group} x_v − 1)²`.
    pub fn add_exact_one_penalty(&mut self, group: &[usize], weight: f64) -> Result<(), QuboError> {
        if group.is_empty() {
            return Err(QuboError::Argument("exact-one group is empty".into()));
        }
        self.check_group(group, weight)?;
        self.offset += weight;
        for (a, &i) in group.iter().enumerate() {
            self.linear[i] -= weight;
            for &j in &group[a + 1..] {
                self.add_quadratic(i, j, 2.0 * weight);
            }
        }
        Ok(())
    }

    /// Adds `weight·Σ_{u<v∈group} 2·x_u·x_v`, zero iff at most one member is set.
    pub fn add_at_most_one_penalty(
        &mut self,
        group: &[usize],
        weight: f64,
    ) -> Result<(), QuboError> {
        self.check_group(group, weight)?;
        for (a, &i) in group.iter().enumerate() {
            for &j in &group[a + 1..] {
                self.add_quadratic(i, j, 2.0 * weight);
            }
        }
        Ok(())
    }

    /// `1 + Σ|lᵢ| + Σ|qᵢⱼ|`, which exceeds the spread of attainable objective values.
    pub fn safe_penalty_weight(&self) -> f64 {
        1.0 + self.linear.iter().map(|v| v.abs()).sum::<f64>()
            + self.quadratic.values().map(|v| v.abs()).sum::<f64>()
    }

    /// Substitutes fixed values and returns the model over the remaining
    /// variables together with the map from new index to original index.
    pub fn clamp(&self, fixed: &BTreeMap<usize, bool>) -> Result<(QuboModel, Vec<usize>), QuboError> {
        if let Some((&i, _)) = fixed.iter().find(|(&i, _)| i >= self.num_vars) {
            return Err(QuboError::Index {
                index: i,
                num_vars: self.num_vars,
            });
        }
        let mut new_index = vec![usize::MAX; self.num_vars];
        let mut free = Vec::with_capacity(self.num_vars - fixed.len());
        for (i, slot) in new_index.iter_mut().enumerate() {
            if !fixed.contains_key(&i) {
                *slot = free.len();
                free.push(i);
            }
        }
        let mut sub = QuboModel::new(free.len());
        sub.offset = self.offset;
        for (i, &v) in self.linear.iter().enumerate() {
            match fixed.get(&i) {
                Some(true) => sub.offset += v,
                Some(false) => {}
                None => sub.linear[new_index[i]] += v,
            }
        }
        for (&(i, j), &v) in &self.quadratic {
            match (fixed.get(&i), fixed.get(&j)) {
                (Some(&a), Some(&b)) => {
                    if a && b {
                        sub.offset += v;
                    }
                }
                (Some(&a), None) => {
                    if a {
                        sub.linear[new_index[j]] += v;
                    }
                }
                (None, Some(&b)) => {
                    if b {
                        sub.linear[new_index[i]] += v;
                    }
                }
                (None, None) => sub.add_quadratic(new_index[i], new_index[j], v),
            }
        }
        for (i, label) in &self.labels {
            if new_index[*i] != usize::MAX {
                sub.labels.insert(new_index[*i], label.clone());
            }
        }
        Ok((sub, free))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&QuboDocument::from(self)).expect("QUBO serialization")
    }

    pub fn from_json(text: &str) -> Result<Self, QuboError> {
        let doc: QuboDocument =
            serde_json::from_str(text).map_err(|e| QuboError::Format(e.to_string()))?;
        QuboModel::try_from(doc)
    }
}

/// On-disk QUBO layout shared by the CLI and the remote sampler.
#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct QuboDocument {
    pub num_vars: usize,
    #[serde(default)]
    pub offset: f64,
    #[serde(default)]
    pub linear: Vec<(usize, f64)>,
    #[serde(default)]
    pub quadratic: Vec<(usize, usize, f64)>,
    #[serde(default)]
    pub labels: BTreeMap<String, String>,
}

impl From<&QuboModel> for QuboDocument {
    fn from(m: &QuboModel) -> Self {
        QuboDocument {
            num_vars: m.num_vars,
            offset: m.offset,
            linear: m
                .linear
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(i, &v)| (i, v))
                .collect(),
            quadratic: m.quadratic.iter().map(|(&(i, j), &v)| (i, j, v)).collect(),
            labels: m.labels.iter().map(|(i, l)| (i.to_string(), l.clone())).collect(),
        }
    }
}

impl TryFrom<QuboDocument> for QuboModel {
    type Error = QuboError;

    fn try_from(doc: QuboDocument) -> Result<Self, QuboError> {
        let n = doc.num_vars;
        if n > MAX_VARS {
            return Err(QuboError::Format(format!("num_vars {n} exceeds limit {MAX_VARS}")));
        }
        let index = |i: usize| {
            if i < n {
                Ok(i)
            } else {
                Err(QuboError::Index { index: i, num_vars: n })
            }
        };
        let finite = |v: f64| {
            if v.is_finite() {
                Ok(v)
            } else {
                Err(QuboError::Format("non-finite coefficient".into()))
            }
        };
        let mut m = QuboModel::new(n);
        m.offset = finite(doc.offset)?;
        for (i, v) in doc.linear {
            m.add_linear(index(i)?, finite(v)?);
        }
        for (i, j, v) in doc.quadratic {
            m.add_quadratic(index(i)?, index(j)?, finite(v)?);
        }
        for (key, label) in doc.labels {
            let i: usize = key
                .parse()
                .map_err(|_| QuboError::Format(format!("label key {key:?} is not an index")))?;
            m.labels.insert(index(i)?, label);
        }
        if !m.is_finite() {
            return Err(QuboError::Format("coefficient sum overflowed".into()));
        }
        Ok(m)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub assignment: Assignment,
    pub energy: f64,
    pub multiplicity: usize,
}

/// Samples sorted ascending by energy, ties broken by assignment order.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct SampleSet {
    samples: Vec<Sample>,
}

impl SampleSet {
    /// Deduplicated and sorted, with energies recomputed against `model`.
    pub fn from_assignments<I>(model: &QuboModel, assignments: I) -> Result<Self, QuboError>
    where
        I: IntoIterator<Item = Assignment>,
    {
        Self::from_counted(model, assignments.into_iter().map(|a| (a, 1)))
    }

    pub fn from_counted<I>(model: &QuboModel, assignments: I) -> Result<Self, QuboError>
    where
        I: IntoIterator<Item = (Assignment, usize)>,
    {
        let mut counts: BTreeMap<Assignment, usize> = BTreeMap::new();
        for (a, k) in assignments {
            if a.len() != model.num_vars() {
                return Err(QuboError::Dimension {
                    expected: model.num_vars(),
                    got: a.len(),
                });
            }
            *counts.entry(a).or_insert(0) += k;
        }
        let mut samples: Vec<Sample> = counts
            .into_iter()
            .map(|(assignment, multiplicity)| Sample {
                energy: model.energy_unchecked(assignment.bits()),
                assignment,
                multiplicity,
            })
            .collect();
        samples.sort_by(sample_order);
        Ok(SampleSet { samples })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn first(&self) -> Option<&Sample> {
        self.samples.first()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Sample> {
        self.samples.iter()
    }

    pub fn truncate(&mut self, n: usize) {
        self.samples.truncate(n);
    }
}

pub(crate) fn sample_order(a: &Sample, b: &Sample) -> Ordering {
    a.energy
        .total_cmp(&b.energy)
        .then_with(|| a.assignment.cmp(&b.assignment))
}
