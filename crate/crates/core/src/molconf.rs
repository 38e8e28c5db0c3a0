//! Bead-string molecules placed on a cubic lattice, posed as a quadratic
//! assignment QUBO over (bead, site) pairs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::partition::{solve_partitioned, PartitionError, PartitionParams};
use crate::qubo::{Assignment, QuboError, QuboModel};
use crate::sampler::Sampler;
use crate::trace::HybridTrace;

#[derive(Debug, Error)]
pub enum MolconfError {
    #[error("pair distance must be positive, got {0}")]
    Domain(f64),
    #[error("{beads} beads cannot be placed on {sites} sites")]
    TooFewSites { beads: usize, sites: usize },
    #[error("penalty weight {given} is below the safe weight {required}")]
    PenaltyTooSmall { given: f64, required: f64 },
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error(transparent)]
    Qubo(#[from] QuboError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
}

/// `4ε((σ/r)¹² − (σ/r)⁶)`.
pub fn lj_potential(epsilon: f64, sigma: f64, r: f64) -> Result<f64, MolconfError> {
    if !(r > 0.0) {
        return Err(MolconfError::Domain(r));
    }
    let s6 = (sigma / r).powi(6);
    Ok(4.0 * epsilon * (s6 * s6 - s6))
}

/// `β(r − lb)²`.
pub fn bond_potential(beta: f64, r: f64, lb: f64) -> f64 {
    beta * (r - lb) * (r - lb)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lattice {
    pub side: usize,
    pub cell_length: f64,
}

impl Lattice {
    pub fn num_sites(&self) -> usize {
        self.side.pow(3)
    }

    /// Site `j` sits at `(ix, iy, iz)·cell_length` with `j = (ix·side + iy)·side + iz`.
    pub fn coords(&self, j: usize) -> [f64; 3] {
        let s = self.side;
        let (ix, iy, iz) = (j / (s * s), (j / s) % s, j % s);
        [ix as f64, iy as f64, iz as f64].map(|c| c * self.cell_length)
    }

    pub fn distance(&self, j: usize, l: usize) -> f64 {
        let (a, b) = (self.coords(j), self.coords(l));
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
    }

    /// Index of the same physical point in a larger lattice with the same cell.
    pub fn embed_site(&self, j: usize, into: &Lattice) -> usize {
        let s = self.side;
        let (ix, iy, iz) = (j / (s * s), (j / s) % s, j % s);
        (ix * into.side + iy) * into.side + iz
    }
}

/// Lennard-Jones parameters, either shared by every bead pair or per pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LjParams {
    Uniform { epsilon: f64, sigma: f64 },
    PerPair { epsilon: Vec<Vec<f64>>, sigma: Vec<Vec<f64>> },
}

impl LjParams {
    pub fn get(&self, i: usize, k: usize) -> (f64, f64) {
        match self {
            LjParams::Uniform { epsilon, sigma } => (*epsilon, *sigma),
            LjParams::PerPair { epsilon, sigma } => (epsilon[i][k], sigma[i][k]),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Molecule {
    pub beads: usize,
    /// `bonds[i]` is the length between beads `i` and `i + 1`.
    pub bonds: Vec<f64>,
    pub lj: LjParams,
    /// Bond penalty; defaults to ten times the largest `|LJ|` on the lattice.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConformationInstance {
    pub lattice: Lattice,
    #[serde(flatten)]
    pub molecule: Molecule,
    /// Constraint weight; defaults to the safe weight of the objective part.
    #[serde(rename = "penalty_A", default, skip_serializing_if = "Option::is_none")]
    pub penalty_a: Option<f64>,
}

const BUTANE_JSON: &str = include_str!("../data/butane.json");

impl ConformationInstance {
    /// Uniform-LJ instance.
    pub fn uniform(side: usize, cell_length: f64, beads: usize, bond: f64, epsilon: f64, sigma: f64) -> Self {
        ConformationInstance {
            lattice: Lattice { side, cell_length },
            molecule: Molecule {
                beads,
                bonds: vec![bond; beads.saturating_sub(1)],
                lj: LjParams::Uniform { epsilon, sigma },
                beta: None,
            },
            penalty_a: None,
        }
    }

    /// Four carbons on a 4×4×4 lattice with 1.4 Å cells, ε = 0.06, σ = 3.6 Å, bonds 1.5 Å.
    pub fn butane() -> Self {
        Self::from_json(BUTANE_JSON).expect("bundled butane instance is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, MolconfError> {
        let inst: ConformationInstance =
            serde_json::from_str(text).map_err(|e| MolconfError::Invalid(e.to_string()))?;
        inst.validate()?;
        Ok(inst)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    pub fn num_beads(&self) -> usize {
        self.molecule.beads
    }

    pub fn num_sites(&self) -> usize {
        self.lattice.num_sites()
    }

    pub fn num_vars(&self) -> usize {
        self.num_beads() * self.num_sites()
    }

    pub fn validate(&self) -> Result<(), MolconfError> {
        let b = self.molecule.beads;
        let invalid = |m: String| Err(MolconfError::Invalid(m));
        if self.lattice.side == 0 || !(self.lattice.cell_length > 0.0) || !self.lattice.cell_length.is_finite() {
            return invalid("lattice needs side ≥ 1 and a positive cell length".into());
        }
        if self.lattice.side > 64 {
            return invalid("lattice side is limited to 64".into());
        }
        if b == 0 {
            return invalid("molecule needs at least one bead".into());
        }
        if self.molecule.bonds.len() != b - 1 {
            return invalid(format!("{b} beads need {} bond lengths, got {}", b - 1, self.molecule.bonds.len()));
        }
        if self.molecule.bonds.iter().any(|&l| !(l >= 0.0) || !l.is_finite()) {
            return invalid("bond lengths must be finite and nonnegative".into());
        }
        let ok = |e: f64, s: f64| e >= 0.0 && e.is_finite() && s > 0.0 && s.is_finite();
        match &self.molecule.lj {
            LjParams::Uniform { epsilon, sigma } => {
                if !ok(*epsilon, *sigma) {
                    return invalid("LJ parameters need ε ≥ 0 and σ > 0".into());
                }
            }
            LjParams::PerPair { epsilon, sigma } => {
                let square = |t: &Vec<Vec<f64>>| t.len() == b && t.iter().all(|r| r.len() == b);
                if !square(epsilon) || !square(sigma) {
                    return invalid(format!("per-pair LJ tables must be {b}×{b}"));
                }
                for i in 0..b {
                    for k in 0..b {
                        if !ok(epsilon[i][k], sigma[i][k]) {
                            return invalid(format!("bad LJ parameters for pair ({i},{k})"));
                        }
                        if epsilon[i][k] != epsilon[k][i] || sigma[i][k] != sigma[k][i] {
                            return invalid("per-pair LJ tables must be symmetric".into());
                        }
                    }
                }
            }
        }
        if let Some(beta) = self.molecule.beta {
            if !(beta > 0.0) || !beta.is_finite() {
                return invalid("β must be positive".into());
            }
        }
        if let Some(a) = self.penalty_a {
            if !(a > 0.0) || !a.is_finite() {
                return invalid("penalty_A must be positive".into());
            }
        }
        Ok(())
    }

    fn lj(&self, i: usize, k: usize, r: f64) -> f64 {
        let (e, s) = self.molecule.lj.get(i, k);
        lj_potential(e, s, r).expect("distinct sites have positive distance")
    }

    /// β in effect: the configured one, else `10·max|LJ|` over all bead pairs
    /// and distinct-site distances (1 if that maximum is zero).
    pub fn effective_beta(&self) -> f64 {
        if let Some(beta) = self.molecule.beta {
            return beta;
        }
        let n = self.num_sites();
        let mut distances: Vec<f64> = Vec::new();
        for l in 1..n {
            distances.push(self.lattice.distance(0, l));
        }
        distances.sort_by(f64::total_cmp);
        distances.dedup();
        let b = self.num_beads();
        let mut worst = 0.0f64;
        for i in 0..b {
            for k in 0..b {
                if i != k {
                    for &r in &distances {
                        worst = worst.max(self.lj(i, k, r).abs());
                    }
                }
            }
        }
        if worst > 0.0 {
            10.0 * worst
        } else {
            1.0
        }
    }

    fn pair_energy(&self, i: usize, j: usize, k: usize, l: usize, beta: f64) -> f64 {
        if i == k || j == l {
            return 0.0;
        }
        let r = self.lattice.distance(j, l);
        let mut u = self.lj(i, k, r);
        if i.abs_diff(k) == 1 {
            u += bond_potential(beta, r, self.molecule.bonds[i.min(k)]);
        }
        u
    }

    /// Objective of a placement `sites[i]` as the ordered double sum over bead pairs.
    pub fn placement_energy(&self, sites: &[usize]) -> f64 {
        let beta = self.effective_beta();
        let mut e = 0.0;
        for (i, &j) in sites.iter().enumerate() {
            for (k, &l) in sites.iter().enumerate() {
                e += self.pair_energy(i, j, k, l, beta);
            }
        }
        e
    }
}

/// Dense `U[i][j][k][l]` over beads `i, k` and sites `j, l`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairTensor {
    beads: usize,
    sites: usize,
    data: Vec<f64>,
}

impl PairTensor {
    pub fn zeros(beads: usize, sites: usize) -> Self {
        PairTensor {
            beads,
            sites,
            data: vec![0.0; beads * sites * beads * sites],
        }
    }

    pub fn dims(&self) -> [usize; 4] {
        [self.beads, self.sites, self.beads, self.sites]
    }

    fn at(&self, i: usize, j: usize, k: usize, l: usize) -> usize {
        ((i * self.sites + j) * self.beads + k) * self.sites + l
    }

    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.data[self.at(i, j, k, l)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, l: usize, value: f64) {
        let p = self.at(i, j, k, l);
        self.data[p] = value;
    }
}

/// `U = LJ + bond`, with the bond term on consecutive beads only. Entries
/// with `i = k` or `j = l` are zero; conflicts are left to the penalties.
pub fn pair_energy_tensor(inst: &ConformationInstance) -> PairTensor {
    let (b, n) = (inst.num_beads(), inst.num_sites());
    let beta = inst.effective_beta();
    let mut t = PairTensor::zeros(b, n);
    for i in 0..b {
        for k in 0..b {
            for j in 0..n {
                for l in 0..n {
                    let u = inst.pair_energy(i, j, k, l, beta);
                    if u != 0.0 {
                        t.set(i, j, k, l, u);
                    }
                }
            }
        }
    }
    t
}

/// Penalty QUBO over `x[i·N + j]` (bead `i` at site `j`).
#[derive(Clone, Debug, PartialEq)]
pub struct ConformationQubo {
    pub model: QuboModel,
    pub penalty: f64,
    pub beads: usize,
    pub sites: usize,
}

impl ConformationQubo {
    pub fn var(&self, bead: usize, site: usize) -> usize {
        bead * self.sites + site
    }

    /// Assignment that places bead `i` on `sites[i]`.
    pub fn encode(&self, sites: &[usize]) -> Assignment {
        let mut a = Assignment::zeros(self.model.num_vars());
        for (i, &j) in sites.iter().enumerate() {
            a.set(self.var(i, j), true);
        }
        a
    }
}

pub fn build_conformation_qubo(inst: &ConformationInstance) -> Result<ConformationQubo, MolconfError> {
    inst.validate()?;
    build_qubo_from_tensor(&pair_energy_tensor(inst), inst.penalty_a)
}

/// Ordered double sum `Σ U x x` plus `A` times the exact-one (per bead) and
/// at-most-one (per site) penalties.
pub fn build_qubo_from_tensor(u: &PairTensor, penalty: Option<f64>) -> Result<ConformationQubo, MolconfError> {
    let (b, n) = (u.beads, u.sites);
    if n < b {
        return Err(MolconfError::TooFewSites { beads: b, sites: n });
    }
    let mut model = QuboModel::new(b * n);
    for i in 0..b {
        for j in 0..n {
            model.set_label(i * n + j, format!("x[{i},{j}]"));
        }
    }
    for i in 0..b {
        for j in 0..n {
            for k in 0..b {
                for l in 0..n {
                    let v = u.get(i, j, k, l);
                    if v != 0.0 && (i, j) != (k, l) {
                        model.add_quadratic(i * n + j, k * n + l, v);
                    }
                }
            }
            let d = u.get(i, j, i, j);
            if d != 0.0 {
                model.add_linear(i * n + j, d);
            }
        }
    }
    let required = model.safe_penalty_weight();
    let a = penalty.unwrap_or(required);
    if a < required {
        return Err(MolconfError::PenaltyTooSmall { given: a, required });
    }
    for i in 0..b {
        let group: Vec<usize> = (0..n).map(|j| i * n + j).collect();
        model.add_exact_one_penalty(&group, a)?;
    }
    if b > 1 {
        for j in 0..n {
            let group: Vec<usize> = (0..b).map(|i| i * n + j).collect();
            model.add_at_most_one_penalty(&group, a)?;
        }
    }
    Ok(ConformationQubo {
        model,
        penalty: a,
        beads: b,
        sites: n,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlacementReport {
    /// Sites occupied by each bead.
    pub bead_sites: Vec<Vec<usize>>,
    pub unplaced: Vec<usize>,
    pub multiply_placed: Vec<usize>,
    /// Sites holding more than one bead.
    pub site_conflicts: Vec<usize>,
    /// `|r − lb|` per bond, when both ends are placed exactly once.
    pub bond_deviation: Vec<Option<f64>>,
    /// Placement objective, when the placement is valid.
    pub objective: Option<f64>,
}

impl PlacementReport {
    pub fn is_valid(&self) -> bool {
        self.unplaced.is_empty() && self.multiply_placed.is_empty() && self.site_conflicts.is_empty()
    }

    /// One site per bead, when valid.
    pub fn placement(&self) -> Option<Vec<usize>> {
        self.is_valid().then(|| self.bead_sites.iter().map(|s| s[0]).collect())
    }
}

pub fn decode_conformation(inst: &ConformationInstance, a: &Assignment) -> Result<PlacementReport, MolconfError> {
    let (b, n) = (inst.num_beads(), inst.num_sites());
    if a.len() != b * n {
        return Err(QuboError::Dimension {
            expected: b * n,
            got: a.len(),
        }
        .into());
    }
    let bead_sites: Vec<Vec<usize>> = (0..b)
        .map(|i| (0..n).filter(|&j| a.get(i * n + j)).collect())
        .collect();
    let unplaced = (0..b).filter(|&i| bead_sites[i].is_empty()).collect();
    let multiply_placed = (0..b).filter(|&i| bead_sites[i].len() > 1).collect();
    let site_conflicts = (0..n)
        .filter(|&j| (0..b).filter(|&i| a.get(i * n + j)).count() > 1)
        .collect();
    let bond_deviation = (0..b.saturating_sub(1))
        .map(|i| match (&bead_sites[i][..], &bead_sites[i + 1][..]) {
            ([j], [l]) => Some((inst.lattice.distance(*j, *l) - inst.molecule.bonds[i]).abs()),
            _ => None,
        })
        .collect();
    let mut report = PlacementReport {
        bead_sites,
        unplaced,
        multiply_placed,
        site_conflicts,
        bond_deviation,
        objective: None,
    };
    if let Some(sites) = report.placement() {
        report.objective = Some(inst.placement_energy(&sites));
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConformationSolution {
    pub assignment: Assignment,
    pub energy: f64,
    pub report: PlacementReport,
    pub num_vars: usize,
    pub penalty: f64,
    pub trace: HybridTrace,
}

/// Builds the QUBO and minimizes it with the partitioning solver.
pub fn solve_conformation(
    inst: &ConformationInstance,
    backend: &dyn Sampler,
    params: &PartitionParams,
) -> Result<ConformationSolution, MolconfError> {
    let q = build_conformation_qubo(inst)?;
    let r = solve_partitioned(&q.model, backend, params)?;
    let report = decode_conformation(inst, &r.assignment)?;
    Ok(ConformationSolution {
        num_vars: q.model.num_vars(),
        penalty: q.penalty,
        assignment: r.assignment,
        energy: r.energy,
        report,
        trace: r.trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::brute_force;

    #[test]
    fn lj_examples() {
        assert_eq!(lj_potential(1.0, 1.0, 1.0).unwrap(), 0.0);
        let rmin = 2f64.powf(1.0 / 6.0) * 1.5;
        assert!((lj_potential(0.3, 1.5, rmin).unwrap() + 0.3).abs() < 1e-12);
        assert_eq!(lj_potential(0.06, 3.6, 3.6).unwrap(), 0.0);
        assert!(matches!(lj_potential(1.0, 1.0, 0.0), Err(MolconfError::Domain(_))));
    }

    #[test]
    fn bond_examples() {
        assert_eq!(bond_potential(3.0, 1.5, 1.5), 0.0);
        assert!((bond_potential(1.0, 2.0, 1.5) - 0.25).abs() < 1e-15);
        assert!((bond_potential(2.0, 1.7, 1.5) - bond_potential(2.0, 1.3, 1.5)).abs() < 1e-12);
    }

    #[test]
    fn lattice_geometry() {
        let l = Lattice { side: 3, cell_length: 2.0 };
        assert_eq!(l.num_sites(), 27);
        assert_eq!(l.coords(5), [0.0, 2.0, 4.0]);
        assert_eq!(l.distance(0, 0), 0.0);
        assert!((l.distance(0, 26) - (12f64).sqrt() * 2.0).abs() < 1e-12);
        let small = Lattice { side: 2, cell_length: 2.0 };
        assert_eq!(small.embed_site(3, &l), 4);
    }

    #[test]
    fn bond_only_pair_at_bond_length_is_zero() {
        let mut inst = ConformationInstance::uniform(2, 1.0, 2, 1.0, 0.0, 1.0);
        inst.molecule.beta = Some(5.0);
        let u = pair_energy_tensor(&inst);
        assert_eq!(u.get(0, 0, 1, 1), 0.0);
        assert!(u.get(0, 0, 1, 3) > 0.0);
    }

    #[test]
    fn butane_dimensions() {
        let inst = ConformationInstance::butane();
        assert_eq!(pair_energy_tensor(&inst).dims(), [4, 64, 4, 64]);
        assert_eq!(inst.num_vars(), 256);
    }

    #[test]
    fn tensor_is_symmetric() {
        let inst = ConformationInstance::uniform(2, 1.0, 3, 1.0, 1.0, 1.0);
        let u = pair_energy_tensor(&inst);
        for (i, j, k, l) in [(0, 1, 1, 2), (0, 0, 2, 7), (2, 5, 1, 3)] {
            assert_eq!(u.get(i, j, k, l), u.get(k, l, i, j));
        }
    }

    #[test]
    fn two_beads_two_sites_zero_tensor() {
        let q = build_qubo_from_tensor(&PairTensor::zeros(2, 2), Some(10.0)).unwrap();
        assert_eq!(q.model.num_vars(), 4);
        // Both beads on site 0: 2A from the shared-site pair term.
        let both = q.encode(&[0, 0]);
        assert_eq!(q.model.energy(&both).unwrap(), 20.0);
        let set = brute_force(&q.model).unwrap();
        let ground: Vec<_> = set.iter().take_while(|s| s.energy == 0.0).map(|s| s.assignment.clone()).collect();
        assert_eq!(ground.len(), 2);
        assert!(ground.contains(&q.encode(&[0, 1])));
        assert!(ground.contains(&q.encode(&[1, 0])));
    }

    #[test]
    fn feasible_energy_equals_placement_objective() {
        let inst = ConformationInstance::uniform(2, 1.0, 3, 1.0, 1.0, 1.0);
        let q = build_conformation_qubo(&inst).unwrap();
        for sites in [[0, 1, 3], [7, 0, 5], [2, 6, 4]] {
            let e = q.model.energy(&q.encode(&sites)).unwrap();
            assert!((e - inst.placement_energy(&sites)).abs() < 1e-9);
        }
    }

    #[test]
    fn three_beads_on_27_sites_is_81_vars() {
        let inst = ConformationInstance::uniform(3, 1.0, 3, 1.0, 1.0, 1.0);
        assert_eq!(build_conformation_qubo(&inst).unwrap().model.num_vars(), 81);
    }

    #[test]
    fn too_few_sites_and_small_penalty_are_errors() {
        assert!(matches!(
            build_qubo_from_tensor(&PairTensor::zeros(3, 2), None),
            Err(MolconfError::TooFewSites { .. })
        ));
        let mut inst = ConformationInstance::uniform(2, 1.0, 2, 1.0, 1.0, 1.0);
        inst.penalty_a = Some(1e-3);
        assert!(matches!(build_conformation_qubo(&inst), Err(MolconfError::PenaltyTooSmall { .. })));
    }

    #[test]
    fn decode_flags() {
        let inst = ConformationInstance::uniform(2, 1.0, 2, 1.0, 1.0, 1.0);
        let q = build_conformation_qubo(&inst).unwrap();
        let ok = decode_conformation(&inst, &q.encode(&[0, 1])).unwrap();
        assert!(ok.is_valid());
        assert_eq!(ok.bond_deviation, vec![Some(0.0)]);
        let clash = decode_conformation(&inst, &q.encode(&[3, 3])).unwrap();
        assert_eq!(clash.site_conflicts, vec![3]);
        assert!(clash.objective.is_none());
        let empty = decode_conformation(&inst, &Assignment::zeros(16)).unwrap();
        assert_eq!(empty.unplaced, vec![0, 1]);
    }

    #[test]
    fn json_round_trip_and_validation() {
        let inst = ConformationInstance::butane();
        assert_eq!(ConformationInstance::from_json(&inst.to_json()).unwrap(), inst);
        let per_pair = r#"{"lattice":{"side":2,"cell_length":1.0},"beads":2,"bonds":[1.0],
            "lj":{"epsilon":[[1,1],[1,1]],"sigma":[[1,2],[2,1]]},"beta":3.0,"penalty_A":50.0}"#;
        let p = ConformationInstance::from_json(per_pair).unwrap();
        assert_eq!(p.molecule.lj.get(0, 1), (1.0, 2.0));
        let bad = r#"{"lattice":{"side":2,"cell_length":1.0},"beads":3,"bonds":[1.0],"lj":{"epsilon":1,"sigma":1}}"#;
        assert!(ConformationInstance::from_json(bad).is_err());
    }
}
