//! Classical QUBO sampling backends behind one [`Sampler`] contract.

mod anneal;
mod exact;
mod remote;
mod tabu;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qubo::{Assignment, QuboError, QuboModel, SampleSet};

pub use anneal::{simulated_anneal, SimulatedAnnealing};
pub use exact::{brute_force, BruteForce, DEFAULT_BRUTE_FORCE_CAP};
pub use remote::{parse_remote_response, RemoteSampler, REMOTE_URL_ENV};
pub use tabu::{tabu_search, TabuSearch};

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("model has {num_vars} variables, backend capacity is {cap}")]
    Capacity { num_vars: usize, cap: usize },
    #[error("invalid sampler config: {0}")]
    Config(String),
    #[error(transparent)]
    Qubo(#[from] QuboError),
    #[error("remote sampler: {0}")]
    Remote(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub num_reads: usize,
    pub seed: u64,
    pub sa_sweeps: usize,
    pub sa_beta_initial: f64,
    pub sa_beta_final: f64,
    pub tabu_tenure: usize,
    pub tabu_max_no_improve: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            num_reads: 1000,
            seed: 0,
            sa_sweeps: 1000,
            sa_beta_initial: 0.1,
            sa_beta_final: 10.0,
            tabu_tenure: 20,
            tabu_max_no_improve: 200,
        }
    }
}

impl SamplerConfig {
    pub fn with_seed(seed: u64) -> Self {
        SamplerConfig {
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        let counts = [
            ("num_reads", self.num_reads),
            ("sa_sweeps", self.sa_sweeps),
            ("tabu_tenure", self.tabu_tenure),
            ("tabu_max_no_improve", self.tabu_max_no_improve),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(SamplerError::Config(format!("{name} must be at least 1")));
        }
        if !(self.sa_beta_initial > 0.0 && self.sa_beta_final > self.sa_beta_initial)
            || !self.sa_beta_final.is_finite()
        {
            return Err(SamplerError::Config(format!(
                "beta range must satisfy 0 < initial < final, got {} .. {}",
                self.sa_beta_initial, self.sa_beta_final
            )));
        }
        Ok(())
    }
}

/// A QUBO sampling backend. Implementations must be deterministic given
/// `(model, cfg)` and must report energies re-evaluated against `model`.
pub trait Sampler: Send + Sync {
    fn name(&self) -> &'static str;

    /// Largest model the backend accepts directly, if bounded.
    fn capacity(&self) -> Option<usize> {
        None
    }

    fn sample(
        &self,
        model: &QuboModel,
        cfg: &SamplerConfig,
        initial: Option<&Assignment>,
    ) -> Result<SampleSet, SamplerError>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[serde(alias = "brute_force", alias = "brute-force")]
    BruteForce,
    Sa,
    Tabu,
    Remote,
}

impl BackendKind {
    /// Instantiates the backend; `Remote` reads its URL from the environment.
    pub fn build(self) -> Result<Box<dyn Sampler>, SamplerError> {
        Ok(match self {
            BackendKind::BruteForce => Box::new(BruteForce::default()),
            BackendKind::Sa => Box::new(SimulatedAnnealing),
            BackendKind::Tabu => Box::new(TabuSearch),
            BackendKind::Remote => Box::new(RemoteSampler::from_env()?),
        })
    }
}

impl FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "bruteforce" | "brute_force" | "brute-force" | "exact" => Ok(BackendKind::BruteForce),
            "sa" | "anneal" => Ok(BackendKind::Sa),
            "tabu" => Ok(BackendKind::Tabu),
            "remote" => Ok(BackendKind::Remote),
            other => Err(format!("unknown backend {other:?}")),
        }
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendKind::BruteForce => "bruteforce",
            BackendKind::Sa => "sa",
            BackendKind::Tabu => "tabu",
            BackendKind::Remote => "remote",
        })
    }
}

/// Adjacency form of a QUBO for single-flip local search.
pub(crate) struct Couplings {
    pub linear: Vec<f64>,
    starts: Vec<usize>,
    neighbors: Vec<(usize, f64)>,
}

impl Couplings {
    pub fn new(model: &QuboModel) -> Self {
        let n = model.num_vars();
        let mut degree = vec![0usize; n];
        for &(i, j) in model.quadratic().keys() {
            degree[i] += 1;
            degree[j] += 1;
        }
        let mut starts = vec![0usize; n + 1];
        for i in 0..n {
            starts[i + 1] = starts[i] + degree[i];
        }
        let mut fill = starts.clone();
        let mut neighbors = vec![(0usize, 0.0f64); starts[n]];
        for (&(i, j), &v) in model.quadratic() {
            neighbors[fill[i]] = (j, v);
            fill[i] += 1;
            neighbors[fill[j]] = (i, v);
            fill[j] += 1;
        }
        Couplings {
            linear: model.linear_coefficients().to_vec(),
            starts,
            neighbors,
        }
    }

    pub fn len(&self) -> usize {
        self.linear.len()
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.neighbors[self.starts[i]..self.starts[i + 1]]
    }

    /// Local fields `lᵢ + Σⱼ qᵢⱼ xⱼ`.
    pub fn fields(&self, bits: &[bool]) -> Vec<f64> {
        let mut h = self.linear.clone();
        for (i, hi) in h.iter_mut().enumerate() {
            for &(j, q) in self.neighbors(i) {
                if bits[j] {
                    *hi += q;
                }
            }
        }
        h
    }

    /// Flips bit `i`, updating neighbor fields; returns the energy change.
    #[inline]
    pub fn flip(&self, bits: &mut [bool], fields: &mut [f64], i: usize) -> f64 {
        let delta = if bits[i] { -fields[i] } else { fields[i] };
        bits[i] = !bits[i];
        let sign = if bits[i] { 1.0 } else { -1.0 };
        for &(j, q) in self.neighbors(i) {
            fields[j] += sign * q;
        }
        delta
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        SamplerConfig::default().validate().unwrap();
    }

    #[test]
    fn config_rejects_zero_counts_and_bad_beta() {
        let cfg = SamplerConfig {
            num_reads: 0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = SamplerConfig {
            sa_beta_initial: 5.0,
            sa_beta_final: 1.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn backend_names_parse() {
        for (s, k) in [
            ("bruteforce", BackendKind::BruteForce),
            ("sa", BackendKind::Sa),
            ("tabu", BackendKind::Tabu),
            ("remote", BackendKind::Remote),
        ] {
            assert_eq!(s.parse::<BackendKind>().unwrap(), k);
            assert_eq!(k.to_string(), s);
        }
        assert!("qpu".parse::<BackendKind>().is_err());
    }

    #[test]
    fn couplings_flip_tracks_energy() {
        let mut m = QuboModel::new(3);
        m.add_linear(0, 1.0);
        m.add_linear(2, -2.0);
        m.add_quadratic(0, 1, 3.0);
        m.add_quadratic(0, 2, -0.5);
        let c = Couplings::new(&m);
        let mut bits = vec![false; 3];
        let mut h = c.fields(&bits);
        let mut e = m.offset();
        for i in [0, 2, 1, 0, 2] {
            e += c.flip(&mut bits, &mut h, i);
            assert!((e - m.energy_unchecked(&bits)).abs() < 1e-12);
        }
    }
}
