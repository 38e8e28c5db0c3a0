//! Large-neighbourhood QUBO search. Impact-ordered sub-QUBOs go to the
//! backend and improvements are spliced into a tabu-polished incumbent.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::qubo::{Assignment, QuboError, QuboModel};
use crate::sampler::{tabu_search, Sampler, SamplerConfig, SamplerError};
use crate::trace::{HybridTrace, TraceRow};

#[derive(Debug, Error)]
pub enum PartitionError {
    #[error("invalid partition parameters: {0}")]
    Params(String),
    #[error("backend failed in outer iteration {iteration}: {source}")]
    Backend {
        iteration: usize,
        #[source]
        source: SamplerError,
    },
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Qubo(#[from] QuboError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartitionParams {
    pub subqubo_size: usize,
    pub max_outer_iters: usize,
    pub stall_limit: usize,
    /// Used for the tabu passes and, with a per-block seed, for sub-QUBO calls.
    pub sampler: SamplerConfig,
}

impl Default for PartitionParams {
    fn default() -> Self {
        PartitionParams {
            subqubo_size: 64,
            max_outer_iters: 50,
            stall_limit: 2,
            sampler: SamplerConfig::default(),
        }
    }
}

impl PartitionParams {
    pub fn validate(&self) -> Result<(), PartitionError> {
        if self.subqubo_size < 2 {
            return Err(PartitionError::Params("subqubo_size must be at least 2".into()));
        }
        if self.max_outer_iters == 0 || self.stall_limit == 0 {
            return Err(PartitionError::Params(
                "max_outer_iters and stall_limit must be at least 1".into(),
            ));
        }
        self.sampler.validate()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartitionResult {
    pub assignment: Assignment,
    pub energy: f64,
    pub trace: HybridTrace,
}

/// Variables by decreasing `|ΔE|` of a single flip from `current`; ties by index.
pub fn impact_order(model: &QuboModel, current: &Assignment) -> Result<Vec<usize>, QuboError> {
    let deltas = model.flip_deltas(current)?;
    let mut order: Vec<usize> = (0..deltas.len()).collect();
    order.sort_by(|&a, &b| deltas[b].abs().total_cmp(&deltas[a].abs()).then(a.cmp(&b)));
    Ok(order)
}

/// Runs the outer decomposition loop.
///
/// Blocks larger than the backend's capacity are shrunk to fit it. Sub-QUBOs
/// of one iteration are solved concurrently against a frozen incumbent and
/// spliced back in block order, each only if it does not raise the energy.
pub fn solve_partitioned(
    model: &QuboModel,
    backend: &dyn Sampler,
    params: &PartitionParams,
) -> Result<PartitionResult, PartitionError> {
    params.validate()?;
    let n = model.num_vars();
    let mut trace = HybridTrace::default();
    let start = Instant::now();
    let initial = tabu_search(model, &params.sampler, &Assignment::zeros(n))?;
    let first = initial.first().expect("tabu returns one sample");
    let mut incumbent = first.assignment.clone();
    let mut best = first.energy;
    let mut row = TraceRow::new(0);
    row.best_energy = Some(best);
    row.incumbent_energy = Some(best);
    row.qubo_vars = Some(n);
    row.classical_s = start.elapsed().as_secs_f64();
    row.note = "initial tabu".into();
    trace.push(row);
    if n == 0 {
        return Ok(PartitionResult {
            assignment: incumbent,
            energy: best,
            trace,
        });
    }

    let block_size = match backend.capacity() {
        Some(cap) => params.subqubo_size.min(cap.max(1)),
        None => params.subqubo_size,
    };
    let mut stale = 0;
    for iteration in 1..=params.max_outer_iters {
        let order = impact_order(model, &incumbent)?;
        let blocks: Vec<&[usize]> = order.chunks(block_size).collect();

        let backend_start = Instant::now();
        let frozen = &incumbent;
        let solved: Vec<Vec<(usize, bool)>> = blocks
            .par_iter()
            .enumerate()
            .map(|(b, block)| solve_block(model, backend, params, frozen, block, iteration, b))
            .collect::<Result<_, _>>()
            .map_err(|source| PartitionError::Backend { iteration, source })?;
        let backend_s = backend_start.elapsed().as_secs_f64();

        let classical_start = Instant::now();
        let mut current = incumbent.clone();
        let mut current_e = best;
        let mut accepted = 0;
        for values in &solved {
            let mut candidate = current.clone();
            for &(v, bit) in values {
                candidate.set(v, bit);
            }
            let e = model.energy(&candidate)?;
            if e <= current_e {
                current = candidate;
                current_e = e;
                accepted += 1;
            }
        }
        let polished = tabu_search(model, &params.sampler, &current)?;
        let p = polished.first().expect("tabu returns one sample");
        if p.energy <= current_e {
            current = p.assignment.clone();
            current_e = p.energy;
        }

        if current_e < best {
            stale = 0;
        } else {
            stale += 1;
        }
        if current_e <= best {
            incumbent = current;
            best = current_e;
        }
        let mut row = TraceRow::new(iteration);
        row.best_energy = Some(best);
        row.incumbent_energy = Some(current_e);
        row.qubo_vars = Some(block_size.min(n));
        row.backend_s = backend_s;
        row.classical_s = classical_start.elapsed().as_secs_f64();
        row.note = format!("{} blocks, {accepted} accepted", solved.len());
        trace.push(row);
        if stale >= params.stall_limit {
            break;
        }
    }
    Ok(PartitionResult {
        assignment: incumbent,
        energy: best,
        trace,
    })
}

fn solve_block(
    model: &QuboModel,
    backend: &dyn Sampler,
    params: &PartitionParams,
    frozen: &Assignment,
    block: &[usize],
    iteration: usize,
    index: usize,
) -> Result<Vec<(usize, bool)>, SamplerError> {
    let mut in_block = vec![false; model.num_vars()];
    for &v in block {
        in_block[v] = true;
    }
    let fixed: BTreeMap<usize, bool> = (0..model.num_vars())
        .filter(|&v| !in_block[v])
        .map(|v| (v, frozen.get(v)))
        .collect();
    let (sub, map) = model.clamp(&fixed)?;
    let start = Assignment::from(map.iter().map(|&v| frozen.get(v)).collect::<Vec<_>>());
    let cfg = SamplerConfig {
        seed: block_seed(params.sampler.seed, iteration, index),
        ..params.sampler.clone()
    };
    let set = backend.sample(&sub, &cfg, Some(&start))?;
    let best = set
        .first()
        .ok_or_else(|| SamplerError::Remote("backend returned no samples".into()))?;
    Ok(map
        .iter()
        .zip(best.assignment.bits())
        .map(|(&v, &bit)| (v, bit))
        .collect())
}

/// splitmix64 over (seed, iteration, block) so every sub-QUBO call draws an
/// independent, reproducible stream.
fn block_seed(seed: u64, iteration: usize, block: usize) -> u64 {
    let mut z = seed
        ^ (iteration as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (block as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{brute_force, BruteForce, TabuSearch};

    fn chain(n: usize) -> QuboModel {
        let mut m = QuboModel::new(n);
        for i in 0..n {
            m.add_linear(i, if i % 3 == 0 { -2.0 } else { 1.0 });
            if i + 1 < n {
                m.add_quadratic(i, i + 1, if i % 2 == 0 { 1.5 } else { -1.0 });
            }
        }
        m
    }

    #[test]
    fn impact_order_examples() {
        let mut m = QuboModel::new(2);
        m.add_linear(0, -5.0);
        m.add_linear(1, 1.0);
        assert_eq!(impact_order(&m, &Assignment::zeros(2)).unwrap(), vec![0, 1]);
        let z = QuboModel::new(4);
        assert_eq!(impact_order(&z, &Assignment::zeros(4)).unwrap(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn single_block_with_exact_backend_is_optimal() {
        let m = chain(10);
        let params = PartitionParams {
            subqubo_size: 16,
            ..Default::default()
        };
        let r = solve_partitioned(&m, &BruteForce::default(), &params).unwrap();
        let exact = brute_force(&m).unwrap();
        assert_eq!(r.energy, exact.first().unwrap().energy);
    }

    #[test]
    fn trace_best_is_non_increasing() {
        let m = chain(30);
        let params = PartitionParams {
            subqubo_size: 8,
            ..Default::default()
        };
        let r = solve_partitioned(&m, &TabuSearch, &params).unwrap();
        let bests: Vec<f64> = r.trace.rows.iter().map(|t| t.best_energy.unwrap()).collect();
        assert!(bests.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(*bests.last().unwrap(), r.energy);
        assert_eq!(m.energy(&r.assignment).unwrap(), r.energy);
    }

    #[test]
    fn rejects_tiny_blocks() {
        let params = PartitionParams {
            subqubo_size: 1,
            ..Default::default()
        };
        assert!(matches!(
            solve_partitioned(&chain(3), &TabuSearch, &params),
            Err(PartitionError::Params(_))
        ));
    }

    #[test]
    fn backend_errors_carry_iteration() {
        struct Failing;
        impl Sampler for Failing {
            fn name(&self) -> &'static str {
                "failing"
            }
            fn sample(
                &self,
                _: &QuboModel,
                _: &SamplerConfig,
                _: Option<&Assignment>,
            ) -> Result<crate::qubo::SampleSet, SamplerError> {
                Err(SamplerError::Remote("down".into()))
            }
        }
        let err = solve_partitioned(&chain(5), &Failing, &PartitionParams::default()).unwrap_err();
        assert!(matches!(err, PartitionError::Backend { iteration: 1, .. }));
    }
}
