use std::collections::BinaryHeap;

use super::{Couplings, Sampler, SamplerConfig, SamplerError};
use crate::qubo::{Assignment, QuboModel, SampleSet};

pub const DEFAULT_BRUTE_FORCE_CAP: usize = 24;

/// Exhaustive enumeration; keeps the `num_reads` lowest-energy assignments.
#[derive(Clone, Copy, Debug)]
pub struct BruteForce {
    pub max_vars: usize,
}

impl Default for BruteForce {
    fn default() -> Self {
        BruteForce {
            max_vars: DEFAULT_BRUTE_FORCE_CAP,
        }
    }
}

impl Sampler for BruteForce {
    fn name(&self) -> &'static str {
        "bruteforce"
    }

    fn capacity(&self) -> Option<usize> {
        Some(self.max_vars)
    }

    fn sample(
        &self,
        model: &QuboModel,
        cfg: &SamplerConfig,
        _initial: Option<&Assignment>,
    ) -> Result<SampleSet, SamplerError> {
        enumerate(model, self.max_vars, cfg.num_reads.max(1))
    }
}

/// Exact minimum over all `2ⁿ` assignments with the default cap.
pub fn brute_force(model: &QuboModel) -> Result<SampleSet, SamplerError> {
    enumerate(model, DEFAULT_BRUTE_FORCE_CAP, SamplerConfig::default().num_reads)
}

#[derive(PartialEq)]
struct Kept {
    energy: f64,
    state: u64,
}

impl Eq for Kept {}

impl PartialOrd for Kept {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Kept {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.energy
            .total_cmp(&other.energy)
            .then(self.state.cmp(&other.state))
    }
}

fn enumerate(model: &QuboModel, cap: usize, keep: usize) -> Result<SampleSet, SamplerError> {
    let n = model.num_vars();
    if n > cap.min(63) {
        return Err(SamplerError::Capacity {
            num_vars: n,
            cap: cap.min(63),
        });
    }
    let couplings = Couplings::new(model);
    let mut bits = vec![false; n];
    let mut fields = couplings.fields(&bits);
    let mut energy = model.offset();
    let mut state = 0u64;
    let mut heap = BinaryHeap::with_capacity(keep + 1);
    heap.push(Kept { energy, state });

    // Gray-code walk: step k flips the lowest set bit of k.
    let total = 1u64 << n;
    for k in 1..total {
        let i = k.trailing_zeros() as usize;
        energy += couplings.flip(&mut bits, &mut fields, i);
        state ^= 1 << i;
        if heap.len() < keep {
            heap.push(Kept { energy, state });
        } else if energy < heap.peek().map_or(f64::INFINITY, |w| w.energy) {
            heap.pop();
            heap.push(Kept { energy, state });
        }
    }

    let assignments = heap.into_iter().map(|k| {
        Assignment::from((0..n).map(|i| k.state >> i & 1 == 1).collect::<Vec<_>>())
    });
    Ok(SampleSet::from_assignments(model, assignments)?)
}
