use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{Couplings, Sampler, SamplerConfig, SamplerError};
use crate::qubo::{Assignment, QuboModel, SampleSet};

/// Single-flip Metropolis annealing with a geometric inverse-temperature schedule.
#[derive(Clone, Copy, Debug, Default)]
pub struct SimulatedAnnealing;

impl Sampler for SimulatedAnnealing {
    fn name(&self) -> &'static str {
        "sa"
    }

    fn sample(
        &self,
        model: &QuboModel,
        cfg: &SamplerConfig,
        _initial: Option<&Assignment>,
    ) -> Result<SampleSet, SamplerError> {
        simulated_anneal(model, cfg)
    }
}

/// Runs `cfg.num_reads` independent restarts. Read `r` draws from the ChaCha
/// stream `r` of `cfg.seed`, so reads are order-independent.
pub fn simulated_anneal(model: &QuboModel, cfg: &SamplerConfig) -> Result<SampleSet, SamplerError> {
    cfg.validate()?;
    let couplings = Couplings::new(model);
    let betas = schedule(cfg);
    let reads: Vec<Assignment> = (0..cfg.num_reads)
        .into_par_iter()
        .map(|read| anneal_once(&couplings, &betas, cfg.seed, read as u64))
        .collect();
    Ok(SampleSet::from_assignments(model, reads)?)
}

fn schedule(cfg: &SamplerConfig) -> Vec<f64> {
    let steps = cfg.sa_sweeps;
    if steps == 1 {
        return vec![cfg.sa_beta_final];
    }
    let ratio = cfg.sa_beta_final / cfg.sa_beta_initial;
    (0..steps)
        .map(|s| cfg.sa_beta_initial * ratio.powf(s as f64 / (steps - 1) as f64))
        .collect()
}

fn anneal_once(couplings: &Couplings, betas: &[f64], seed: u64, stream: u64) -> Assignment {
    let n = couplings.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut bits: Vec<bool> = (0..n).map(|_| rng.random()).collect();
    let mut fields = couplings.fields(&bits);
    let mut energy = 0.0;
    let mut best_energy = 0.0;
    let mut best = bits.clone();
    for &beta in betas {
        for i in 0..n {
            let delta = if bits[i] { -fields[i] } else { fields[i] };
            if delta <= 0.0 || rng.random::<f64>() < (-beta * delta).exp() {
                energy += couplings.flip(&mut bits, &mut fields, i);
                if energy < best_energy {
                    best_energy = energy;
                    best.copy_from_slice(&bits);
                }
            }
        }
    }
    Assignment::from(best)
}
