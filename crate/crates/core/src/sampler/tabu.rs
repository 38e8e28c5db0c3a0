use super::{Couplings, Sampler, SamplerConfig, SamplerError};
use crate::qubo::{Assignment, QuboError, QuboModel, SampleSet};

/// Best-improvement single-flip tabu search; starts from the supplied
/// assignment or all zeros.
#[derive(Clone, Copy, Debug, Default)]
pub struct TabuSearch;

impl Sampler for TabuSearch {
    fn name(&self) -> &'static str {
        "tabu"
    }

    fn sample(
        &self,
        model: &QuboModel,
        cfg: &SamplerConfig,
        initial: Option<&Assignment>,
    ) -> Result<SampleSet, SamplerError> {
        match initial {
            Some(a) => tabu_search(model, cfg, a),
            None => tabu_search(model, cfg, &Assignment::zeros(model.num_vars())),
        }
    }
}

/// A variable flipped at move `t` stays tabu through move `t + tenure`.
/// The tenure is capped at `n − 1` so at least one move is always admissible.
/// Moves that reach a new global best ignore tabu status.
pub fn tabu_search(
    model: &QuboModel,
    cfg: &SamplerConfig,
    initial: &Assignment,
) -> Result<SampleSet, SamplerError> {
    cfg.validate()?;
    let n = model.num_vars();
    if initial.len() != n {
        return Err(QuboError::Dimension {
            expected: n,
            got: initial.len(),
        }
        .into());
    }
    if n == 0 {
        return Ok(SampleSet::from_assignments(model, [initial.clone()])?);
    }
    let couplings = Couplings::new(model);
    let tenure = cfg.tabu_tenure.min(n - 1);
    let mut bits = initial.bits().to_vec();
    let mut fields = couplings.fields(&bits);
    let mut energy = 0.0;
    let mut best_energy = 0.0;
    let mut best = bits.clone();
    let mut last_flip: Vec<Option<usize>> = vec![None; n];
    let mut stale = 0usize;
    let mut step = 0usize;
    // Running energies drift; only improvements beyond this count.
    let scale = 1.0 + model.safe_penalty_weight();
    let tol = 1e-12 * scale;

    while stale < cfg.tabu_max_no_improve {
        let mut chosen: Option<(usize, f64)> = None;
        for i in 0..n {
            let delta = if bits[i] { -fields[i] } else { fields[i] };
            let tabu = matches!(last_flip[i], Some(t) if step - t <= tenure);
            let aspires = energy + delta < best_energy - tol;
            if tabu && !aspires {
                continue;
            }
            if chosen.is_none_or(|(_, d)| delta < d) {
                chosen = Some((i, delta));
            }
        }
        let Some((i, _)) = chosen else { break };
        energy += couplings.flip(&mut bits, &mut fields, i);
        last_flip[i] = Some(step);
        step += 1;
        if energy < best_energy - tol {
            best_energy = energy;
            best.copy_from_slice(&bits);
            stale = 0;
        } else {
            stale += 1;
        }
    }
    Ok(SampleSet::from_assignments(model, [Assignment::from(best)])?)
}
