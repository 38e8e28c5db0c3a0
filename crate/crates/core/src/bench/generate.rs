//! Seeded random instances. Costs and times are uniform integers in 1..=10.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BenchError, Instance, ProblemKind};
use crate::cellform::CellFormationInstance;
use crate::jobshop::{big_u, solve_relaxed, JobShopInstance};
use crate::molconf::ConformationInstance;
use crate::vrp::VrpInstance;

/// Due-date window as a multiple of a job's longest processing time.
pub const DEFAULT_SLACK: f64 = 1.5;
const MAX_WIDENINGS: usize = 10;

fn expect_sizes(kind: ProblemKind, sizes: &[usize], names: &[&str]) -> Result<(), BenchError> {
    if sizes.len() != names.len() || sizes.contains(&0) {
        return Err(BenchError::Sizes(format!(
            "{kind} expects {} positive sizes ({})",
            names.len(),
            names.join(", ")
        )));
    }
    Ok(())
}

/// Sizes: molconf `[beads, side]`, jobshop `[jobs, machines]`, cellform
/// `[parts, machines, cells]`, vrp `[customers, vehicles]`.
pub fn generate_instance(kind: ProblemKind, sizes: &[usize], seed: u64) -> Result<Instance, BenchError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(match kind {
        ProblemKind::Molconf => {
            expect_sizes(kind, sizes, &["beads", "side"])?;
            Instance::Molconf(ConformationInstance::uniform(sizes[1], 1.0, sizes[0], 1.0, 1.0, 1.0))
        }
        ProblemKind::Jobshop => {
            expect_sizes(kind, sizes, &["jobs", "machines"])?;
            Instance::Jobshop(generate_jobshop(&mut rng, sizes[0], sizes[1])?)
        }
        ProblemKind::Cellform => {
            expect_sizes(kind, sizes, &["parts", "machines", "cells"])?;
            Instance::Cellform(generate_cellform(&mut rng, sizes[0], sizes[1], sizes[2]))
        }
        ProblemKind::Vrp => {
            expect_sizes(kind, sizes, &["customers", "vehicles"])?;
            Instance::Vrp(generate_vrp(&mut rng, sizes[0], sizes[1]))
        }
    })
}

fn int(rng: &mut ChaCha8Rng) -> f64 {
    rng.random_range(1..=10) as f64
}

/// Release dates are drawn so that every due date stays within `U`, which
/// keeps `U` a valid big-M for the sequencing constraints.
fn generate_jobshop(rng: &mut ChaCha8Rng, jobs: usize, machines: usize) -> Result<JobShopInstance, BenchError> {
    let cost: Vec<Vec<f64>> = (0..jobs).map(|_| (0..machines).map(|_| int(rng)).collect()).collect();
    let processing: Vec<Vec<f64>> = (0..jobs).map(|_| (0..machines).map(|_| int(rng)).collect()).collect();
    let draws: Vec<f64> = (0..jobs).map(|_| rng.random::<f64>()).collect();
    let mut inst = JobShopInstance {
        jobs,
        machines,
        cost,
        processing,
        release: vec![0.0; jobs],
        due: vec![0.0; jobs],
    };
    let u = big_u(&inst);
    let mut slack = DEFAULT_SLACK;
    for _ in 0..MAX_WIDENINGS {
        for i in 0..jobs {
            let longest = inst.processing[i].iter().copied().fold(0.0, f64::max);
            let window = (slack * longest).ceil().min(u);
            let latest = (u / 2.0).min(u - window).floor();
            inst.release[i] = (draws[i] * (latest + 1.0)).floor().min(latest);
            inst.due[i] = inst.release[i] + window;
        }
        if solve_relaxed(&inst, &[]).map_err(|e| BenchError::Generate(e.to_string()))?.is_some() {
            return Ok(inst);
        }
        slack += 0.5;
    }
    Err(BenchError::Generate("job windows could not be widened to feasibility".into()))
}

fn generate_cellform(rng: &mut ChaCha8Rng, parts: usize, machines: usize, cells: usize) -> CellFormationInstance {
    let grid = |rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
        (0..parts).map(|_| (0..machines).map(|_| int(rng)).collect()).collect()
    };
    let u = grid(rng);
    let o = grid(rng);
    let a = (0..parts)
        .map(|_| (0..machines).map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 }).collect())
        .collect();
    CellFormationInstance {
        parts,
        machines,
        cells,
        c: (0..parts).map(|_| int(rng)).collect(),
        v: (0..parts).map(|_| int(rng)).collect(),
        u,
        o,
        a,
    }
}

fn generate_vrp(rng: &mut ChaCha8Rng, customers: usize, vehicles: usize) -> VrpInstance {
    let n = customers + 1;
    let matrix = |rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| (0..n).map(|j| if i == j { 0.0 } else { int(rng) }).collect())
            .collect()
    };
    let cost = matrix(rng);
    let time = matrix(rng);
    VrpInstance {
        vertices: n,
        vehicles,
        cost,
        time,
    }
}
