use std::time::{Duration, Instant};

use hyq::bench::{generate_instance, run_experiment, ExperimentConfig, Instance, InstanceSource, ProblemKind};
use hyq::molconf::{solve_conformation, ConformationInstance};
use hyq::partition::PartitionParams;
use hyq::sampler::{SamplerConfig, TabuSearch};
use hyq::vrp::{solve_vrp_parametric, VrpLimits};

// Used to spin for minutes when float drift kept resetting the stall counter.
#[test]
fn butane_with_tabu_terminates_with_a_valid_chain() {
    let inst = ConformationInstance::butane();
    let params = PartitionParams {
        sampler: SamplerConfig::with_seed(1),
        ..Default::default()
    };
    let start = Instant::now();
    let sol = solve_conformation(&inst, &TabuSearch, &params).unwrap();
    assert!(start.elapsed() < Duration::from_secs(30));
    assert!(sol.report.is_valid(), "{:?}", sol.report);
    assert_eq!(sol.num_vars, 4 * inst.num_sites());
}

#[test]
fn proportional_costs_give_the_constant_ratio() {
    let Instance::Vrp(mut inst) = generate_instance(ProblemKind::Vrp, &[3, 2], 11).unwrap() else {
        unreachable!()
    };
    for i in 0..inst.vertices {
        for j in 0..inst.vertices {
            inst.cost[i][j] = 2.5 * inst.time[i][j];
        }
    }
    let limits = VrpLimits {
        sampler: SamplerConfig::with_seed(2),
        ..Default::default()
    };
    let run = solve_vrp_parametric(&inst, &TabuSearch, &limits).unwrap();
    assert!((run.lambda - 2.5).abs() < 1e-12);
}

#[test]
fn experiment_writes_every_requested_output() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::new(
        ProblemKind::Jobshop,
        InstanceSource::Generate {
            sizes: vec![4, 2],
            seed: 3,
        },
    );
    cfg.outputs.report = Some(dir.path().join("report.csv"));
    cfg.outputs.trace = Some(dir.path().join("trace.csv"));
    cfg.outputs.gantt = Some(dir.path().join("gantt.txt"));
    cfg.outputs.solution = Some(dir.path().join("solution.json"));
    let out = run_experiment(&cfg).unwrap();
    run_experiment(&cfg).unwrap();
    let report = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert_eq!(report.lines().count(), 3, "header written once");
    assert!(report.starts_with("problem,"));
    for f in ["trace.csv", "gantt.txt", "solution.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    assert_eq!(out.report.binary_vars, 4 * 3 + 4 * 2);
}
