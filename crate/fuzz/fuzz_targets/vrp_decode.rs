#![no_main]

use hyq::qubo::Assignment;
use hyq::vrp::{decode_routes, VrpInstance};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let inst = VrpInstance {
        vertices: 4,
        vehicles: 2,
        cost: vec![vec![1.0; 4]; 4],
        time: vec![vec![1.0; 4]; 4],
    };
    let bits: Vec<bool> = (0..inst.num_vars()).map(|k| data.get(k / 8).is_some_and(|b| (b >> (k % 8)) & 1 == 1)).collect();
    let a = Assignment::from(bits);
    if let Ok(plan) = decode_routes(&inst, &a) {
        assert_eq!(decode_routes(&inst, &plan.encode(&inst)).unwrap(), plan);
    }
});
