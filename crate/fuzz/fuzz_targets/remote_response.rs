#![no_main]

use hyq::qubo::QuboModel;
use hyq::sampler::parse_remote_response;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let mut m = QuboModel::new(3);
    m.add_linear(0, -1.0);
    m.add_linear(2, 0.5);
    m.add_quadratic(0, 1, 2.0);
    if let Ok(set) = parse_remote_response(&m, text) {
        for s in set.iter() {
            let e = m.energy(&s.assignment).unwrap();
            assert!((e - s.energy).abs() <= 1e-6 * (1.0 + e.abs()));
        }
    }
});
