#![no_main]

use hyq::qubo::{Assignment, QuboModel};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(m) = QuboModel::from_json(text) else { return };
    // Anything accepted must survive a round trip.
    let back = QuboModel::from_json(&m.to_json()).expect("round trip");
    assert_eq!(back.num_vars(), m.num_vars());
    if m.num_vars() <= 4096 {
        let a = Assignment::zeros(m.num_vars());
        let _ = m.energy(&a);
    }
});
