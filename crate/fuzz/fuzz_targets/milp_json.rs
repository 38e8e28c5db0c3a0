#![no_main]

use hyq::lp::MilpModel;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = MilpModel::from_json(text) {
        MilpModel::from_json(&m.to_json()).expect("round trip");
    }
});
