#![no_main]

use hyq::jobshop::JobShopInstance;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(inst) = JobShopInstance::from_json(text) {
        JobShopInstance::from_json(&inst.to_json()).expect("round trip");
    }
});
