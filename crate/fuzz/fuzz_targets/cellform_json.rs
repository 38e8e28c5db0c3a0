#![no_main]

use hyq::cellform::CellFormationInstance;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(inst) = CellFormationInstance::from_json(text) {
        CellFormationInstance::from_json(&inst.to_json()).expect("round trip");
    }
});
