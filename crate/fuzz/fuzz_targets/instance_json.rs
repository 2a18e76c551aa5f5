#![no_main]

use libfuzzer_sys::fuzz_target;
use scpa::model::Instance;

// Parsing and validating arbitrary instance JSON must never panic.
fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(instance) = Instance::from_json_str(text) {
            let report = instance.validate();
            let _ = report.is_ok();
            let _ = instance.to_json_string();
        }
    }
});
