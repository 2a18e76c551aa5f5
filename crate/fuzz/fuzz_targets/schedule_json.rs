#![no_main]

use libfuzzer_sys::fuzz_target;
use scpa::model::HomogeneousSchedule;

// Schedule files come from users too; parse, validate, and probe the decision
// rule without panicking. Hyperperiod overflow must surface as an error.
fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(schedule) = HomogeneousSchedule::from_json_str(text) {
            let report = schedule.validate();
            if report.is_ok() {
                let _ = schedule.hyperperiod();
                for t in 1..=16u64 {
                    let _ = schedule.scheduled_at(t);
                }
            }
        }
    }
});
