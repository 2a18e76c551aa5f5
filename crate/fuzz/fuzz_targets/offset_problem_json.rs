#![no_main]

use libfuzzer_sys::fuzz_target;
use scpa::offsets::OffsetProblem;

// Problem files name intervals and per-region member sets; construction must
// reject unknown members and oversized hyperperiods instead of panicking.
fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(problem) = OffsetProblem::from_json_str(text) {
            let _ = problem.to_json_string();
        }
    }
});
