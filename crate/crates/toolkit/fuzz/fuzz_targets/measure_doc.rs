#![no_main]

use libfuzzer_sys::fuzz_target;
use wolff_toolkit::task::parse_measure_spec;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        // File references are disabled: the parser must reject them cleanly.
        let _ = parse_measure_spec(text, None);
    }
});
