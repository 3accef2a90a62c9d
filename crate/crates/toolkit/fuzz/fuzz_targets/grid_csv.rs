#![no_main]

use libfuzzer_sys::fuzz_target;
use wolff_toolkit::task::parse_grid_csv;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_grid_csv(text, 2);
        let _ = parse_grid_csv(text, 3);
    }
});
