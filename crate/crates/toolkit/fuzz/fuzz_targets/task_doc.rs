#![no_main]

use std::path::PathBuf;

use libfuzzer_sys::fuzz_target;
use wolff_toolkit::task::TaskDocument;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = TaskDocument::parse(text, PathBuf::from("."));
    }
});
