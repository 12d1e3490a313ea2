#![no_main]

use libfuzzer_sys::fuzz_target;
use mfs_core::harness::parse_report;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_report(text);
    }
});
