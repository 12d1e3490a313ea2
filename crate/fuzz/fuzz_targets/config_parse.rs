#![no_main]

use libfuzzer_sys::fuzz_target;
use mfs_core::harness::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = ExperimentConfig::parse(text) {
            // Anything that parses must also validate and build its pieces.
            cfg.validate().expect("parse implies valid");
            let _ = cfg.kernel();
            let _ = cfg.seed_list();
        }
    }
});
