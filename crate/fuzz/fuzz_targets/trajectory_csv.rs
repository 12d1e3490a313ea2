#![no_main]

use libfuzzer_sys::fuzz_target;
use mfs_core::harness::{read_trajectory_csv, trajectory_csv};

fuzz_target!(|data: &[u8]| {
    if let Ok(record) = read_trajectory_csv(data) {
        // Accepted input must survive a write/read round trip unchanged.
        let text = trajectory_csv(&record).expect("serialise accepted record");
        let again = read_trajectory_csv(&text[..]).expect("re-read own output");
        assert_eq!(record.times, again.times);
        assert_eq!(record.states, again.states);
    }
});
