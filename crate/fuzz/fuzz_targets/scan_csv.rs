#![no_main]

use libfuzzer_sys::fuzz_target;
use vit_core::io::read_scan_csv;

fuzz_target!(|data: &[u8]| {
    if let Ok(blocks) = read_scan_csv(data) {
        assert!(blocks.iter().all(|b| !b.records.is_empty()));
    }
});
