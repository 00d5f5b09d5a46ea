#![no_main]

use libfuzzer_sys::fuzz_target;
use vit_core::io::read_points_csv;

fuzz_target!(|data: &[u8]| {
    if let Ok(rows) = read_points_csv(data) {
        assert!(rows.iter().all(|r| r.eta_eff_err > 0.0));
    }
});
