#![no_main]

use libfuzzer_sys::fuzz_target;
use vit_core::io::{read_pulse_csv, write_pulse_csv};

fuzz_target!(|data: &[u8]| {
    if let Ok(pulse) = read_pulse_csv(data) {
        let mut out = Vec::new();
        write_pulse_csv(&mut out, &pulse).unwrap();
        let again = read_pulse_csv(out.as_slice()).unwrap();
        assert_eq!(again.samples, pulse.samples);
    }
});
