#![no_main]

use libfuzzer_sys::fuzz_target;
use vit_core::io::read_spectrum_csv;

fuzz_target!(|data: &[u8]| {
    let _ = read_spectrum_csv(data);
});
