#![no_main]

use libfuzzer_sys::fuzz_target;
use vit_lab::RunConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = RunConfig::parse(text) {
            // anything accepted must survive a round trip
            let again = serde_json::to_string(&cfg).unwrap();
            assert_eq!(RunConfig::parse(&again).unwrap(), cfg);
        }
    }
});
