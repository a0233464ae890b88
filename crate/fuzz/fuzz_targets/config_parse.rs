#![no_main]

use backcom_ci::harness::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = RunConfig::parse(text) {
        // Anything accepted must also produce a valid sweep description.
        cfg.sweep_config().unwrap().validate().unwrap();
    }
});
