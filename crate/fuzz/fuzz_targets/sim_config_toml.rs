#![no_main]

use libfuzzer_sys::fuzz_target;
use lks_core::config::SimConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = SimConfig::from_toml(text);
    }
});
