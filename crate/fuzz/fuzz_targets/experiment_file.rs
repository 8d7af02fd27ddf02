#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;
use lks_cli::experiment::{parse_text, ExperimentFile, ScheduleFile};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    for name in ["x.toml", "x.json"] {
        let _ = parse_text::<ExperimentFile>(text, Path::new(name));
        let _ = parse_text::<ScheduleFile>(text, Path::new(name));
    }
});
