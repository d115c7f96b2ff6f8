//! Fuzz the scenario-configuration parser.
//!
//! `ScenarioConfig::from_toml_str` must reject arbitrary input with a
//! structured error and never panic, whatever bytes arrive.

#![no_main]

use bubblechain::config::ScenarioConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = ScenarioConfig::from_toml_str(text);
    }
});
