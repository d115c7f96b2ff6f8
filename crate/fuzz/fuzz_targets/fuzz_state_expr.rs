//! Fuzz the ket-expression parser.
//!
//! `parse_state_expr` is exercised against both register shapes the CLI
//! exposes (spin-1 and spin-1/2 chains of three plaquettes).  Every input
//! must either parse into a normalised state or come back as an error;
//! panics and slicing outside `char` boundaries are bugs.

#![no_main]

use bubblechain::config::parse_state_expr;
use bubblechain::qudit::MixedRadixRegister;
use libfuzzer_sys::fuzz_target;
use std::sync::OnceLock;

static REGISTERS: OnceLock<(MixedRadixRegister, MixedRadixRegister)> = OnceLock::new();

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let (one, half) = REGISTERS.get_or_init(|| {
            (
                MixedRadixRegister::uniform(8, 3).expect("8^3 register"),
                MixedRadixRegister::uniform(4, 3).expect("4^3 register"),
            )
        });
        let _ = parse_state_expr(one, text);
        let _ = parse_state_expr(half, text);
    }
});
