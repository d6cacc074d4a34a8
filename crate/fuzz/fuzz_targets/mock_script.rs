//! Fuzz target for mock backend script parsing.

#![no_main]

use libfuzzer_sys::fuzz_target;
use simulst_core::backends::mock::MockScript;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = MockScript::parse(text);
    }
});
