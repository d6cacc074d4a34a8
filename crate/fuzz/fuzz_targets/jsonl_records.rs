//! Fuzz target for the JSONL readers: traces, emission logs, references.

#![no_main]

use libfuzzer_sys::fuzz_target;
use simulst_core::jsonl;
use simulst_core::metrics::{validate_references, ReferenceSegment};
use simulst_core::pipeline::TraceEvent;
use simulst_core::types::{check_emission_log, EmissionRecord};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let _ = jsonl::parse::<TraceEvent>(text, "fuzz");
    if let Ok(log) = jsonl::parse::<EmissionRecord>(text, "fuzz") {
        let _ = check_emission_log(&log);
    }
    if let Ok(refs) = jsonl::parse::<ReferenceSegment>(text, "fuzz") {
        let _ = validate_references(&refs);
    }
});
