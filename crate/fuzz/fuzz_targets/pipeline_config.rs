//! Fuzz target for pipeline config parsing and validation.

#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;
use simulst_core::pipeline::PipelineConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = PipelineConfig::parse(text, Path::new("/cfg")) {
            let _ = cfg.validate();
        }
    }
});
