//! Fuzz target for abbreviation list parsing and sentence-end detection.

#![no_main]

use libfuzzer_sys::fuzz_target;
use simulst_core::textnorm::SentenceSplitter;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(splitter) = SentenceSplitter::parse_abbreviations(text) {
        let words: Vec<&str> = text.split_whitespace().collect();
        let _ = splitter.detect_sentence_end(&words, 0);
    }
});
