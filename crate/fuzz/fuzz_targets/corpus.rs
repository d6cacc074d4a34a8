//! Fuzz target for bitext corpus parsing. The strict parser must accept
//! exactly the inputs the lenient one finds nothing wrong with.

#![no_main]

use libfuzzer_sys::fuzz_target;
use simulst_core::datagen::{parse_corpus, parse_corpus_lenient};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let lenient = parse_corpus_lenient(text);
    match parse_corpus(text, "fuzz") {
        Ok(docs) => {
            assert!(lenient.malformed.is_empty());
            assert_eq!(docs, lenient.documents);
        }
        Err(_) => assert!(!lenient.malformed.is_empty() || lenient.documents.is_empty()),
    }
});
