//! Fuzz target for server-side request decoding.
//!
//! Anything that decodes must re-encode to a line that decodes to the same
//! request.

#![no_main]

use libfuzzer_sys::fuzz_target;
use simulst_core::backends::wire::{self, WireRequest};

fuzz_target!(|data: &[u8]| {
    let Ok(line) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(req) = wire::decode_request(line) else {
        return;
    };
    let again = match &req {
        WireRequest::Asr(r) => wire::decode_request(&wire::encode_asr_request(r)),
        WireRequest::Mt(r) => wire::decode_request(&wire::encode_mt_request(r)),
    };
    assert_eq!(again.expect("re-encoded request decodes"), req);
});
