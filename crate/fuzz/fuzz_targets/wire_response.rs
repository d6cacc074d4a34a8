//! Fuzz target for client-side response decoding, both backends.

#![no_main]

use libfuzzer_sys::fuzz_target;
use simulst_core::backends::wire;

fuzz_target!(|data: &[u8]| {
    let Ok(line) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(resp) = wire::decode_asr_response(line) {
        let again = wire::decode_asr_response(&wire::encode_asr_response(&resp)).expect("round trip");
        assert_eq!(again, resp);
    }
    if let Ok(resp) = wire::decode_mt_response(line) {
        let again = wire::decode_mt_response(&wire::encode_mt_response(&resp)).expect("round trip");
        assert_eq!(again, resp);
    }
});
