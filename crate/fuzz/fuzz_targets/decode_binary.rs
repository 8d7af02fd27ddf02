#![no_main]

use libfuzzer_sys::fuzz_target;
use lks_core::fieldio::{decode_binary, encode_binary};

fuzz_target!(|data: &[u8]| {
    if let Ok((h, f)) = decode_binary(data) {
        let again = encode_binary(&f, h.epsilon, h.theta).expect("re-encode of a decoded field");
        let (h2, f2) = decode_binary(&again).expect("decode of a re-encoded field");
        assert_eq!(h2.boundary, h.boundary);
        assert_eq!(f2.values.len(), f.values.len());
    }
});
