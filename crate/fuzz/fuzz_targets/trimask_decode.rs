#![no_main]

use castshadow::imaging::io::{decode_trimask, encode_trimask};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|bytes: &[u8]| {
    if let Ok(mask) = decode_trimask(bytes) {
        assert_eq!(decode_trimask(&encode_trimask(&mask)).expect("re-encoded mask decodes"), mask);
    }
});
