#![no_main]

use castshadow::imaging::io::decode_frame;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|bytes: &[u8]| {
    if let Ok(frame) = decode_frame(bytes) {
        assert_eq!(frame.as_raw().len(), frame.width() * frame.height() * 3);
    }
});
