#![no_main]

use castshadow::tracking::{parse_tracks, write_tracks};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(tracks) = parse_tracks(text, "fuzz") {
        let again = parse_tracks(&write_tracks(&tracks), "echo").expect("written tracks parse");
        assert_eq!(again, tracks);
    }
});
