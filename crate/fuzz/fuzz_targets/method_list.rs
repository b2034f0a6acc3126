#![no_main]

use castshadow::methods::Method;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|list: &str| {
    if let Ok(methods) = Method::parse_list(list) {
        assert!(!methods.is_empty());
        let joined: Vec<&str> = methods.iter().map(|m| m.name()).collect();
        assert!(Method::parse_list(&joined.join(",")).is_ok());
    }
});
