#![no_main]

use castshadow::config::BenchConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(config) = BenchConfig::parse(text, "fuzz") {
        let echoed = BenchConfig::parse(&config.to_text(), "echo").expect("echo parses");
        assert_eq!(echoed, config);
    }
});
