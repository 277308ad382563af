//! The config parser must reject arbitrary input gracefully: any byte
//! sequence either parses to a validated config or returns a config error,
//! never panicking.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = hfloer::config::parse_config(text);
    }
});
