#![no_main]

use libfuzzer_sys::fuzz_target;
use rowo_core::surface::ReplScope;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let scope = ReplScope::default();
        let _ = rowo_core::surface::parse_repl(text, &scope);
    }
});
