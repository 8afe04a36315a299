#![no_main]

use libfuzzer_sys::fuzz_target;

// The parser must never panic on arbitrary program text; on success, the
// printed program must reparse.
fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(program) = rowo_core::surface::parse(text) {
            let printed = rowo_core::surface::print_program(&program);
            let _ = rowo_core::surface::parse(&printed);
        }
    }
});
