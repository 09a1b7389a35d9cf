#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(table) = mvsens::tabulated::parse_tabulated_model(text) {
            assert!(table.len() > 0);
        }
    }
});
