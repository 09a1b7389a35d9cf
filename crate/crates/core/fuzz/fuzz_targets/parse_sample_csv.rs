#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(sample) = mvsens::pickfreeze::parse_sample_csv(text) else {
        return;
    };
    if let Ok(s) = mvsens::estimate_index(&sample) {
        assert!(s.is_finite());
    }
    let mut out = Vec::new();
    mvsens::pickfreeze::write_sample_csv(&sample, &mut out).unwrap();
    let again = mvsens::pickfreeze::parse_sample_csv(std::str::from_utf8(&out).unwrap()).unwrap();
    assert_eq!(again, sample);
});
