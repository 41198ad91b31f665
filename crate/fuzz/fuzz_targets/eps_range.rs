#![no_main]
use libfuzzer_sys::fuzz_target;
use rotkey_cli::range::{parse_range, MAX_RANGE_POINTS};

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(points) = parse_range(s) {
            assert!(!points.is_empty() && points.len() <= MAX_RANGE_POINTS);
            assert!(points.iter().all(|p| p.is_finite()));
        }
    }
});
