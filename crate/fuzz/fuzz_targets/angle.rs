#![no_main]
use libfuzzer_sys::fuzz_target;
use rotkey_cli::range::Angle;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(a) = s.parse::<Angle>() {
            assert!(a.0.is_finite());
        }
    }
});
