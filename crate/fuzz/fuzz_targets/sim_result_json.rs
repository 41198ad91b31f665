#![no_main]
use libfuzzer_sys::fuzz_target;
use rotkey::montecarlo::SimResult;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(result) = SimResult::from_json(s) {
        let c = result.counts;
        assert!(c.conclusive_errors <= c.conclusive && c.conclusive <= c.detected && c.detected <= c.pulses);
        assert_eq!(SimResult::from_json(&result.to_json()).unwrap(), result);
    }
});
