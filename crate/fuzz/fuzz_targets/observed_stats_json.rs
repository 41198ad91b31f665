#![no_main]
use libfuzzer_sys::fuzz_target;
use rotkey::channel::ObservedStats;
use rotkey::ProtocolParams;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    for (m, l) in [(4, 1), (4, 2), (7, 3)] {
        let params = ProtocolParams::new(m, l).unwrap();
        if let Ok(stats) = ObservedStats::from_json(&params, s) {
            assert!((0.0..=1.0).contains(&stats.eta_d));
            assert!((-1.0..=1.0).contains(&stats.x));
            assert!(stats.r_bit >= 0.0 && stats.r_bit <= stats.r_con);
        }
    }
});
