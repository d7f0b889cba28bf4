#![no_main]

use camlink::synth::DatasetManifest;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = DatasetManifest::from_json_slice(data) {
        let _ = m.pair_stats();
        let text = m.to_json().expect("valid manifest serializes");
        let back = DatasetManifest::from_json_slice(text.as_bytes()).expect("round trip");
        assert_eq!(back, m);
    }
});
