#![no_main]

use camlink::identity::ScoreMatrix;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = ScoreMatrix::from_json_slice(data) {
        let text = m.to_json().expect("matrix writes");
        assert_eq!(ScoreMatrix::from_json_slice(text.as_bytes()).expect("round trip"), m);
    }
});
