#![no_main]

use camlink::identity::ScoreMatrix;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = ScoreMatrix::from_csv_slice(data) {
        let text = m.to_csv_string().expect("matrix writes");
        let back = ScoreMatrix::from_csv_slice(text.as_bytes()).expect("round trip");
        assert_eq!(back, m);
    }
});
