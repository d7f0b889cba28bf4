#![no_main]

use camlink::fingerprint::{decode_fingerprint, encode_fingerprint};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(fp) = decode_fingerprint(data) {
        // Anything accepted must re-encode to the same bytes.
        let again = encode_fingerprint(&fp).expect("decoded fingerprint encodes");
        assert_eq!(again.as_slice(), data);
    }
});
