#![no_main]

use camlink_cli::Crop;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(crop) = text.parse::<Crop>() {
            assert_eq!(crop.to_string().parse::<Crop>(), Ok(crop));
        }
    }
});
