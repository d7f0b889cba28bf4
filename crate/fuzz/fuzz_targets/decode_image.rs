#![no_main]

use camlink::imaging::{decode_image, ingest, to_luminance};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(raster) = decode_image(data) else {
        return;
    };
    if let Ok(grid) = to_luminance(&raster) {
        assert!(grid.values().iter().all(|v| (0.0..=255.0).contains(v)));
    }
    let _ = ingest(&raster, (32, 32));
});
