#![no_main]

use camlink_cli::Settings;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(settings) = Settings::from_toml_str(text) else {
        return;
    };
    let _ = settings.schemes();
    let _ = settings.tau();
    let _ = settings.protocol_params();
    if let Ok(Some(crop)) = settings.crop() {
        let _ = settings.scheme_config(crop);
    }
    let again = Settings::from_toml_str(&settings.to_toml_string()).expect("round trip");
    // NaN never compares equal; everything else must survive.
    if format!("{again:?}") == format!("{settings:?}") {
        return;
    }
    assert_eq!(again, settings);
});
