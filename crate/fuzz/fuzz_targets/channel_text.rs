#![no_main]

use backcom_ci::channel::{parse_channel_text, write_channel_text};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(ch) = parse_channel_text(text) {
        // Accepted input must survive a write/parse round trip unchanged.
        let again = parse_channel_text(&write_channel_text(&ch)).expect("writer output must parse");
        assert_eq!(format!("{ch:?}"), format!("{again:?}"));
    }
});
