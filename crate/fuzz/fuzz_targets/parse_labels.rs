#![no_main]
use augsc::dataset::{format_labels, parse_labels};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(labels) = parse_labels(text) {
        assert_eq!(parse_labels(&format_labels(&labels)).unwrap(), labels);
    }
});
