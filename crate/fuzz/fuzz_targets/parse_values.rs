#![no_main]

use libfuzzer_sys::fuzz_target;
use splinesketch::{parse_values, write_values};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(values) = parse_values(text) {
        assert!(values.iter().all(|v| v.is_finite()));
        let back = parse_values(&write_values(&values)).unwrap();
        assert_eq!(back.len(), values.len());
        assert!(back.iter().zip(&values).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
});
