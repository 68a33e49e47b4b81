#![no_main]

use libfuzzer_sys::fuzz_target;
use splinesketch::{deserialize, serialize};

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = deserialize(data) {
        s.check_invariants().unwrap();
        let bytes = serialize(&s).unwrap();
        let again = deserialize(&bytes).unwrap();
        assert_eq!(serialize(&again).unwrap(), bytes);
        let _ = s.rank(0.0);
    }
});
