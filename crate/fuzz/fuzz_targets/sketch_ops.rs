#![no_main]

//! Interprets the input as a small program of updates, merges, flushes,
//! queries and resizes over two sketches and checks the invariants hold.

use libfuzzer_sys::fuzz_target;
use splinesketch::{deserialize, serialize, Sketch, SketchConfig};

fn value(b: &[u8]) -> f64 {
    let mut w = [0u8; 8];
    w[..b.len()].copy_from_slice(b);
    let v = f64::from_le_bytes(w);
    if v.is_finite() { v } else { (w[0] as f64) - 128.0 }
}

fuzz_target!(|data: &[u8]| {
    if data.len() < 2 {
        return;
    }
    let k = 6 + (data[0] as usize % 40);
    let mg = data[1] & 1 == 1;
    let mut a = Sketch::new(SketchConfig::new(k).with_mg(mg)).unwrap();
    let mut b = Sketch::new(SketchConfig::new(6 + data[1] as usize % 20).with_mg(!mg)).unwrap();
    let mut n = 0u64;
    let mut rest = &data[2..];
    while let Some((&op, tail)) = rest.split_first() {
        rest = tail;
        match op % 8 {
            0..=2 => {
                let take = rest.len().min(8);
                let x = value(&rest[..take]);
                rest = &rest[take..];
                let copies = 1 + (op as usize >> 3) * 8;
                for _ in 0..copies {
                    a.update(x).unwrap();
                }
                n += copies as u64;
            }
            3 => {
                for i in 0..(op as u64) * 4 {
                    b.update(i as f64 * 0.25).unwrap();
                }
            }
            4 => {
                n += b.n();
                a.merge_into(&b);
                assert_eq!(a.n(), n);
            }
            5 => {
                a.flush();
                a.check_invariants().unwrap();
                if let Ok(bytes) = serialize(&a) {
                    let back = deserialize(&bytes).unwrap();
                    assert_eq!(serialize(&back).unwrap(), bytes);
                }
            }
            6 => {
                if n > 0 {
                    let q = (op as f64 + 1.0) / 256.0;
                    let x = a.quantile(q).unwrap();
                    assert!(a.min().unwrap() <= x && x <= a.max().unwrap());
                }
            }
            _ => {
                if a.is_initialized() {
                    let _ = a.resize(6 + (op as usize >> 3));
                    a.check_invariants().unwrap();
                }
            }
        }
        let r = a.rank(0.0);
        assert!((0.0..=n as f64).contains(&r));
    }
    a.flush();
    a.check_invariants().unwrap();
    assert_eq!(a.n(), n);
});
