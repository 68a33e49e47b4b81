//! Binary sketch format and plain-text value files.
//!
//! Layout, little-endian:
//!
//! ```text
//! "SPSK" | version u8 | flags u8 | k u32 | n u64
//! k thresholds f64 | k counters f64
//! [flags & 1] l u32 | l x (item f64, inserted f64)
//! ```

use crate::error::{FormatError, Result, SketchError};
use crate::heavy_hitters::HeavyCounts;
use crate::sketch::{Sketch, SketchConfig};

pub const MAGIC: [u8; 4] = *b"SPSK";
pub const VERSION: u8 = 1;
pub const FLAG_HEAVY_HITTERS: u8 = 1;
const HEADER: usize = 18;

/// Size in bytes of a sketch with `k` buckets and, optionally, `heavy`
/// heavy-hitter records.
pub fn serialized_size(k: usize, heavy: Option<usize>) -> usize {
    HEADER + 16 * k + heavy.map_or(0, |l| 4 + 16 * l)
}

/// Encodes a flushed, initialized sketch.
pub fn serialize(s: &Sketch) -> Result<Vec<u8>> {
    if !s.is_initialized() {
        return Err(SketchError::Uninitialized);
    }
    if s.unbucketed_mass() > 0 {
        return Err(SketchError::Unflushed);
    }
    let k = s.thresholds.len();
    let heavy = s.mg.as_ref().map(|mg| mg.entries());
    let mut out = Vec::with_capacity(serialized_size(k, heavy.as_ref().map(Vec::len)));
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(if heavy.is_some() { FLAG_HEAVY_HITTERS } else { 0 });
    out.extend_from_slice(&(k as u32).to_le_bytes());
    out.extend_from_slice(&s.n.to_le_bytes());
    for &t in &s.thresholds {
        out.extend_from_slice(&t.to_le_bytes());
    }
    for &b in &s.counters {
        out.extend_from_slice(&b.to_le_bytes());
    }
    if let Some(entries) = heavy {
        out.extend_from_slice(&(entries.len() as u32).to_le_bytes());
        for (x, c) in entries {
            out.extend_from_slice(&x.to_le_bytes());
            out.extend_from_slice(&(c.inserted as f64).to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn need(&self, len: usize) -> Result<(), FormatError> {
        let available = self.bytes.len();
        let needed = self.pos.saturating_add(len);
        if needed > available {
            return Err(FormatError::Truncated { needed, available });
        }
        Ok(())
    }

    fn take<const N: usize>(&mut self) -> [u8; N] {
        let mut a = [0u8; N];
        a.copy_from_slice(&self.bytes[self.pos..self.pos + N]);
        self.pos += N;
        a
    }

    fn f64(&mut self) -> f64 {
        f64::from_le_bytes(self.take())
    }
}

/// Decodes a sketch. The result has an empty buffer, no protected
/// thresholds and a fresh epoch.
pub fn deserialize(bytes: &[u8]) -> Result<Sketch> {
    Ok(decode(bytes)?)
}

fn decode(bytes: &[u8]) -> Result<Sketch, FormatError> {
    let mut r = Reader { bytes, pos: 0 };
    r.need(HEADER)?;
    let magic: [u8; 4] = r.take();
    if magic != MAGIC {
        return Err(FormatError::BadMagic(magic));
    }
    let [version] = r.take();
    if version != VERSION {
        return Err(FormatError::UnsupportedVersion(version));
    }
    let [flags] = r.take();
    if flags & !FLAG_HEAVY_HITTERS != 0 {
        return Err(FormatError::UnknownFlags(flags));
    }
    let k32 = u32::from_le_bytes(r.take());
    if k32 < 6 {
        return Err(FormatError::BucketCount(k32));
    }
    let n = u64::from_le_bytes(r.take());
    let k = k32 as usize;
    r.need(k.saturating_mul(16))?;

    let thresholds: Vec<f64> = (0..k).map(|_| r.f64()).collect();
    for (i, &t) in thresholds.iter().enumerate() {
        if !t.is_finite() {
            return Err(FormatError::NonFiniteThreshold { index: i });
        }
        if i > 0 && !(t > thresholds[i - 1]) {
            return Err(FormatError::NonMonotoneThresholds { index: i });
        }
    }
    let counters: Vec<f64> = (0..k).map(|_| r.f64()).collect();
    if let Some(i) = counters.iter().position(|b| !(b.is_finite() && *b >= 0.0)) {
        return Err(FormatError::BadCounter { index: i });
    }

    let mut heavy = Vec::new();
    if flags & FLAG_HEAVY_HITTERS != 0 {
        r.need(4)?;
        let l = u32::from_le_bytes(r.take()) as usize;
        r.need(l.saturating_mul(16))?;
        for i in 0..l {
            let x = r.f64();
            let c = r.f64();
            let ordered = heavy.last().is_none_or(|&(p, _): &(f64, u64)| x > p);
            if !x.is_finite() || !ordered || !(c >= 1.0 && c <= u64::MAX as f64 && c.fract() == 0.0) {
                return Err(FormatError::BadHeavyHitter { index: i });
            }
            heavy.push((x + 0.0, c as u64));
        }
    }
    if r.pos != bytes.len() {
        return Err(FormatError::TrailingBytes(bytes.len() - r.pos));
    }

    let stored = counters.iter().sum::<f64>() + heavy.iter().map(|p| p.1 as f64).sum::<f64>();
    if !((stored - n as f64).abs() <= 1e-9 * (n as f64).max(1.0)) {
        return Err(FormatError::MassMismatch { stored, n });
    }

    let mut config = SketchConfig::new(k);
    config.with_mg = flags & FLAG_HEAVY_HITTERS != 0;
    config.mg_capacity = k.max(heavy.len() + 1);
    let mut s = Sketch::new(config).expect("decoded configuration is valid");
    let zeta = thresholds
        .iter()
        .chain(heavy.iter().map(|p| &p.0))
        .map(|x| x.abs())
        .filter(|&a| a > 0.0)
        .fold(f64::INFINITY, f64::min);
    s.zeta = zeta;
    s.n = n;
    while s.epoch_end < n {
        s.epoch_end = (s.epoch_end as f64 * s.config.epoch_factor).ceil() as u64;
    }
    if let Some(mg) = &mut s.mg {
        for (x, c) in heavy {
            mg.restore(x, HeavyCounts { count: c, inserted: c });
        }
    }
    s.protected = vec![false; k];
    s.thresholds = thresholds;
    s.counters = counters;
    s.rebuild_interpolant();
    Ok(s)
}

/// Parses one number per line. Blank lines and lines starting with `#` are
/// skipped; anything else must be a finite number.
pub fn parse_values(text: &str) -> Result<Vec<f64>, FormatError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        match t.parse::<f64>() {
            Ok(v) if v.is_finite() => out.push(v),
            _ => {
                return Err(FormatError::BadValue { line: i + 1, text: t.chars().take(64).collect() })
            }
        }
    }
    Ok(out)
}

/// Writes one number per line with round-trip precision.
pub fn write_values(values: &[f64]) -> String {
    let mut s = String::with_capacity(values.len() * 20);
    for v in values {
        s.push_str(&format!("{v:?}\n"));
    }
    s
}
