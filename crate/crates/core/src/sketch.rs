use crate::error::{Result, SketchError};
use crate::heavy_hitters::MisraGries;
use crate::interpolation::{Interpolant, InterpolationKind};

/// Per-bucket score used to pick heuristic splits and joins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum HeuristicKind {
    /// Second derivative of the empirical CDF, scaled by length squared.
    #[default]
    SecondDerivative,
    None,
    Length,
    Counter,
    /// Third derivative of the empirical CDF, scaled by length cubed.
    ThirdDerivative,
}

impl HeuristicKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            HeuristicKind::SecondDerivative => "second_derivative",
            HeuristicKind::None => "none",
            HeuristicKind::Length => "length",
            HeuristicKind::Counter => "counter",
            HeuristicKind::ThirdDerivative => "third_derivative",
        }
    }
}

impl std::str::FromStr for HeuristicKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s {
            "second_derivative" => HeuristicKind::SecondDerivative,
            "none" => HeuristicKind::None,
            "length" => HeuristicKind::Length,
            "counter" => HeuristicKind::Counter,
            "third_derivative" => HeuristicKind::ThirdDerivative,
            other => return Err(format!("unknown heuristic kind {other:?}")),
        })
    }
}

/// Tuning knobs for a [`Sketch`]. [`SketchConfig::new`] fills in defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct SketchConfig {
    /// Target number of buckets, at least 6.
    pub k: usize,
    /// Items buffered between consolidations; at least `k`.
    pub buffer_capacity: usize,
    pub with_mg: bool,
    /// Misra-Gries table size; the table holds up to `mg_capacity - 1` items.
    pub mg_capacity: usize,
    /// Heuristic split threshold ratio, `> 1`.
    pub gamma: f64,
    pub epoch_factor: f64,
    /// Buckets below this fraction of the bucket bound are never split for
    /// heuristic reasons.
    pub min_split_fraction: f64,
    /// A joined bucket may use at most this fraction of the bucket bound.
    pub join_headroom: f64,
    /// Relative bucket-length floor, used without the heavy-hitter filter.
    pub rel_length_delta: f64,
    /// Starting (and per-epoch reset) value of the bucket-bound multiplier.
    pub initial_cb: f64,
    pub heuristic: HeuristicKind,
    pub interpolation: InterpolationKind,
}

impl SketchConfig {
    pub fn new(k: usize) -> Self {
        SketchConfig {
            k,
            buffer_capacity: 16 * k,
            with_mg: false,
            mg_capacity: k,
            gamma: 1.5,
            epoch_factor: 1.25,
            min_split_fraction: 0.01,
            join_headroom: 0.75,
            rel_length_delta: 1e-8,
            initial_cb: 3.0,
            heuristic: HeuristicKind::SecondDerivative,
            interpolation: InterpolationKind::Pchip,
        }
    }

    pub fn with_mg(mut self, on: bool) -> Self {
        self.with_mg = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SketchError::InvalidConfig(m));
        if self.k < 6 {
            return bad(format!("k = {} must be at least 6", self.k));
        }
        if self.buffer_capacity < self.k {
            return bad(format!(
                "buffer capacity {} must be at least k = {}",
                self.buffer_capacity, self.k
            ));
        }
        if !(self.gamma > 1.0) || !self.gamma.is_finite() {
            return bad(format!("gamma = {} must be > 1", self.gamma));
        }
        if !(self.epoch_factor > 1.0) || !self.epoch_factor.is_finite() {
            return bad(format!("epoch factor {} must be > 1", self.epoch_factor));
        }
        if !(self.initial_cb > 1.0) || !self.initial_cb.is_finite() {
            return bad(format!("bucket-bound multiplier {} must be > 1", self.initial_cb));
        }
        if !(0.0..=1.0).contains(&self.join_headroom) || self.join_headroom == 0.0 {
            return bad(format!("join headroom {} must be in (0, 1]", self.join_headroom));
        }
        if !(0.0..1.0).contains(&self.min_split_fraction) {
            return bad(format!("min split fraction {} must be in [0, 1)", self.min_split_fraction));
        }
        if !(self.rel_length_delta > 0.0) || self.rel_length_delta >= 0.5 {
            return bad(format!("relative length delta {} must be in (0, 0.5)", self.rel_length_delta));
        }
        if self.with_mg && self.mg_capacity < 2 {
            return bad(format!("mg capacity {} must be at least 2", self.mg_capacity));
        }
        Ok(())
    }
}

/// Counters describing what the sketch has done so far.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SketchStats {
    pub consolidations: u64,
    pub epochs: u64,
    pub splits: u64,
    pub joins: u64,
    pub cb_doublings: u64,
    pub cb_doublings_this_epoch: u64,
    pub max_cb_doublings_per_epoch: u64,
    /// Times every joinable candidate was protected and protection had to be
    /// dropped early to make room for a join.
    pub protection_resets: u64,
    /// Consolidations that stopped at the iteration ceiling.
    pub iteration_cap_hits: u64,
}

/// Mergeable streaming quantile sketch with `k` adaptive buckets.
///
/// Bucket 0 is the point mass at the minimum seen; bucket `i >= 1` counts
/// items in `(thresholds[i-1], thresholds[i]]`. Rank estimates between
/// thresholds come from a monotone cubic over the prefix sums.
#[derive(Debug, Clone)]
pub struct Sketch {
    pub(crate) config: SketchConfig,
    pub(crate) k: usize,
    pub(crate) thresholds: Vec<f64>,
    pub(crate) counters: Vec<f64>,
    pub(crate) protected: Vec<bool>,
    pub(crate) buffer: Vec<f64>,
    /// Items already past the heavy-hitter filter but not yet in buckets,
    /// ascending with distinct values.
    pub(crate) pending: Vec<(f64, u64)>,
    pub(crate) n: u64,
    pub(crate) epoch_end: u64,
    pub(crate) cb: f64,
    pub(crate) zeta: f64,
    pub(crate) mg: Option<MisraGries>,
    pub(crate) interp: Option<Interpolant>,
    pub(crate) stats: SketchStats,
}

impl Sketch {
    pub fn new(config: SketchConfig) -> Result<Self> {
        config.validate()?;
        let mg = config.with_mg.then(|| MisraGries::new(config.mg_capacity));
        Ok(Sketch {
            k: config.k,
            thresholds: Vec::new(),
            counters: Vec::new(),
            protected: Vec::new(),
            buffer: Vec::with_capacity(config.buffer_capacity),
            pending: Vec::new(),
            n: 0,
            epoch_end: config.buffer_capacity as u64,
            cb: config.initial_cb,
            zeta: f64::INFINITY,
            mg,
            interp: None,
            stats: SketchStats::default(),
            config,
        })
    }

    /// Sketch with `k` buckets and default settings.
    pub fn with_k(k: usize) -> Result<Self> {
        Sketch::new(SketchConfig::new(k))
    }

    pub fn config(&self) -> &SketchConfig {
        &self.config
    }

    /// Current target bucket count.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Total number of items summarized.
    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn is_initialized(&self) -> bool {
        !self.thresholds.is_empty()
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn counters(&self) -> &[f64] {
        &self.counters
    }

    pub fn protected(&self) -> &[bool] {
        &self.protected
    }

    pub fn buffer_len(&self) -> usize {
        self.buffer.len()
    }

    /// Items waiting outside the buckets (raw buffer plus filtered backlog).
    pub fn unbucketed_mass(&self) -> u64 {
        self.buffer.len() as u64 + self.pending.iter().map(|p| p.1).sum::<u64>()
    }

    pub fn bucket_mass(&self) -> f64 {
        self.counters.iter().sum()
    }

    pub fn heavy_hitters(&self) -> Option<&MisraGries> {
        self.mg.as_ref()
    }

    pub fn cb(&self) -> f64 {
        self.cb
    }

    pub fn epoch_end(&self) -> u64 {
        self.epoch_end
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn stats(&self) -> &SketchStats {
        &self.stats
    }

    /// Bucket-only interpolant, once buckets exist.
    pub fn interpolant(&self) -> Option<&Interpolant> {
        self.interp.as_ref()
    }

    pub fn min(&self) -> Option<f64> {
        self.value_range().map(|r| r.0)
    }

    pub fn max(&self) -> Option<f64> {
        self.value_range().map(|r| r.1)
    }

    fn value_range(&self) -> Option<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut see = |x: f64| {
            lo = lo.min(x);
            hi = hi.max(x);
        };
        if let (Some(a), Some(b)) = (self.thresholds.first(), self.thresholds.last()) {
            see(*a);
            see(*b);
        }
        self.buffer.iter().for_each(|&x| see(x));
        self.pending.iter().for_each(|p| see(p.0));
        if let Some(mg) = &self.mg {
            mg.entries().iter().for_each(|e| see(e.0));
        }
        (lo <= hi).then_some((lo, hi))
    }

    /// Adds one item. Non-finite values are rejected and leave the sketch
    /// untouched.
    pub fn update(&mut self, x: f64) -> Result<()> {
        if !x.is_finite() {
            return Err(SketchError::NonFiniteInput(x));
        }
        let x = x + 0.0;
        let a = x.abs();
        if a > 0.0 && a < self.zeta {
            self.zeta = a;
        }
        self.buffer.push(x);
        self.n += 1;
        if self.buffer.len() >= self.config.buffer_capacity {
            self.process();
        }
        Ok(())
    }

    /// Interpolated rank from the buckets alone.
    pub fn bucket_rank(&self, x: f64) -> f64 {
        self.interp.as_ref().map_or(0.0, |ip| ip.eval(x))
    }

    /// Estimated number of items `<= x`: bucket interpolant, plus exact
    /// counts from the buffer and heavy-hitter table.
    pub fn rank(&self, x: f64) -> f64 {
        let buffered = self.buffer.iter().filter(|&&v| v <= x).count();
        let pending = pending_rank(&self.pending, x);
        let (heavy, heavy_all) = self.mg.as_ref().map_or((0.0, true), |mg| {
            let r = mg.rank_contribution(x);
            (r, r == mg.mass() as f64)
        });
        let above_all = heavy_all
            && buffered == self.buffer.len()
            && self.pending.last().is_none_or(|p| p.0 <= x)
            && self.thresholds.last().is_none_or(|&t| t <= x);
        if above_all {
            return self.n as f64;
        }
        (self.bucket_rank(x) + buffered as f64 + pending + heavy).clamp(0.0, self.n as f64)
    }

    /// Rank divided by `n`.
    pub fn normalized_rank(&self, x: f64) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.rank(x) / self.n as f64
        }
    }

    /// Pushes everything still buffered into the buckets. Before the first
    /// successful initialization items stay counted exactly.
    pub fn flush(&mut self) {
        if !self.buffer.is_empty() || !self.pending.is_empty() {
            self.process();
        }
    }

    /// Estimated `q`-quantile for `q` in `(0, 1]`. Flushes first.
    pub fn quantile(&mut self, q: f64) -> Result<f64> {
        if self.n == 0 {
            return Err(SketchError::Empty);
        }
        if !(q > 0.0 && q <= 1.0) {
            return Err(SketchError::QuantileOutOfRange(q));
        }
        self.flush();
        let target = q * self.n as f64;
        if !self.is_initialized() {
            return Ok(self.exact_quantile(target));
        }
        if q == 1.0 {
            return Ok(self.max().expect("non-empty sketch has a maximum"));
        }
        let mut cands = self.thresholds.clone();
        if let Some(mg) = &self.mg {
            cands.extend(mg.entries().iter().map(|e| e.0));
            cands.sort_by(f64::total_cmp);
            cands.dedup();
        }
        let tol = (1e-9 * self.n as f64).max(1e-12);
        let j = cands.partition_point(|&c| self.rank(c) < target - tol);
        if j == 0 {
            return Ok(cands[0]);
        }
        if j >= cands.len() {
            return Ok(cands[cands.len() - 1]);
        }
        let (mut lo, mut hi) = (cands[j - 1], cands[j]);
        for _ in 0..64 {
            let mid = crate::interpolation::midpoint(lo, hi);
            if mid <= lo || mid >= hi || hi - lo <= 1e-9 * lo.abs().max(hi.abs()) {
                break;
            }
            if self.rank(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(hi)
    }

    fn exact_quantile(&self, target: f64) -> f64 {
        let mut items = self.pending.clone();
        if let Some(mg) = &self.mg {
            items.extend(mg.entries().iter().map(|(x, c)| (*x, c.inserted)));
            items.sort_by(|a, b| a.0.total_cmp(&b.0));
        }
        let goal = target * (1.0 - 1e-12);
        let mut acc = 0.0;
        for &(x, w) in &items {
            acc += w as f64;
            if acc >= goal {
                return x;
            }
        }
        items.last().map_or(f64::NAN, |p| p.0)
    }

    /// Checks the structural invariants; returns a description of the first
    /// violation.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let len = self.thresholds.len();
        if self.counters.len() != len || self.protected.len() != len {
            return Err("threshold, counter and protection lengths differ".into());
        }
        if len > 0 && len != self.k {
            return Err(format!("{len} buckets but target is {}", self.k));
        }
        for i in 1..len {
            if !(self.thresholds[i] > self.thresholds[i - 1]) {
                return Err(format!("thresholds not increasing at {i}"));
            }
        }
        for (i, &b) in self.counters.iter().enumerate() {
            if !(b >= 0.0) || !b.is_finite() {
                return Err(format!("counter {i} = {b}"));
            }
        }
        let heavy = self.mg.as_ref().map_or(0, |mg| mg.mass()) as f64;
        let mass = self.bucket_mass() + self.unbucketed_mass() as f64 + heavy;
        let n = self.n as f64;
        if (mass - n).abs() > 1e-9 * n.max(1.0) {
            return Err(format!("mass {mass} differs from n = {n}"));
        }
        Ok(())
    }

    /// Drains the raw buffer through the heavy-hitter filter into the
    /// backlog, then either initializes buckets or consolidates.
    pub(crate) fn process(&mut self) {
        let mut raw = std::mem::take(&mut self.buffer);
        raw.sort_unstable_by(f64::total_cmp);
        let mut runs: Vec<(f64, u64)> = Vec::new();
        for x in raw.drain(..) {
            match runs.last_mut() {
                Some(last) if last.0 == x => last.1 += 1,
                _ => runs.push((x, 1)),
            }
        }
        // keep the allocation
        self.buffer = raw;
        let residual = match &mut self.mg {
            Some(mg) => mg.absorb(&runs),
            None => runs,
        };
        let pending = std::mem::take(&mut self.pending);
        let batch = merge_runs(pending, residual);
        if self.is_initialized() {
            self.consolidate_batch(batch);
        } else {
            let total: u64 = batch.iter().map(|p| p.1).sum();
            if total >= self.k as u64 && self.init_buckets(&batch) {
                self.rebuild_interpolant();
            } else {
                self.pending = batch;
            }
        }
    }

    /// Adds already-filtered weighted items to the backlog.
    pub(crate) fn push_pending(&mut self, items: Vec<(f64, u64)>) {
        if items.is_empty() {
            return;
        }
        let pending = std::mem::take(&mut self.pending);
        self.pending = merge_runs(pending, items);
    }

    pub(crate) fn rebuild_interpolant(&mut self) {
        if self.thresholds.len() < 2 {
            self.interp = None;
            return;
        }
        let mut acc = 0.0;
        let ys: Vec<f64> = self
            .counters
            .iter()
            .map(|b| {
                acc += b;
                acc
            })
            .collect();
        self.interp = Interpolant::build(self.thresholds.clone(), ys, self.config.interpolation).ok();
        debug_assert!(self.interp.is_some());
    }

    /// Finishes a heavy-hitter pass: light items go back to the buckets and
    /// the bucket count shrinks to leave room for the surviving heavy items.
    pub fn compress_heavy_hitters(&mut self) -> Result<()> {
        self.flush();
        let Some(mg) = &mut self.mg else {
            return Ok(());
        };
        let base = self.config.k;
        let cut = self.n as f64 / (2.0 * base as f64);
        let light = mg.drain_below(cut);
        let heavy = mg.len();
        self.push_pending(light);
        self.flush();
        let target = compressed_bucket_count(base, heavy);
        if self.is_initialized() {
            self.resize(target)
        } else {
            self.k = target;
            Ok(())
        }
    }
}

/// Bucket count left after `heavy` items survive compression:
/// `max(k - heavy, ceil(k / 2), 6)`.
pub fn compressed_bucket_count(k: usize, heavy: usize) -> usize {
    k.saturating_sub(heavy).max(k.div_ceil(2)).max(6)
}

pub(crate) fn pending_rank(items: &[(f64, u64)], x: f64) -> f64 {
    let idx = items.partition_point(|p| p.0 <= x);
    items[..idx].iter().map(|p| p.1 as f64).sum()
}

/// Merges two ascending runs with distinct values, summing equal values.
pub(crate) fn merge_runs(a: Vec<(f64, u64)>, b: Vec<(f64, u64)>) -> Vec<(f64, u64)> {
    if a.is_empty() {
        return b;
    }
    if b.is_empty() {
        return a;
    }
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i].0 < b[j].0 {
            out.push(a[i]);
            i += 1;
        } else if b[j].0 < a[i].0 {
            out.push(b[j]);
            j += 1;
        } else {
            out.push((a[i].0, a[i].1 + b[j].1));
            i += 1;
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_defaults() {
        let s = Sketch::with_k(100).unwrap();
        assert_eq!(s.n(), 0);
        assert_eq!(s.config().buffer_capacity, 1600);
        assert_eq!(s.epoch_end(), 1600);
        assert!(!s.is_initialized());
    }

    #[test]
    fn config_validation() {
        assert!(matches!(Sketch::with_k(5), Err(SketchError::InvalidConfig(_))));
        let mut c = SketchConfig::new(6);
        c.buffer_capacity = 6;
        assert!(Sketch::new(c.clone()).is_ok());
        c.buffer_capacity = 5;
        assert!(Sketch::new(c).is_err());
        let mut c = SketchConfig::new(10);
        c.gamma = 1.0;
        assert!(Sketch::new(c).is_err());
    }

    #[test]
    fn rejects_non_finite() {
        let mut s = Sketch::with_k(10).unwrap();
        s.update(1.0).unwrap();
        assert!(s.update(f64::NAN).is_err());
        assert!(s.update(f64::INFINITY).is_err());
        assert!(s.update(f64::NEG_INFINITY).is_err());
        assert_eq!(s.n(), 1);
        assert_eq!(s.buffer_len(), 1);
    }

    #[test]
    fn buffering_below_capacity() {
        let mut s = Sketch::with_k(10).unwrap();
        for i in 0..159 {
            s.update(i as f64).unwrap();
        }
        assert_eq!(s.buffer_len(), 159);
        assert_eq!(s.n(), 159);
        assert!(!s.is_initialized());
        s.update(159.0).unwrap();
        assert!(s.is_initialized());
        assert_eq!(s.buffer_len(), 0);
        assert_eq!(s.thresholds().len(), 10);
    }

    #[test]
    fn buffered_exact_answers() {
        let mut s = Sketch::with_k(20).unwrap();
        for i in 1..=10 {
            s.update(i as f64).unwrap();
        }
        assert_eq!(s.rank(4.5), 4.0);
        assert_eq!(s.rank(0.0), 0.0);
        assert_eq!(s.quantile(0.5).unwrap(), 5.0);
        assert_eq!(s.quantile(1.0).unwrap(), 10.0);
        assert_eq!(s.rank(4.5), 4.0);
    }

    #[test]
    fn quantile_errors() {
        let mut s = Sketch::with_k(10).unwrap();
        assert_eq!(s.quantile(0.5), Err(SketchError::Empty));
        s.update(1.0).unwrap();
        assert_eq!(s.quantile(0.0), Err(SketchError::QuantileOutOfRange(0.0)));
        assert!(s.quantile(1.5).is_err());
        assert!(s.quantile(f64::NAN).is_err());
    }

    #[test]
    fn flush_empty_is_noop() {
        let mut s = Sketch::with_k(10).unwrap();
        s.flush();
        assert_eq!(s.stats().consolidations, 0);
        assert!(!s.is_initialized());
    }

    #[test]
    fn quantile_max_is_maximum() {
        let mut s = Sketch::with_k(16).unwrap();
        for i in 0..5_000 {
            s.update(((i * 7919) % 5000) as f64).unwrap();
        }
        assert_eq!(s.quantile(1.0).unwrap(), 4999.0);
    }

    #[test]
    fn zeta_tracks_smallest_magnitude() {
        let mut s = Sketch::with_k(10).unwrap();
        for x in [3.0, 0.0, -0.25, 7.0] {
            s.update(x).unwrap();
        }
        assert_eq!(s.zeta(), 0.25);
    }

    #[test]
    fn compressed_counts() {
        assert_eq!(compressed_bucket_count(200, 0), 200);
        assert_eq!(compressed_bucket_count(200, 42), 158);
        assert_eq!(compressed_bucket_count(200, 150), 100);
        assert_eq!(compressed_bucket_count(7, 7), 6);
        assert_eq!(compressed_bucket_count(9, 9), 6);
    }

    #[test]
    fn merge_runs_sums_equal_values() {
        let a = vec![(1.0, 2), (3.0, 1)];
        let b = vec![(0.5, 1), (3.0, 4), (9.0, 1)];
        assert_eq!(merge_runs(a, b), vec![(0.5, 1), (1.0, 2), (3.0, 5), (9.0, 1)]);
    }
}
