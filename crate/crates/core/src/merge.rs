//! Pairwise merging of sketches.

use crate::consolidate::FrozenRanks;
use crate::sketch::Sketch;

impl Sketch {
    /// Merges `other` into `self`, folding the sketch with fewer items into
    /// the one with more. The larger sketch's settings and bucket target
    /// survive.
    pub fn merge(&mut self, other: Sketch) {
        if other.n > self.n {
            let small = std::mem::replace(self, other);
            self.merge_into(&small);
        } else {
            self.merge_into(&other);
        }
    }

    /// Merges `src` into `self` regardless of size; `self` keeps its bucket
    /// target and protection bits.
    pub fn merge_into(&mut self, src: &Sketch) {
        if src.n == 0 {
            return;
        }
        self.zeta = self.zeta.min(src.zeta);
        if !src.is_initialized() {
            self.absorb_loose(src);
            let waiting = self.unbucketed_mass();
            if waiting >= self.config.buffer_capacity as u64 {
                self.process();
            }
            return;
        }
        self.n += src.n;
        if self.is_initialized() {
            self.union_buckets(src);
        } else {
            self.thresholds = src.thresholds.clone();
            self.counters = src.counters.clone();
            self.protected = vec![false; src.thresholds.len()];
        }
        if self.n >= self.epoch_end {
            self.protected.iter_mut().for_each(|b| *b = false);
            while self.epoch_end <= self.n {
                self.epoch_end = ((self.epoch_end as f64) * self.config.epoch_factor).ceil() as u64;
            }
            self.cb = self.config.initial_cb;
            self.stats.epochs += 1;
            self.stats.cb_doublings_this_epoch = 0;
        }
        while self.thresholds.len() > self.k {
            if !self.join_cheapest() {
                break;
            }
        }
        self.rebuild_interpolant();
        self.absorb_buffers(src);
        self.process();
        if self.thresholds.len() < self.k {
            let k = self.k;
            let _ = self.resize(k);
        }
    }

    /// Folds an uninitialized sketch in as a bulk update.
    fn absorb_loose(&mut self, src: &Sketch) {
        self.n += src.n;
        self.absorb_buffers(src);
    }

    fn absorb_buffers(&mut self, src: &Sketch) {
        self.buffer.extend_from_slice(&src.buffer);
        self.push_pending(src.pending.clone());
        match (&mut self.mg, &src.mg) {
            (Some(dst), Some(other)) => {
                let evicted = dst.merge(other);
                self.push_pending(evicted);
            }
            (None, Some(other)) => {
                let items = other.entries().iter().map(|(x, c)| (*x, c.inserted)).collect();
                self.push_pending(items);
            }
            _ => {}
        }
    }

    /// Replaces the buckets with the union of both threshold sets, counting
    /// each new bucket from the summed bucket-only ranks.
    fn union_buckets(&mut self, src: &Sketch) {
        let mut union: Vec<(f64, bool)> = Vec::with_capacity(self.thresholds.len() + src.thresholds.len());
        let (a, b) = (&self.thresholds, &src.thresholds);
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            if j == b.len() || (i < a.len() && a[i] < b[j]) {
                union.push((a[i], self.protected[i]));
                i += 1;
            } else if i == a.len() || b[j] < a[i] {
                union.push((b[j], false));
                j += 1;
            } else {
                union.push((a[i], self.protected[i]));
                i += 1;
                j += 1;
            }
        }
        let own = FrozenRanks::new(self.interp.take(), Vec::new());
        let mut prev = 0.0;
        let mut counters = Vec::with_capacity(union.len());
        for &(u, _) in &union {
            let r = own.rank(u) + src.bucket_rank(u);
            counters.push((r - prev).max(0.0));
            prev = r.max(prev);
        }
        self.thresholds = union.iter().map(|p| p.0).collect();
        self.protected = union.iter().map(|p| p.1).collect();
        self.counters = counters;
    }
}
