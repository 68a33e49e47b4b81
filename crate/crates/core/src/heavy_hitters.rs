//! Misra-Gries heavy-hitter filter that runs in front of the buckets.
//!
//! Every tracked item carries two counters: the usual decrementable
//! Misra-Gries counter, and a monotone counter holding everything inserted
//! since the item (re)entered the table. Rank queries use the monotone
//! counter, so mass held here is answered exactly.

use std::collections::HashMap;

/// Counters of one tracked item.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeavyCounts {
    /// Decrementable Misra-Gries counter.
    pub count: u64,
    /// Items inserted since the last (re)insertion; never decremented.
    pub inserted: u64,
}

/// Misra-Gries summary holding at most `capacity - 1` items at rest.
#[derive(Debug, Clone, PartialEq)]
pub struct MisraGries {
    capacity: usize,
    entries: HashMap<u64, (f64, HeavyCounts)>,
}

#[inline]
fn key(x: f64) -> u64 {
    // -0.0 and 0.0 are the same item
    (x + 0.0).to_bits()
}

impl MisraGries {
    /// `capacity` must be at least 2.
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 2, "Misra-Gries capacity must be at least 2");
        MisraGries { capacity, entries: HashMap::new() }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, x: f64) -> Option<HeavyCounts> {
        self.entries.get(&key(x)).map(|(_, c)| *c)
    }

    /// Tracked items in ascending order.
    pub fn entries(&self) -> Vec<(f64, HeavyCounts)> {
        let mut v: Vec<_> = self.entries.values().copied().collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v
    }

    /// Total monotone mass held by the table.
    pub fn mass(&self) -> u64 {
        self.entries.values().map(|(_, c)| c.inserted).sum()
    }

    /// Sum of monotone counters over items `<= y`.
    pub fn rank_contribution(&self, y: f64) -> f64 {
        self.entries
            .values()
            .filter(|(x, _)| *x <= y)
            .map(|(_, c)| c.inserted as f64)
            .sum()
    }

    /// Inserts an item with the given counters, bypassing eviction. Used when
    /// restoring a decoded summary.
    pub(crate) fn restore(&mut self, x: f64, counts: HeavyCounts) {
        self.entries.insert(key(x), (x + 0.0, counts));
    }

    /// Filters a batch of `(value, multiplicity)` pairs with distinct values.
    ///
    /// Tracked items absorb their batch frequency first. Remaining items are
    /// inserted one by one in ascending order; whenever the table reaches
    /// capacity every counter drops by the table minimum and the items that
    /// hit zero are evicted. Returns the evicted items with their monotone
    /// counters, in ascending order.
    pub fn absorb(&mut self, batch: &[(f64, u64)]) -> Vec<(f64, u64)> {
        let mut remaining = Vec::new();
        for &(x, w) in batch {
            match self.entries.get_mut(&key(x)) {
                Some((_, c)) => {
                    c.count += w;
                    c.inserted += w;
                }
                None => remaining.push((x, w)),
            }
        }
        remaining.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut evicted = Vec::new();
        for (x, w) in remaining {
            self.entries
                .insert(key(x), (x + 0.0, HeavyCounts { count: w, inserted: w }));
            if self.entries.len() >= self.capacity {
                let min = self.entries.values().map(|(_, c)| c.count).min().unwrap_or(0);
                self.decrement(min, &mut evicted);
            }
        }
        evicted.sort_by(|a, b| a.0.total_cmp(&b.0));
        evicted
    }

    fn decrement(&mut self, by: u64, evicted: &mut Vec<(f64, u64)>) {
        self.entries.retain(|_, (x, c)| {
            c.count = c.count.saturating_sub(by);
            if c.count == 0 {
                evicted.push((*x, c.inserted));
                false
            } else {
                true
            }
        });
    }

    /// Mergeable-summaries combine: counters are summed per item, then if
    /// the table is over capacity every counter drops by the
    /// `capacity`-th largest counter. Returns evicted items ascending.
    pub fn merge(&mut self, other: &MisraGries) -> Vec<(f64, u64)> {
        for (k, (x, c)) in &other.entries {
            let slot = self
                .entries
                .entry(*k)
                .or_insert((*x, HeavyCounts { count: 0, inserted: 0 }));
            slot.1.count += c.count;
            slot.1.inserted += c.inserted;
        }
        let mut evicted = Vec::new();
        if self.entries.len() >= self.capacity {
            let mut counts: Vec<u64> = self.entries.values().map(|(_, c)| c.count).collect();
            counts.sort_unstable_by(|a, b| b.cmp(a));
            let cut = counts[self.capacity - 1];
            self.decrement(cut, &mut evicted);
        }
        evicted.sort_by(|a, b| a.0.total_cmp(&b.0));
        evicted
    }

    /// Removes every item whose monotone counter is below `threshold`.
    /// Returns the removed items ascending.
    pub fn drain_below(&mut self, threshold: f64) -> Vec<(f64, u64)> {
        let mut out = Vec::new();
        self.entries.retain(|_, (x, c)| {
            if (c.inserted as f64) < threshold {
                out.push((*x, c.inserted));
                false
            } else {
                true
            }
        });
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        out
    }
}
