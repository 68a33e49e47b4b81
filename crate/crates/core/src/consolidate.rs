//! Bucket initialization and the split/join maintenance pass.
//!
//! Indices in this module are 0-based. Bucket 0 is the point mass at the
//! current minimum and is never split; a join at pair `p` merges buckets `p`
//! and `p + 1` by removing threshold `p`, so `p >= 1` and the minimum
//! threshold always survives.

use crate::interpolation::{midpoint, Interpolant};
use crate::sketch::{pending_rank, HeuristicKind, Sketch};

/// Rank estimate frozen at the start of a maintenance pass: the old bucket
/// interpolant plus the exact counts of the batch being absorbed. Split
/// counters are read from it.
pub(crate) struct FrozenRanks {
    interp: Option<Interpolant>,
    batch: Vec<(f64, u64)>,
}

impl FrozenRanks {
    pub(crate) fn new(interp: Option<Interpolant>, batch: Vec<(f64, u64)>) -> Self {
        FrozenRanks { interp, batch }
    }

    pub(crate) fn rank(&self, x: f64) -> f64 {
        self.interp.as_ref().map_or(0.0, |ip| ip.eval(x)) + pending_rank(&self.batch, x)
    }

    /// Share of the mass in `(lo, hi]` that lies at or below `mid`.
    fn fraction(&self, lo: f64, mid: f64, hi: f64) -> f64 {
        let r_lo = self.rank(lo);
        let denom = self.rank(hi) - r_lo;
        if denom > 0.0 {
            ((self.rank(mid) - r_lo) / denom).clamp(0.0, 1.0)
        } else {
            0.5
        }
    }
}

/// One bucket as seen by the heuristic: counter and length.
#[derive(Debug, Clone, Copy)]
struct Cell {
    mass: f64,
    len: f64,
}

/// Scaled difference `|b/l - b_n/l_n| * l^2 / (l + l_n)` without forming
/// densities, so tiny lengths do not overflow.
fn density_step(cell: Cell, other: Cell) -> f64 {
    let r = cell.len / (cell.len + other.len);
    let q = cell.len / other.len;
    let other_part = if other.mass == 0.0 { 0.0 } else { other.mass * q * r };
    (cell.mass * r - other_part).abs()
}

fn score(kind: HeuristicKind, left: Cell, cell: Cell, right: Cell) -> f64 {
    let v = match kind {
        HeuristicKind::SecondDerivative => {
            density_step(cell, left).max(density_step(cell, right))
        }
        HeuristicKind::None => 0.0,
        HeuristicKind::Length => cell.len,
        HeuristicKind::Counter => cell.mass,
        HeuristicKind::ThirdDerivative => {
            let d = |c: Cell| c.mass / c.len;
            let g_left = (d(cell) - d(left)) / ((cell.len + left.len) / 2.0);
            let g_right = (d(right) - d(cell)) / ((right.len + cell.len) / 2.0);
            (g_right - g_left).abs() * cell.len * cell.len
        }
    };
    if v.is_nan() {
        0.0
    } else {
        v
    }
}

/// Splits and joins chosen for one iteration.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConsolidatePlan {
    pub splits: Vec<usize>,
    pub joins: Vec<usize>,
}

impl Sketch {
    fn len(&self, i: usize) -> f64 {
        if i == 0 {
            self.thresholds[1] - self.thresholds[0]
        } else {
            self.thresholds[i] - self.thresholds[i - 1]
        }
    }

    fn cell(&self, i: usize) -> Cell {
        Cell { mass: self.counters[i], len: self.len(i) }
    }

    /// The bucket bound `cb * n / k`.
    pub fn bucket_bound(&self) -> f64 {
        self.cb * self.n as f64 / self.k as f64
    }

    /// Heuristic error of bucket `i >= 1`, using a zero-mass virtual bucket
    /// past the maximum and bucket 0 sized like bucket 1.
    pub fn heuristic_error(&self, i: usize) -> f64 {
        let last = self.thresholds.len() - 1;
        let cell = self.cell(i);
        let left = if i == 1 {
            Cell { mass: self.counters[0], len: cell.len }
        } else {
            self.cell(i - 1)
        };
        let right = if i < last {
            self.cell(i + 1)
        } else {
            Cell { mass: 0.0, len: cell.len }
        };
        score(self.config.heuristic, left, cell, right)
    }

    /// Heuristic error of the bucket that joining pair `p` would produce.
    pub fn joined_heuristic_error(&self, p: usize) -> f64 {
        let last = self.thresholds.len() - 1;
        let merged = Cell {
            mass: self.counters[p] + self.counters[p + 1],
            len: self.len(p) + self.len(p + 1),
        };
        let left = if p == 1 {
            Cell { mass: self.counters[0], len: merged.len }
        } else {
            self.cell(p - 1)
        };
        let right = if p + 1 < last {
            self.cell(p + 2)
        } else {
            Cell { mass: 0.0, len: merged.len }
        };
        score(self.config.heuristic, left, merged, right)
    }

    /// Whether buckets `p` and `p + 1` may be joined: the shared threshold is
    /// unprotected and the joined bucket stays within the join headroom.
    pub fn is_joinable(&self, p: usize) -> bool {
        let len = self.thresholds.len();
        p >= 1
            && p + 1 < len
            && !self.protected[p]
            && self.counters[p] + self.counters[p + 1]
                <= self.config.join_headroom * self.bucket_bound()
    }

    /// Whether bucket `i` can be halved at all: it has mass, a representable
    /// midpoint, and (without the heavy-hitter filter) respects the relative
    /// length floor after halving.
    fn can_halve(&self, i: usize) -> bool {
        if i == 0 || i >= self.thresholds.len() || !(self.counters[i] > 0.0) {
            return false;
        }
        let (lo, hi) = (self.thresholds[i - 1], self.thresholds[i]);
        let mid = midpoint(lo, hi);
        if !(mid > lo && mid < hi) {
            return false;
        }
        if self.mg.is_none() {
            let floor = self.config.rel_length_delta * lo.abs().max(hi.abs()).max(self.zeta_floor());
            if (hi - lo) / 2.0 < floor {
                return false;
            }
        }
        true
    }

    fn zeta_floor(&self) -> f64 {
        if self.zeta.is_finite() {
            self.zeta
        } else {
            0.0
        }
    }

    /// Joinable pairs sorted by post-join heuristic error, ties by index.
    fn joinable_pairs(&self) -> Vec<(f64, usize)> {
        let len = self.thresholds.len();
        let mut pairs: Vec<(f64, usize)> = (1..len.saturating_sub(1))
            .filter(|&p| self.is_joinable(p))
            .map(|p| (self.joined_heuristic_error(p), p))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        pairs
    }

    fn min_joinable_pairs(&self) -> f64 {
        self.k as f64 / 3.0 + 2.0
    }

    /// Whether bucket `i` is splittable: over the bucket bound, or (with
    /// enough joinable pairs around) not tiny and with a heuristic error
    /// `gamma` times above the cheapest non-overlapping join.
    pub fn is_splittable(&self, i: usize) -> bool {
        if !self.can_halve(i) {
            return false;
        }
        let bound = self.bucket_bound();
        if self.counters[i] > bound {
            return true;
        }
        let pairs = self.joinable_pairs();
        if (pairs.len() as f64) < self.min_joinable_pairs()
            || self.counters[i] <= self.config.min_split_fraction * bound
        {
            return false;
        }
        pairs
            .iter()
            .find(|(_, p)| *p != i && p + 1 != i)
            .is_some_and(|(h, _)| self.heuristic_error(i) > self.config.gamma * h)
    }

    /// Builds the initial buckets from a sorted weighted batch. Returns
    /// false when the batch cannot supply `k` usable thresholds.
    pub(crate) fn init_buckets(&mut self, batch: &[(f64, u64)]) -> bool {
        let k = self.k;
        let Some(mut thresholds) = initial_thresholds(
            batch,
            k,
            self.config.rel_length_delta,
            self.zeta_floor(),
        ) else {
            return false;
        };
        thresholds.dedup();
        if thresholds.len() != k {
            return false;
        }
        let mut counters = Vec::with_capacity(k);
        let mut prev = 0.0;
        for &t in &thresholds {
            let r = pending_rank(batch, t);
            counters.push(r - prev);
            prev = r;
        }
        self.thresholds = thresholds;
        self.counters = counters;
        self.protected = vec![false; k];
        true
    }

    /// Absorbs a sorted weighted batch into initialized buckets and restores
    /// the bucket count and bounds.
    pub(crate) fn consolidate_batch(&mut self, batch: Vec<(f64, u64)>) {
        self.stats.consolidations += 1;
        if self.n >= self.epoch_end {
            self.start_epoch();
            self.epoch_end = (self.epoch_end as f64 * self.config.epoch_factor).ceil() as u64;
        }
        let frozen = FrozenRanks::new(self.interp.take(), batch);

        let first = self.thresholds[0];
        let last = self.thresholds[self.thresholds.len() - 1];
        let mut below: Vec<(f64, u64)> = Vec::new();
        let mut above_mass = 0u64;
        let mut above_max = last;
        for &(v, w) in &frozen.batch {
            if v < first {
                below.push((v, w));
            } else if v > last {
                above_mass += w;
                above_max = v;
            } else {
                let i = self.thresholds.partition_point(|&t| t < v);
                self.counters[i] += w as f64;
            }
        }
        if let Some(&(new_min, w)) = below.first() {
            let rest: u64 = below[1..].iter().map(|p| p.1).sum();
            self.counters[0] += rest as f64;
            self.thresholds.insert(0, new_min);
            self.counters.insert(0, w as f64);
            self.protected.insert(0, false);
        }
        if above_mass > 0 {
            self.thresholds.push(above_max);
            self.counters.push(above_mass as f64);
            self.protected.push(false);
        }
        while self.thresholds.len() > self.k {
            if !self.join_cheapest() {
                break;
            }
        }
        self.rebalance(&frozen);
        self.rebuild_interpolant();
    }

    fn start_epoch(&mut self) {
        self.protected.iter_mut().for_each(|b| *b = false);
        self.cb = self.config.initial_cb;
        self.stats.epochs += 1;
        self.stats.cb_doublings_this_epoch = 0;
    }

    /// Makes a join possible again: doubles the bucket-bound multiplier, or,
    /// when every candidate threshold is protected, drops protection.
    fn relax(&mut self) {
        let len = self.thresholds.len();
        let any_open = (1..len.saturating_sub(1)).any(|p| !self.protected[p]);
        if any_open {
            self.cb *= 2.0;
            self.stats.cb_doublings += 1;
            self.stats.cb_doublings_this_epoch += 1;
            self.stats.max_cb_doublings_per_epoch = self
                .stats
                .max_cb_doublings_per_epoch
                .max(self.stats.cb_doublings_this_epoch);
            log::debug!("no joinable pair: bucket-bound multiplier raised to {}", self.cb);
        } else {
            self.protected.iter_mut().for_each(|b| *b = false);
            self.stats.protection_resets += 1;
            log::debug!("all thresholds protected: protection cleared");
        }
    }

    /// Joins the joinable pair with the lowest post-join heuristic error,
    /// relaxing constraints until one exists.
    pub(crate) fn join_cheapest(&mut self) -> bool {
        if self.thresholds.len() < 3 {
            return false;
        }
        loop {
            if let Some(&(_, p)) = self.joinable_pairs().first() {
                self.join(p);
                return true;
            }
            self.relax();
        }
    }

    /// Removes threshold `p`, merging buckets `p` and `p + 1`.
    pub(crate) fn join(&mut self, p: usize) {
        let mass = self.counters[p] + self.counters[p + 1];
        self.thresholds.remove(p);
        self.counters.remove(p);
        self.protected.remove(p);
        self.counters[p] = mass;
        self.stats.joins += 1;
    }

    /// Public join with the joinability check.
    pub fn join_pair(&mut self, p: usize) -> crate::Result<()> {
        if !self.is_joinable(p) {
            return Err(crate::SketchError::NotJoinable(p, p + 1));
        }
        self.join(p);
        self.rebuild_interpolant();
        Ok(())
    }

    /// Halves bucket `i`, apportioning its counter with the current
    /// interpolant, and protects the three thresholds involved.
    pub fn split_bucket(&mut self, i: usize) -> crate::Result<()> {
        if i == 0 || i >= self.thresholds.len() {
            return Err(crate::SketchError::InvalidBucket(i));
        }
        if !self.can_halve(i) {
            return Err(crate::SketchError::ZeroMassBucket(i));
        }
        let frozen = FrozenRanks::new(self.interp.take(), Vec::new());
        self.split(i, &frozen);
        self.rebuild_interpolant();
        Ok(())
    }

    pub(crate) fn split(&mut self, i: usize, frozen: &FrozenRanks) {
        let (lo, hi) = (self.thresholds[i - 1], self.thresholds[i]);
        let mid = midpoint(lo, hi);
        let mass = self.counters[i];
        let left = frozen.fraction(lo, mid, hi) * mass;
        self.thresholds.insert(i, mid);
        self.counters[i] = mass - left;
        self.counters.insert(i, left);
        self.protected.insert(i, true);
        self.protected[i - 1] = true;
        self.protected[i + 1] = true;
        self.stats.splits += 1;
    }

    /// Chooses the next iteration's splits and joins, or `None` when a
    /// bound-violating bucket found no partner and constraints were relaxed.
    fn plan(&mut self) -> Option<ConsolidatePlan> {
        let len = self.thresholds.len();
        let bound = self.bucket_bound();
        let pairs = self.joinable_pairs();
        let mut used = vec![false; len];
        let mut plan = ConsolidatePlan::default();

        let mut over: Vec<usize> = (1..len)
            .filter(|&i| self.counters[i] > bound && self.can_halve(i))
            .collect();
        over.sort_by(|&a, &b| self.counters[b].total_cmp(&self.counters[a]).then(a.cmp(&b)));
        for &i in &over {
            used[i] = true;
        }
        let take_pair = |used: &mut Vec<bool>, exclude: Option<usize>| -> Option<(f64, usize)> {
            let found = pairs.iter().find(|(_, p)| {
                !used[*p] && !used[p + 1] && exclude.is_none_or(|i| *p != i && p + 1 != i)
            })?;
            used[found.1] = true;
            used[found.1 + 1] = true;
            Some(*found)
        };
        for &i in &over {
            if let Some((_, p)) = take_pair(&mut used, None) {
                plan.splits.push(i);
                plan.joins.push(p);
            }
        }
        if !over.is_empty() && plan.splits.is_empty() {
            self.relax();
            return None;
        }

        if pairs.len() as f64 >= self.min_joinable_pairs() {
            let floor = self.config.min_split_fraction * bound;
            let best = (1..len)
                .filter(|&i| !used[i] && self.counters[i] > floor && self.can_halve(i))
                .map(|i| (self.heuristic_error(i), i))
                .max_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
            if let Some((h_split, i)) = best {
                let mut trial = used.clone();
                trial[i] = true;
                if let Some((h_join, p)) = take_pair(&mut trial, Some(i)) {
                    if h_split > self.config.gamma * h_join {
                        plan.splits.push(i);
                        plan.joins.push(p);
                    }
                }
            }
        }
        Some(plan)
    }

    /// Applies a non-overlapping plan in one pass.
    fn apply(&mut self, plan: &ConsolidatePlan, frozen: &FrozenRanks) {
        let len = self.thresholds.len();
        let mut action = vec![0u8; len];
        for &i in &plan.splits {
            action[i] = 1;
        }
        for &p in &plan.joins {
            action[p] = 2;
        }
        let cap = len + plan.splits.len();
        let mut t = Vec::with_capacity(cap);
        let mut c = Vec::with_capacity(cap);
        let mut g: Vec<bool> = Vec::with_capacity(cap);
        let mut i = 0;
        while i < len {
            match action[i] {
                2 => {
                    t.push(self.thresholds[i + 1]);
                    c.push(self.counters[i] + self.counters[i + 1]);
                    g.push(self.protected[i + 1]);
                    self.stats.joins += 1;
                    i += 2;
                }
                1 => {
                    let (lo, hi) = (self.thresholds[i - 1], self.thresholds[i]);
                    let mid = midpoint(lo, hi);
                    let mass = self.counters[i];
                    let left = frozen.fraction(lo, mid, hi) * mass;
                    if let Some(prev) = g.last_mut() {
                        *prev = true;
                    }
                    t.push(mid);
                    c.push(left);
                    g.push(true);
                    t.push(hi);
                    c.push(mass - left);
                    g.push(true);
                    self.stats.splits += 1;
                    i += 1;
                }
                _ => {
                    t.push(self.thresholds[i]);
                    c.push(self.counters[i]);
                    g.push(self.protected[i]);
                    i += 1;
                }
            }
        }
        self.thresholds = t;
        self.counters = c;
        self.protected = g;
    }

    /// Iterates split/join rounds until a round changes nothing.
    pub(crate) fn rebalance(&mut self, frozen: &FrozenRanks) {
        let cap = 20 * self.k + 200;
        for _ in 0..cap {
            let Some(plan) = self.plan() else {
                continue;
            };
            if plan.splits.is_empty() {
                return;
            }
            self.apply(&plan, frozen);
        }
        self.stats.iteration_cap_hits += 1;
        log::warn!("consolidation stopped at the iteration ceiling");
    }

    /// Changes the bucket count to `k_new`. Growing performs splits only
    /// (bound violations first, then by heuristic error); shrinking performs
    /// joins only. A normal maintenance pass follows.
    pub fn resize(&mut self, k_new: usize) -> crate::Result<()> {
        if k_new < 6 {
            return Err(crate::SketchError::InvalidConfig(format!(
                "k = {k_new} must be at least 6"
            )));
        }
        self.flush();
        if !self.is_initialized() {
            self.k = k_new;
            return Ok(());
        }
        let old = self.k;
        if k_new == old && self.thresholds.len() == k_new {
            return Ok(());
        }
        if (k_new as f64 - old as f64).abs() > 0.25 * old as f64 {
            self.protected.iter_mut().for_each(|b| *b = false);
        }
        self.k = k_new;
        let frozen = FrozenRanks::new(self.interp.take(), Vec::new());
        while self.thresholds.len() < k_new {
            let bound = self.bucket_bound();
            let len = self.thresholds.len();
            let over = (1..len)
                .filter(|&i| self.counters[i] > bound && self.can_halve(i))
                .max_by(|&a, &b| self.counters[a].total_cmp(&self.counters[b]).then(b.cmp(&a)));
            let target = over.or_else(|| {
                (1..len)
                    .filter(|&i| self.can_halve(i))
                    .map(|i| (self.heuristic_error(i), i))
                    .max_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)))
                    .map(|(_, i)| i)
            });
            match target {
                Some(i) => self.split(i, &frozen),
                None => break,
            }
        }
        while self.thresholds.len() > k_new {
            if !self.join_cheapest() {
                break;
            }
        }
        if self.thresholds.len() != k_new {
            // could not grow further; keep what exists as the target
            self.k = self.thresholds.len();
        }
        self.rebuild_interpolant();
        let frozen = FrozenRanks::new(self.interp.clone(), Vec::new());
        self.rebalance(&frozen);
        self.rebuild_interpolant();
        Ok(())
    }
}

/// Chooses `k` initial thresholds from a sorted weighted batch: the items at
/// evenly spaced sorted positions, with duplicates or values closer than the
/// relative length floor moved to sit just past the previous threshold (or,
/// near the maximum, just before the next one).
pub(crate) fn initial_thresholds(
    batch: &[(f64, u64)],
    k: usize,
    delta: f64,
    zeta: f64,
) -> Option<Vec<f64>> {
    let total: u64 = batch.iter().map(|p| p.1).sum();
    if batch.len() < 2 || k < 2 || total < k as u64 {
        return None;
    }
    let mut cum = Vec::with_capacity(batch.len());
    let mut acc = 0u64;
    for p in batch {
        acc += p.1;
        cum.push(acc);
    }
    let m = total - 1;
    let at = |pos: u64| batch[cum.partition_point(|&c| c <= pos)].0;
    let mut t: Vec<f64> = (0..k as u64)
        .map(|i| {
            // round-half-up of i (m) / (k - 1)
            let num = 2 * i as u128 * m as u128 + (k as u128 - 1);
            let pos = (num / (2 * (k as u128 - 1))) as u64;
            at(pos.min(m))
        })
        .collect();

    let floor = |a: f64, b: f64| delta * a.abs().max(b.abs()).max(zeta);
    let step = |a: f64| delta * a.abs().max(zeta) * (1.0 + 4.0 * delta);
    let last = k - 1;
    for i in 1..last {
        if t[i] - t[i - 1] < floor(t[i - 1], t[i]) {
            t[i] = t[i - 1] + step(t[i - 1]);
        }
    }
    for i in (1..last).rev() {
        if t[i + 1] - t[i] < floor(t[i], t[i + 1]) {
            t[i] = t[i + 1] - step(t[i + 1]);
        }
    }
    for i in 1..k {
        if !(t[i] > t[i - 1]) || t[i] - t[i - 1] < floor(t[i - 1], t[i]) {
            return None;
        }
    }
    Some(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sketch::SketchConfig;

    fn runs(values: &[f64]) -> Vec<(f64, u64)> {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let mut out: Vec<(f64, u64)> = Vec::new();
        for x in v {
            match out.last_mut() {
                Some(l) if l.0 == x => l.1 += 1,
                _ => out.push((x, 1)),
            }
        }
        out
    }

    fn sketch_with(thresholds: &[f64], counters: &[f64], n: u64) -> Sketch {
        let mut s = Sketch::new(SketchConfig::new(6.max(thresholds.len()))).unwrap();
        s.thresholds = thresholds.to_vec();
        s.counters = counters.to_vec();
        s.protected = vec![false; thresholds.len()];
        s.n = n;
        s.k = thresholds.len();
        s.rebuild_interpolant();
        s
    }

    #[test]
    fn init_picks_evenly_spaced_items() {
        let batch = runs(&(1..=10).map(|i| i as f64).collect::<Vec<_>>());
        let t = initial_thresholds(&batch, 4, 1e-8, 1.0).unwrap();
        assert_eq!(t, vec![1.0, 4.0, 7.0, 10.0]);
        let mut s = Sketch::new(SketchConfig::new(6)).unwrap();
        s.k = 4;
        assert!(s.init_buckets(&batch));
        assert_eq!(s.counters, vec![1.0, 3.0, 3.0, 3.0]);
    }

    #[test]
    fn init_identity_when_n_equals_k() {
        let vals: Vec<f64> = (0..8).map(|i| (i * i) as f64).collect();
        let t = initial_thresholds(&runs(&vals), 8, 1e-8, 1.0).unwrap();
        assert_eq!(t, vals);
    }

    #[test]
    fn init_all_equal_fails() {
        assert!(initial_thresholds(&[(3.0, 100)], 6, 1e-8, 3.0).is_none());
    }

    #[test]
    fn init_repairs_duplicates() {
        // two values, each heavy
        let batch = vec![(0.0, 500), (1.0, 500)];
        let t = initial_thresholds(&batch, 10, 1e-8, 1.0).unwrap();
        assert_eq!(t.len(), 10);
        assert_eq!(t[0], 0.0);
        assert_eq!(t[9], 1.0);
        for w in t.windows(2) {
            assert!(w[1] > w[0]);
        }
        // 1.0 keeps its own bucket, spacers sit just above 0 or just below 1
        assert!(t.iter().all(|&x| x < 1e-6 || x > 1.0 - 1e-6));
    }

    #[test]
    fn heuristic_second_derivative_example() {
        // three unit-length buckets with counters 10, 20, 10 around bucket 2
        let s = sketch_with(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0], &[1.0, 5.0, 10.0, 20.0, 10.0, 5.0], 51);
        assert!((s.heuristic_error(3) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn heuristic_flat_is_zero() {
        let s = sketch_with(&[0.0, 1.0, 2.0, 4.0, 5.0, 7.0], &[1.0, 3.0, 3.0, 6.0, 3.0, 6.0], 22);
        for i in 2..5 {
            assert!(s.heuristic_error(i).abs() < 1e-12, "i = {i}");
        }
    }

    #[test]
    fn heuristic_last_bucket_uses_virtual_neighbor() {
        let s = sketch_with(&[0.0, 1.0, 2.0, 3.0, 4.0, 6.0], &[1.0, 4.0, 4.0, 4.0, 4.0, 8.0], 25);
        // b_k / l_k = 4, virtual density 0, l = 2: (4 / 4) * 4 = 4; left step is 0
        assert!((s.heuristic_error(5) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn joinable_rules() {
        let mut s = sketch_with(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0], &[1.0, 1.0, 1.0, 1.0, 1.0, 95.0], 100);
        // bound = 3 * 100 / 6 = 50, headroom 37.5
        assert!(s.is_joinable(1));
        assert!(!s.is_joinable(0));
        assert!(!s.is_joinable(4)); // 1 + 95 > 37.5
        s.protected[2] = true;
        assert!(!s.is_joinable(2));
        s.counters = vec![1.0, 1.0, 19.0, 19.0, 1.0, 59.0];
        s.protected[2] = false;
        // 38 = 0.76 * cb * n / k
        assert!(!s.is_joinable(2));
    }

    #[test]
    fn splittable_rules() {
        let k = 12;
        let xs: Vec<f64> = (0..k).map(|i| i as f64).collect();
        let mut cs = vec![1.0; k];
        // bound = 3 * n / 12 = n / 4; n = 100 -> bound 25
        cs[6] = 100.0 - 11.0;
        let s = sketch_with(&xs, &cs, 100);
        assert!(s.is_splittable(6));
        assert!(!s.is_splittable(0));
        // tiny bucket with a large heuristic error stays put
        let mut cs = vec![10.0; k];
        cs[5] = 0.001;
        cs[6] = 90.0;
        let n = cs.iter().sum::<f64>() as u64;
        let s = sketch_with(&xs, &cs, n);
        assert!(!s.is_splittable(5));
    }

    #[test]
    fn splittable_needs_enough_joinable_pairs() {
        let k = 9;
        let xs: Vec<f64> = (0..k).map(|i| i as f64).collect();
        let cs = vec![1.0, 1.0, 1.0, 1.0, 8.0, 1.0, 1.0, 1.0, 1.0];
        // bound 3 * 40 / 9 keeps bucket 4 under the bound
        let mut s = sketch_with(&xs, &cs, 40);
        // k / 3 + 2 = 5 joinable pairs needed
        assert!(s.is_splittable(4));
        for p in [1, 2, 6, 7] {
            s.protected[p] = true;
        }
        // pairs 3, 4, 5 remain at most
        assert!(!s.is_splittable(4));
    }

    #[test]
    fn split_symmetric_halves() {
        let xs: Vec<f64> = (0..7).map(|i| i as f64).collect();
        let mut s = sketch_with(&xs, &[1.0, 4.0, 4.0, 4.0, 4.0, 4.0, 4.0], 25);
        s.split_bucket(3).unwrap();
        assert_eq!(s.thresholds[3], 2.5);
        assert!((s.counters[3] - 2.0).abs() < 1e-12);
        assert!((s.counters[4] - 2.0).abs() < 1e-12);
        assert!(s.protected[2] && s.protected[3] && s.protected[4]);
        assert!(s.split_bucket(0).is_err());
    }

    #[test]
    fn split_children_respect_beta() {
        let xs = [0.0, 1.0, 1.5, 4.0, 4.1, 9.0];
        let cs = [2.0, 30.0, 1.0, 50.0, 0.5, 7.0];
        for i in 1..xs.len() {
            let mut s = sketch_with(&xs, &cs, 90);
            let mass = s.counters[i];
            s.split_bucket(i).unwrap();
            let total: f64 = s.counters[i] + s.counters[i + 1];
            assert!((total - mass).abs() <= 1e-12 * mass);
            assert!(s.counters[i] >= crate::BETA * mass - 1e-12);
            assert!(s.counters[i + 1] >= crate::BETA * mass - 1e-12);
        }
    }

    #[test]
    fn join_preserves_prefix_at_right_threshold() {
        let xs: Vec<f64> = (0..7).map(|i| i as f64).collect();
        let mut s = sketch_with(&xs, &[1.0, 2.0, 3.0, 1.0, 1.0, 1.0, 1.0], 50);
        let before = s.rank(3.0);
        let mid_before = s.rank(2.5);
        s.join_pair(2).unwrap();
        assert_eq!(s.counters[2], 4.0);
        assert_eq!(s.thresholds.len(), 6);
        assert_eq!(s.rank(3.0), before);
        assert!((s.rank(2.5) - mid_before).abs() <= 4.0);
        s.protected[1] = true;
        assert!(s.join_pair(1).is_err());
    }

    #[test]
    fn fixpoint_without_new_data() {
        let mut s = Sketch::with_k(20).unwrap();
        for i in 0..320 {
            s.update(i as f64).unwrap();
        }
        s.consolidate_batch(Vec::new());
        let (t, c) = (s.thresholds.clone(), s.counters.clone());
        s.consolidate_batch(Vec::new());
        assert_eq!(s.thresholds, t);
        assert_eq!(s.counters, c);
    }

    #[test]
    fn overloaded_bucket_is_split_repeatedly() {
        let mut s = Sketch::with_k(30).unwrap();
        for i in 0..480 {
            s.update(i as f64).unwrap();
        }
        assert!(s.is_initialized());
        // flood one bucket with 10 * cb * n / k items
        let flood = (10.0 * 3.0 * 480.0 / 30.0) as usize * 4;
        for j in 0..flood {
            s.update(200.0 + (j % 97) as f64 / 97.0 * 10.0).unwrap();
        }
        s.flush();
        s.check_invariants().unwrap();
        let bound = s.bucket_bound();
        for i in 1..s.thresholds.len() {
            assert!(s.counters[i] <= bound * (1.0 + 1e-12), "bucket {i}: {} > {bound}", s.counters[i]);
        }
    }

    #[test]
    fn new_extremes_create_boundary_buckets() {
        let mut s = Sketch::with_k(10).unwrap();
        for i in 0..160 {
            s.update(i as f64).unwrap();
        }
        let n0 = s.n();
        s.update(-50.0).unwrap();
        s.update(1000.0).unwrap();
        s.flush();
        assert_eq!(s.thresholds[0], -50.0);
        assert_eq!(*s.thresholds.last().unwrap(), 1000.0);
        assert_eq!(s.counters[0], 1.0);
        assert_eq!(s.thresholds.len(), 10);
        assert_eq!(s.n(), n0 + 2);
        s.check_invariants().unwrap();
    }

    #[test]
    fn resize_down_and_up() {
        let mut s = Sketch::with_k(200).unwrap();
        let mut x = 0.5f64;
        for _ in 0..20_000 {
            x = (x * 3.9 * (1.0 - x)).clamp(1e-9, 1.0 - 1e-9);
            s.update(x).unwrap();
        }
        s.flush();
        s.resize(100).unwrap();
        assert_eq!(s.thresholds.len(), 100);
        s.check_invariants().unwrap();
        s.resize(100).unwrap();
        assert_eq!(s.thresholds.len(), 100);
        s.resize(150).unwrap();
        assert_eq!(s.thresholds.len(), 150);
        s.check_invariants().unwrap();
        assert!(s.resize(5).is_err());
    }
}
