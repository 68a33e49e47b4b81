//! Exact ranks and error metrics for datasets that fit in memory.

use splinesketch::Sketch;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("aspect ratio needs at least 2 distinct items")]
    TooFewDistinct,
}

/// Sorted copy of a dataset.
#[derive(Debug, Clone)]
pub struct ExactOracle {
    sorted: Vec<f64>,
}

/// Normalized rank errors over a query set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    pub avg_norm_err: f64,
    pub max_norm_err: f64,
    pub query_count: usize,
}

impl ExactOracle {
    pub fn new(data: &[f64]) -> Self {
        let mut sorted: Vec<f64> = data.iter().map(|x| x + 0.0).collect();
        sorted.sort_unstable_by(f64::total_cmp);
        ExactOracle { sorted }
    }

    pub fn n(&self) -> usize {
        self.sorted.len()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    /// Number of items `<= x`.
    pub fn exact_rank(&self, x: f64) -> u64 {
        self.sorted.partition_point(|&v| v <= x) as u64
    }

    /// Number of items equal to `x`.
    pub fn frequency(&self, x: f64) -> u64 {
        self.exact_rank(x) - self.sorted.partition_point(|&v| v < x) as u64
    }

    /// Distinct values with their frequencies, ascending.
    pub fn frequencies(&self) -> Vec<(f64, u64)> {
        let mut out: Vec<(f64, u64)> = Vec::new();
        for &x in &self.sorted {
            match out.last_mut() {
                Some(l) if l.0 == x => l.1 += 1,
                _ => out.push((x, 1)),
            }
        }
        out
    }

    /// `(max - min) / smallest gap between distinct items`.
    pub fn aspect_ratio(&self) -> Result<f64, OracleError> {
        let distinct = self.frequencies();
        if distinct.len() < 2 {
            return Err(OracleError::TooFewDistinct);
        }
        let gap = distinct
            .windows(2)
            .map(|w| w[1].0 - w[0].0)
            .fold(f64::INFINITY, f64::min);
        Ok((distinct[distinct.len() - 1].0 - distinct[0].0) / gap)
    }

    /// Items at `min(m, n)` evenly spaced positions of the sorted data.
    pub fn queries(&self, m: usize) -> Vec<f64> {
        let n = self.sorted.len();
        let m = m.min(n);
        match m {
            0 => Vec::new(),
            1 => vec![self.sorted[n - 1]],
            _ => (0..m).map(|i| self.sorted[i * (n - 1) / (m - 1)]).collect(),
        }
    }

    /// Average and maximum of `|rank_est(x) - rank(x)| / n` over the queries.
    pub fn evaluate_queries(&self, sketch: &Sketch, queries: &[f64]) -> ErrorReport {
        let n = self.sorted.len().max(1) as f64;
        let (mut sum, mut max) = (0.0f64, 0.0f64);
        for &x in queries {
            let e = (sketch.rank(x) - self.exact_rank(x) as f64).abs() / n;
            sum += e;
            max = max.max(e);
        }
        let count = queries.len();
        ErrorReport {
            avg_norm_err: if count == 0 { 0.0 } else { sum / count as f64 },
            max_norm_err: max,
            query_count: count,
        }
    }

    pub fn evaluate(&self, sketch: &Sketch, m: usize) -> ErrorReport {
        self.evaluate_queries(sketch, &self.queries(m))
    }
}
