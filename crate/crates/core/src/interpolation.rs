//! Monotone piecewise-cubic rank interpolation over bucket thresholds.
//!
//! Knots are the bucket thresholds paired with the prefix sums of the bucket
//! counters. Tangents follow the Fritsch-Carlson weighted harmonic mean at
//! interior knots and a one-sided three-point estimate at the two ends,
//! clamped so every segment stays monotone.
//!
//! Tangents are kept in normalized form per segment (tangent divided by the
//! segment secant). This keeps evaluation free of overflow when a segment is
//! extremely short, and makes the monotonicity condition a plain `[0, 3]` box.

use crate::error::{Result, SketchError};

/// Lower bound on the midpoint fraction of any monotone cubic through
/// `(0, 0)` and `(1, 1)`: `1/2 - sqrt(3)/4`.
pub const BETA: f64 = 0.066_987_298_107_780_68;

/// Which interpolation family fills the space between thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum InterpolationKind {
    #[default]
    Pchip,
    Linear,
}

impl InterpolationKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            InterpolationKind::Pchip => "pchip",
            InterpolationKind::Linear => "linear",
        }
    }
}

impl std::str::FromStr for InterpolationKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "pchip" => Ok(InterpolationKind::Pchip),
            "linear" => Ok(InterpolationKind::Linear),
            other => Err(format!("unknown interpolation kind {other:?}")),
        }
    }
}

/// Monotone interpolant of a non-decreasing step-free function.
#[derive(Debug, Clone, PartialEq)]
pub struct Interpolant {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Normalized (left, right) slopes per segment, each in `[0, 3]`.
    slopes: Vec<(f64, f64)>,
    kind: InterpolationKind,
}

impl Interpolant {
    /// Builds the interpolant through `(xs[i], ys[i])`.
    pub fn build(xs: Vec<f64>, ys: Vec<f64>, kind: InterpolationKind) -> Result<Self> {
        if xs.len() != ys.len() || xs.len() < 2 {
            return Err(SketchError::TooFewKnots(xs.len().min(ys.len())));
        }
        for (i, (&x, &y)) in xs.iter().zip(&ys).enumerate() {
            if !x.is_finite() || !y.is_finite() {
                return Err(SketchError::NonFiniteKnot(i));
            }
        }
        for i in 1..xs.len() {
            if xs[i] <= xs[i - 1] {
                return Err(SketchError::NonIncreasingKnots(i));
            }
            if ys[i] < ys[i - 1] {
                return Err(SketchError::DecreasingKnotValues(i));
            }
        }
        let slopes = match kind {
            InterpolationKind::Linear => vec![(1.0, 1.0); xs.len() - 1],
            InterpolationKind::Pchip => pchip_slopes(&xs, &ys),
        };
        Ok(Interpolant { xs, ys, slopes, kind })
    }

    pub fn kind(&self) -> InterpolationKind {
        self.kind
    }

    pub fn knots_x(&self) -> &[f64] {
        &self.xs
    }

    pub fn knots_y(&self) -> &[f64] {
        &self.ys
    }

    /// Value at the last knot, i.e. the total interpolated mass.
    pub fn total(&self) -> f64 {
        self.ys[self.ys.len() - 1]
    }

    /// Tangent at knot `i` in rank per unit of value.
    ///
    /// For a knot between a flat and a rising segment this is 0.
    pub fn tangent(&self, i: usize) -> f64 {
        let seg = if i + 1 < self.xs.len() { i } else { i - 1 };
        let secant = (self.ys[seg + 1] - self.ys[seg]) / (self.xs[seg + 1] - self.xs[seg]);
        let normalized = if seg == i { self.slopes[seg].0 } else { self.slopes[seg].1 };
        normalized * secant
    }

    /// Evaluates the interpolant. No extrapolation: 0 before the first knot
    /// and the last knot value from the last knot on.
    pub fn eval(&self, x: f64) -> f64 {
        let last = self.xs.len() - 1;
        if x < self.xs[0] {
            return 0.0;
        }
        if x >= self.xs[last] {
            return self.ys[last];
        }
        // xs[j] <= x < xs[j + 1]
        let j = self.xs.partition_point(|&t| t <= x) - 1;
        self.eval_segment(j, x)
    }

    #[inline]
    fn eval_segment(&self, j: usize, x: f64) -> f64 {
        let (x0, x1) = (self.xs[j], self.xs[j + 1]);
        let (y0, y1) = (self.ys[j], self.ys[j + 1]);
        if x <= x0 {
            return y0;
        }
        let dy = y1 - y0;
        if dy <= 0.0 {
            return y0;
        }
        let t = (x - x0) / (x1 - x0);
        let p = match self.kind {
            InterpolationKind::Linear => t,
            InterpolationKind::Pchip => {
                let (a, b) = self.slopes[j];
                let s = 1.0 - t;
                t + t * s * ((a - 1.0) * s - (b - 1.0) * t)
            }
        };
        (y0 + dy * p).clamp(y0, y1)
    }

    /// Finds `x` with `eval(x)` within `max(1e-9 * total, 1e-12)` of `r`.
    ///
    /// Ranks at or below the first knot value map to the first knot.
    pub fn invert(&self, r: f64) -> Result<f64> {
        let total = self.total();
        let slack = 1e-12 * total.max(1.0);
        if r.is_nan() || r < -slack || r > total + slack {
            return Err(SketchError::RankOutOfRange { rank: r, lo: 0.0, hi: total });
        }
        let r = r.clamp(0.0, total);
        // first knot whose value reaches r
        let j = self.ys.partition_point(|&y| y < r);
        if j == 0 {
            return Ok(self.xs[0]);
        }
        if j >= self.xs.len() {
            return Ok(self.xs[self.xs.len() - 1]);
        }
        let tol = (1e-9 * total).max(1e-12);
        let (mut lo, mut hi) = (self.xs[j - 1], self.xs[j]);
        for _ in 0..64 {
            let mid = lo + (hi - lo) / 2.0;
            if mid <= lo || mid >= hi {
                break;
            }
            let v = self.eval_segment(j - 1, mid);
            if (v - r).abs() <= tol {
                return Ok(mid);
            }
            if v < r {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(hi)
    }

    /// Share of bucket `i`'s mass that lies left of the bucket midpoint.
    ///
    /// Bucket `i` spans `(xs[i - 1], xs[i]]`; bucket 0 is a point mass and
    /// cannot be asked for.
    pub fn midpoint_fraction(&self, i: usize) -> Result<f64> {
        if i == 0 || i >= self.xs.len() {
            return Err(SketchError::InvalidBucket(i));
        }
        let mass = self.ys[i] - self.ys[i - 1];
        if mass <= 0.0 {
            return Err(SketchError::ZeroMassBucket(i));
        }
        let mid = midpoint(self.xs[i - 1], self.xs[i]);
        Ok(((self.eval_segment(i - 1, mid) - self.ys[i - 1]) / mass).clamp(0.0, 1.0))
    }
}

/// Midpoint of `a` and `b` that cannot overflow.
#[inline]
pub fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m.is_finite() {
        m
    } else {
        a / 2.0 + b / 2.0
    }
}

fn pchip_slopes(xs: &[f64], ys: &[f64]) -> Vec<(f64, f64)> {
    let segs = xs.len() - 1;
    let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let dy: Vec<f64> = ys.windows(2).map(|w| w[1] - w[0]).collect();
    let mut slopes = vec![(0.0, 0.0); segs];
    if segs == 1 {
        slopes[0] = (1.0, 1.0);
        return slopes;
    }
    // ratio of secants d[a] / d[b], assuming dy[b] > 0
    let secant_ratio = |a: usize, b: usize| (dy[a] / dy[b]) * (h[b] / h[a]);

    for i in 1..segs {
        // interior knot i between segments i-1 and i
        if dy[i - 1] <= 0.0 || dy[i] <= 0.0 {
            slopes[i - 1].1 = 0.0;
            slopes[i].0 = 0.0;
            continue;
        }
        let scale = h[i].max(h[i - 1]);
        let (hl, hr) = (h[i - 1] / scale, h[i] / scale);
        let w1 = 2.0 * hr + hl;
        let w2 = hr + 2.0 * hl;
        // rho = d[i-1] / d[i]
        let rho = secant_ratio(i - 1, i);
        slopes[i - 1].1 = bounded((w1 + w2) / (w1 + w2 * rho));
        slopes[i].0 = bounded((w1 + w2) / (w1 / rho + w2));
    }

    slopes[0].0 = end_slope(h[0], h[1], dy[0], dy[1], || secant_ratio(1, 0));
    let (a, b) = (segs - 1, segs - 2);
    slopes[a].1 = end_slope(h[a], h[b], dy[a], dy[b], || secant_ratio(b, a));
    slopes
}

/// Normalized three-point end tangent `((2 h0 + h1) d0 - h0 d1) / ((h0 + h1) d0)`.
fn end_slope(h0: f64, h1: f64, dy0: f64, dy1: f64, ratio: impl Fn() -> f64) -> f64 {
    if dy0 <= 0.0 {
        return 0.0;
    }
    let far = if dy1 <= 0.0 { 0.0 } else { ratio() };
    let scale = h0.max(h1);
    let (a, b) = (h0 / scale, h1 / scale);
    bounded(((2.0 * a + b) - a * far) / (a + b))
}

#[inline]
fn bounded(v: f64) -> f64 {
    // NaN.max(0.0) == 0.0
    v.max(0.0).min(3.0)
}
