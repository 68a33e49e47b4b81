//! Streaming and merge-tree benchmark runs producing CSV records.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use splinesketch::{
    serialize, serialized_size, HeuristicKind, InterpolationKind, Sketch, SketchConfig,
    SketchError,
};

use crate::oracle::{ErrorReport, ExactOracle};

/// Sketch settings exercised by a benchmark run.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgoConfig {
    pub k: usize,
    pub buffer: Option<usize>,
    pub with_mg: bool,
    pub mg_capacity: Option<usize>,
    pub gamma: f64,
    pub heuristic: HeuristicKind,
    pub interpolation: InterpolationKind,
}

impl AlgoConfig {
    pub fn new(k: usize) -> Self {
        AlgoConfig {
            k,
            buffer: None,
            with_mg: false,
            mg_capacity: None,
            gamma: 1.5,
            heuristic: HeuristicKind::default(),
            interpolation: InterpolationKind::default(),
        }
    }

    pub fn sketch_config(&self) -> SketchConfig {
        let mut c = SketchConfig::new(self.k);
        if let Some(b) = self.buffer {
            c.buffer_capacity = b;
        }
        c.with_mg = self.with_mg;
        if let Some(m) = self.mg_capacity {
            c.mg_capacity = m;
        }
        c.gamma = self.gamma;
        c.heuristic = self.heuristic;
        c.interpolation = self.interpolation;
        c
    }

    pub fn label(&self) -> String {
        format!(
            "splinesketch(mg={},heuristic={},interp={},gamma={})",
            u8::from(self.with_mg),
            self.heuristic.as_str(),
            self.interpolation.as_str(),
            self.gamma
        )
    }

    pub fn build(&self) -> Result<Sketch, SketchError> {
        Sketch::new(self.sketch_config())
    }
}

/// One CSV row of results. Timings are medians over repetitions.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub dataset: String,
    pub algo: String,
    pub k: usize,
    pub size_bytes: usize,
    pub n: usize,
    pub avg_err: f64,
    pub max_err: f64,
    pub update_ns: f64,
    pub query_ns: f64,
    pub merge_ns: Option<f64>,
    pub seed: u64,
}

pub const CSV_HEADER: [&str; 11] = [
    "dataset", "algo", "k", "size_bytes", "n", "avg_err", "max_err", "update_ns", "query_ns",
    "merge_ns", "seed",
];

impl BenchRecord {
    pub fn fields(&self) -> [String; 11] {
        [
            self.dataset.clone(),
            self.algo.clone(),
            self.k.to_string(),
            self.size_bytes.to_string(),
            self.n.to_string(),
            format!("{:e}", self.avg_err),
            format!("{:e}", self.max_err),
            format!("{:.2}", self.update_ns),
            format!("{:.2}", self.query_ns),
            self.merge_ns.map_or(String::new(), |m| format!("{m:.2}")),
            self.seed.to_string(),
        ]
    }

    /// Writes the record as CSV, with a header line when `header` is set.
    pub fn write_csv<W: Write>(&self, out: W, header: bool) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        if header {
            w.write_record(CSV_HEADER)?;
        }
        w.write_record(self.fields())?;
        w.flush()?;
        Ok(())
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m == 0 {
        0.0
    } else if m % 2 == 1 {
        v[m / 2]
    } else {
        (v[m / 2 - 1] + v[m / 2]) / 2.0
    }
}

/// Serialized length, or the format's size formula when the sketch has no
/// buckets yet.
pub fn sketch_size(s: &Sketch) -> usize {
    match serialize(s) {
        Ok(b) => b.len(),
        Err(_) => serialized_size(s.k(), s.heavy_hitters().map(|mg| mg.len())),
    }
}

/// Feeds `data` into a fresh sketch, flushes, and compresses the
/// heavy-hitter table when present.
pub fn ingest(cfg: &AlgoConfig, data: &[f64]) -> Result<Sketch, SketchError> {
    let mut s = cfg.build()?;
    for &x in data {
        s.update(x)?;
    }
    s.flush();
    if cfg.with_mg {
        s.compress_heavy_hitters()?;
    }
    Ok(s)
}

/// Outcome of a streaming run.
pub struct StreamRun {
    pub record: BenchRecord,
    pub sketch: Sketch,
    pub report: ErrorReport,
}

/// Single-sketch ingest followed by `queries` evenly spaced rank queries.
pub fn run_stream(
    dataset: &str,
    seed: u64,
    data: &[f64],
    oracle: &ExactOracle,
    cfg: &AlgoConfig,
    queries: usize,
    reps: usize,
) -> Result<StreamRun, SketchError> {
    let reps = reps.max(1);
    let qs = oracle.queries(queries);
    let mut update = Vec::with_capacity(reps);
    let mut query = Vec::with_capacity(reps);
    let mut kept = None;
    for _ in 0..reps {
        let t = Instant::now();
        let s = ingest(cfg, data)?;
        update.push(t.elapsed().as_nanos() as f64 / data.len().max(1) as f64);
        let t = Instant::now();
        let mut acc = 0.0;
        for &x in &qs {
            acc += s.rank(x);
        }
        std::hint::black_box(acc);
        query.push(t.elapsed().as_nanos() as f64 / qs.len().max(1) as f64);
        kept.get_or_insert(s);
    }
    let sketch = kept.expect("at least one repetition");
    let report = oracle.evaluate_queries(&sketch, &qs);
    let record = BenchRecord {
        dataset: dataset.to_string(),
        algo: cfg.label(),
        k: cfg.k,
        size_bytes: sketch_size(&sketch),
        n: data.len(),
        avg_err: report.avg_norm_err,
        max_err: report.max_norm_err,
        update_ns: median(update),
        query_ns: median(query),
        merge_ns: None,
        seed,
    };
    Ok(StreamRun { record, sketch, report })
}

#[derive(Debug, thiserror::Error)]
pub enum MergeBenchError {
    #[error("need at least 2 chunks, got {0}")]
    TooFewChunks(usize),
    #[error("{chunks} chunks exceed {n} items")]
    TooManyChunks { chunks: usize, n: usize },
    #[error(transparent)]
    Sketch(#[from] SketchError),
}

/// Builds one flushed sketch per contiguous chunk, then merges them pairwise
/// over a balanced binary tree. Returns the root and the per-merge times.
pub fn merge_tree(
    cfg: &AlgoConfig,
    data: &[f64],
    chunks: usize,
    parallel: bool,
) -> Result<(Sketch, Vec<f64>), MergeBenchError> {
    if chunks < 2 {
        return Err(MergeBenchError::TooFewChunks(chunks));
    }
    let n = data.len();
    if chunks > n {
        return Err(MergeBenchError::TooManyChunks { chunks, n });
    }
    let bounds: Vec<(usize, usize)> = (0..chunks).map(|i| (i * n / chunks, (i + 1) * n / chunks)).collect();
    let build = |&(a, b): &(usize, usize)| -> Result<Sketch, SketchError> {
        let mut s = cfg.build()?;
        for &x in &data[a..b] {
            s.update(x)?;
        }
        s.flush();
        Ok(s)
    };
    let mut level: Vec<Sketch> = if parallel {
        bounds.par_iter().map(build).collect::<Result<_, _>>()?
    } else {
        bounds.iter().map(build).collect::<Result<_, _>>()?
    };
    let mut times = Vec::with_capacity(chunks);
    while level.len() > 1 {
        let mut pairs: Vec<(Sketch, Option<Sketch>)> = Vec::with_capacity(level.len() / 2 + 1);
        let mut it = level.into_iter();
        while let Some(a) = it.next() {
            pairs.push((a, it.next()));
        }
        let step = |(mut a, b): (Sketch, Option<Sketch>)| -> (Sketch, Option<f64>) {
            match b {
                Some(b) => {
                    let t = Instant::now();
                    a.merge(b);
                    (a, Some(t.elapsed().as_nanos() as f64))
                }
                None => (a, None),
            }
        };
        let merged: Vec<(Sketch, Option<f64>)> = if parallel {
            pairs.into_par_iter().map(step).collect()
        } else {
            pairs.into_iter().map(step).collect()
        };
        level = Vec::with_capacity(merged.len());
        for (s, t) in merged {
            times.extend(t);
            level.push(s);
        }
    }
    let mut root = level.pop().expect("non-empty tree");
    root.flush();
    if cfg.with_mg {
        root.compress_heavy_hitters()?;
    }
    Ok((root, times))
}

/// Merge-tree run: accuracy of the root sketch and the median merge time.
pub fn run_merge_bench(
    dataset: &str,
    seed: u64,
    data: &[f64],
    oracle: &ExactOracle,
    cfg: &AlgoConfig,
    chunks: usize,
    queries: usize,
    reps: usize,
    parallel: bool,
) -> Result<StreamRun, MergeBenchError> {
    let reps = reps.max(1);
    let qs = oracle.queries(queries);
    let mut merge = Vec::with_capacity(reps);
    let mut query = Vec::with_capacity(reps);
    let mut kept = None;
    for _ in 0..reps {
        let (root, times) = merge_tree(cfg, data, chunks, parallel)?;
        merge.push(median(times));
        let t = Instant::now();
        let mut acc = 0.0;
        for &x in &qs {
            acc += root.rank(x);
        }
        std::hint::black_box(acc);
        query.push(t.elapsed().as_nanos() as f64 / qs.len().max(1) as f64);
        kept.get_or_insert(root);
    }
    let sketch = kept.expect("at least one repetition");
    let report = oracle.evaluate_queries(&sketch, &qs);
    let record = BenchRecord {
        dataset: dataset.to_string(),
        algo: cfg.label(),
        k: cfg.k,
        size_bytes: sketch_size(&sketch),
        n: data.len(),
        avg_err: report.avg_norm_err,
        max_err: report.max_norm_err,
        update_ns: 0.0,
        query_ns: median(query),
        merge_ns: Some(median(merge)),
        seed,
    };
    Ok(StreamRun { record, sketch, report })
}
