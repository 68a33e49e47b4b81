//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion.
//!
//! Exits 0 regardless of failures unless `ACCEPTANCE_STRICT=1` is set, so the
//! report can run as part of the regular test suite.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use splinesketch::{
    deserialize, serialize, serialized_size, HeuristicKind, Interpolant, InterpolationKind, Sketch,
    SketchConfig, BETA,
};
use splinesketch_bench::harness::{run_merge_bench, run_stream};
use splinesketch_bench::{AlgoConfig, Dataset, DatasetSpec, ExactOracle};

const QUERIES: usize = 100_000;

#[derive(Default)]
struct Report {
    failed: Vec<u32>,
    max_doublings: u64,
    cap_hits: u64,
    sketches: u64,
}

impl Report {
    fn line(&mut self, id: u32, ok: bool, what: &str) {
        println!("{} {id:>2}  {what}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            self.failed.push(id);
        }
    }

    fn info(&self, what: &str) {
        println!("INFO     {what}");
    }

    fn observe(&mut self, s: &Sketch) {
        let st = s.stats();
        self.max_doublings = self.max_doublings.max(st.max_cb_doublings_per_epoch);
        self.cap_hits += st.iteration_cap_hits;
        self.sketches += 1;
    }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn midpoint_fractions(r: &mut Report) {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (lo, hi) = (0.5 - 3f64.sqrt() / 4.0 - 1e-9, 0.5 + 3f64.sqrt() / 4.0 + 1e-9);
    let mut checked = 0;
    let mut bad = 0;
    while checked < 10_000 {
        let m = rng.random_range(3..10);
        let mut x = 0.0;
        let mut y = 0.0;
        let mut xs = Vec::with_capacity(m);
        let mut ys = Vec::with_capacity(m);
        for _ in 0..m {
            x += 10f64.powf(rng.random_range(-3.0..3.0));
            y += if rng.random_bool(0.2) { 0.0 } else { 10f64.powf(rng.random_range(-3.0..3.0)) };
            xs.push(x);
            ys.push(y);
        }
        let ip = Interpolant::build(xs, ys.clone(), InterpolationKind::Pchip).unwrap();
        for i in 1..m {
            if ys[i] > ys[i - 1] && checked < 10_000 {
                let f = ip.midpoint_fraction(i).unwrap();
                if !(lo..=hi).contains(&f) {
                    bad += 1;
                }
                checked += 1;
            }
        }
    }
    let el = t.elapsed();
    r.line(
        1,
        bad == 0 && el < Duration::from_secs(5),
        &format!("midpoint fraction in [{BETA:.4}, {:.4}]: {checked} segments, {bad} violations, {:.2}s", 1.0 - BETA, secs(el)),
    );
}

fn monotone_and_mass(r: &mut Report) {
    let mut rank_bad = 0u64;
    let mut mass_bad = 0u64;
    let mut consolidations = 0u64;
    for i in 0..50u64 {
        let d = Dataset::ALL[i as usize % Dataset::ALL.len()];
        let data = DatasetSpec::new(d, 100_000, 100 + i).generate().unwrap();
        let mut s = Sketch::new(SketchConfig::new(64).with_mg(i % 2 == 1)).unwrap();
        let mut seen = 0;
        for &x in &data {
            s.update(x).unwrap();
            if s.stats().consolidations != seen {
                seen = s.stats().consolidations;
                let mg = s.heavy_hitters().map_or(0, |m| m.mass());
                let total = s.bucket_mass() + s.unbucketed_mass() as f64 + mg as f64;
                if (total - s.n() as f64).abs() > 1e-9 * s.n() as f64 {
                    mass_bad += 1;
                }
            }
        }
        s.flush();
        consolidations += s.stats().consolidations;
        r.observe(&s);

        let o = ExactOracle::new(&data);
        let (lo, hi) = (o.sorted()[0], o.sorted()[o.n() - 1]);
        let mut grid = o.queries(5000);
        grid.extend((0..5000).map(|j| lo + (hi - lo) * (j as f64 / 4999.0)));
        grid.push(f64::MIN);
        grid.push(f64::MAX);
        grid.sort_by(f64::total_cmp);
        let n = s.n() as f64;
        let mut prev = f64::NEG_INFINITY;
        for &g in &grid {
            let v = s.rank(g);
            if v < prev || !(0.0..=n).contains(&v) {
                rank_bad += 1;
            }
            prev = v;
        }
    }
    r.line(2, rank_bad == 0, &format!("rank monotone and in [0, n]: 50 streams, {rank_bad} violations"));
    r.line(
        3,
        mass_bad == 0,
        &format!("mass conserved after each of {consolidations} consolidations: {mass_bad} violations"),
    );
}

fn initialization(r: &mut Report) {
    let mut bad = 0;
    let mut points = 0;
    for (i, k) in [6usize, 20, 64, 100, 200].into_iter().enumerate() {
        for d in [Dataset::Normal, Dataset::SortedWithFrequent, Dataset::SignedLoguniformExtreme] {
            let data = DatasetSpec::new(d, 16 * k, i as u64).generate().unwrap();
            let mut s = Sketch::with_k(k).unwrap();
            for &x in &data {
                s.update(x).unwrap();
            }
            let o = ExactOracle::new(&data);
            for &t in s.thresholds() {
                points += 1;
                if s.rank(t) != o.exact_rank(t) as f64 {
                    bad += 1;
                }
            }
        }
    }
    r.line(4, bad == 0, &format!("exact ranks at thresholds after initialization: {points} thresholds, {bad} wrong"));
}

struct Streamed {
    normal: Vec<f64>,
    normal_oracle: ExactOracle,
    normal_err: f64,
}

fn streaming(r: &mut Report) -> Streamed {
    let mut kept = None;
    for d in [Dataset::Normal, Dataset::Uniform, Dataset::Lognormal] {
        let t = Instant::now();
        let data = DatasetSpec::new(d, 10_000_000, 1).generate().unwrap();
        let o = ExactOracle::new(&data);
        let run = run_stream(d.name(), 1, &data, &o, &AlgoConfig::new(100), QUERIES, 3).unwrap();
        let el = t.elapsed();
        r.observe(&run.sketch);
        let err = run.report.avg_norm_err;
        r.line(
            5,
            err <= 1e-3 && el <= Duration::from_secs(120),
            &format!("{} n=1e7 k=100 avg error {err:.3e} (gate 1e-3), {:.1}s", d.name(), secs(el)),
        );
        if d == Dataset::Normal {
            let per_sec = 1e9 / run.record.update_ns;
            r.line(
                12,
                per_sec >= 1e6,
                &format!("throughput {:.2e} updates/s on normal n=1e7 (gate 1e6)", per_sec),
            );
            kept = Some(Streamed { normal: data, normal_oracle: o, normal_err: err });
        }
    }
    kept.expect("normal run")
}

fn merge_tree(r: &mut Report, big: &Streamed) {
    let data = DatasetSpec::new(Dataset::Normal, 1_000_000, 1).generate().unwrap();
    let o = ExactOracle::new(&data);
    let cfg = AlgoConfig::new(100);
    let stream = run_stream("normal", 1, &data, &o, &cfg, QUERIES, 1).unwrap();
    let merged = run_merge_bench("normal", 1, &data, &o, &cfg, 1000, QUERIES, 1, true).unwrap();
    r.observe(&merged.sketch);
    let (s, m) = (stream.report.avg_norm_err, merged.report.avg_norm_err);
    r.line(
        6,
        m <= 10.0 * s && m <= 1e-2,
        &format!("merge tree n=1e6 M=1000: avg error {m:.3e} = {:.1}x streaming {s:.3e} (gates 10x, 1e-2)", m / s),
    );

    let merged = run_merge_bench("normal", 1, &big.normal, &big.normal_oracle, &cfg, 1000, QUERIES, 1, true).unwrap();
    r.observe(&merged.sketch);
    let m = merged.report.avg_norm_err;
    r.info(&format!(
        "merge tree n=1e7 M=1000: avg error {m:.3e} = {:.1}x streaming {:.3e}",
        m / big.normal_err,
        big.normal_err
    ));
}

fn heavy_hitters(r: &mut Report) {
    let data = DatasetSpec::new(Dataset::Distinct42, 1_000_000, 1).generate().unwrap();
    let o = ExactOracle::new(&data);
    let mut cfg = AlgoConfig::new(200);
    cfg.with_mg = true;
    let with = run_stream("distinct42", 1, &data, &o, &cfg, QUERIES, 1).unwrap();
    cfg.with_mg = false;
    let without = run_stream("distinct42", 1, &data, &o, &cfg, QUERIES, 1).unwrap();
    r.observe(&with.sketch);
    r.observe(&without.sketch);
    // rank is a step function here, so also probe just below every value
    let mut worst = with.report.max_norm_err;
    for (x, _) in o.frequencies() {
        let below = x - x.abs().max(1.0) * 1e-12;
        for q in [x, below] {
            let e = (with.sketch.rank(q) - o.exact_rank(q) as f64).abs() / o.n() as f64;
            worst = worst.max(e);
        }
    }
    let w = without.report.max_norm_err;
    r.line(
        7,
        worst == 0.0 && w > worst,
        &format!("42 distinct values n=1e6 k=200: max error {worst:.1e} with MG, {w:.3e} without"),
    );
}

fn mg_bound(r: &mut Report) {
    let mut bad = 0;
    let mut checked = 0;
    for i in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + i);
        let cap = rng.random_range(8..300);
        let n = rng.random_range(10_000..200_000);
        let distinct = rng.random_range(10..5000) as f64;
        let skew = rng.random_range(0.5..3.0);
        let data: Vec<f64> = (0..n)
            .map(|_| (distinct * rng.random::<f64>().powf(skew)).floor())
            .collect();
        let mut cfg = SketchConfig::new(rng.random_range(6..100)).with_mg(true);
        cfg.mg_capacity = cap;
        let mut s = Sketch::new(cfg).unwrap();
        for &x in &data {
            s.update(x).unwrap();
        }
        s.flush();
        r.observe(&s);
        let mg = s.heavy_hitters().unwrap();
        let slack = n as f64 / cap as f64;
        for (x, f) in ExactOracle::new(&data).frequencies() {
            let est = mg.get(x).map_or(0, |c| c.count);
            checked += 1;
            if est > f || (f - est) as f64 > slack {
                bad += 1;
            }
        }
    }
    r.line(8, bad == 0, &format!("heavy-hitter undercount <= n/capacity: {checked} items over 20 streams, {bad} violations"));
}

fn ablations(r: &mut Report, big: &Streamed) {
    let data = DatasetSpec::new(Dataset::Normal, 1_000_000, 1).generate().unwrap();
    let o = ExactOracle::new(&data);
    let err = |data: &[f64], o: &ExactOracle, heuristic, interpolation| {
        let mut cfg = AlgoConfig::new(100);
        cfg.heuristic = heuristic;
        cfg.interpolation = interpolation;
        run_stream("normal", 1, data, o, &cfg, QUERIES, 1).unwrap().report.avg_norm_err
    };
    let base = err(&data, &o, HeuristicKind::SecondDerivative, InterpolationKind::Pchip);
    let linear = err(&data, &o, HeuristicKind::SecondDerivative, InterpolationKind::Linear);
    let none = err(&data, &o, HeuristicKind::None, InterpolationKind::Pchip);
    r.line(
        9,
        base <= linear / 3.0,
        &format!("n=1e6 pchip {base:.3e} vs linear {linear:.3e}: {:.2}x better (gate 3x)", linear / base),
    );
    r.line(
        9,
        base <= none / 5.0,
        &format!("n=1e6 second_derivative {base:.3e} vs none {none:.3e}: {:.2}x better (gate 5x)", none / base),
    );

    let linear = err(&big.normal, &big.normal_oracle, HeuristicKind::SecondDerivative, InterpolationKind::Linear);
    let none = err(&big.normal, &big.normal_oracle, HeuristicKind::None, InterpolationKind::Pchip);
    let b = big.normal_err;
    r.info(&format!("n=1e7 pchip {b:.3e} vs linear {linear:.3e}: {:.2}x better", linear / b));
    r.info(&format!("n=1e7 second_derivative {b:.3e} vs none {none:.3e}: {:.2}x better", none / b));
}

fn serialization(r: &mut Report) {
    let mut bad = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut made = 0;
    while made < 100 {
        let k = rng.random_range(6..300);
        let mg = rng.random_bool(0.5);
        let d = Dataset::ALL[rng.random_range(0..Dataset::ALL.len())];
        let n = rng.random_range(1..60_000);
        let data = DatasetSpec::new(d, n, made).generate().unwrap();
        let mut s = Sketch::new(SketchConfig::new(k).with_mg(mg)).unwrap();
        for &x in &data {
            s.update(x).unwrap();
        }
        s.flush();
        if mg {
            s.compress_heavy_hitters().unwrap();
        }
        let Ok(bytes) = serialize(&s) else { continue };
        made += 1;
        let ell = s.heavy_hitters().map(|m| m.len());
        let again = deserialize(&bytes).and_then(|t| serialize(&t));
        if again.as_deref() != Ok(bytes.as_slice()) || bytes.len() != serialized_size(s.thresholds().len(), ell) {
            bad += 1;
        }
    }
    r.line(10, bad == 0, &format!("byte-identical round trip and size formula: {made} sketches, {bad} mismatches"));
}

fn adversarial(r: &mut Report) {
    let data = DatasetSpec::new(Dataset::SignedLoguniformExtreme, 1_000_000, 1).generate().unwrap();
    let o = ExactOracle::new(&data);
    let run = run_stream("signed_loguniform_extreme", 1, &data, &o, &AlgoConfig::new(100), QUERIES, 1).unwrap();
    r.observe(&run.sketch);
    let e = run.report.max_norm_err;
    r.line(13, e <= 0.1, &format!("signed_loguniform_extreme n=1e6 k=100 max error {e:.3e} (gate 0.1)"));
}

fn main() {
    let t = Instant::now();
    let mut r = Report::default();
    midpoint_fractions(&mut r);
    monotone_and_mass(&mut r);
    initialization(&mut r);
    let big = streaming(&mut r);
    merge_tree(&mut r, &big);
    heavy_hitters(&mut r);
    mg_bound(&mut r);
    ablations(&mut r, &big);
    serialization(&mut r);
    adversarial(&mut r);
    r.line(
        11,
        r.max_doublings < 20,
        &format!(
            "consolidation terminated in all {} sketches; max c_b doublings per epoch {}, iteration cap hits {}",
            r.sketches, r.max_doublings, r.cap_hits
        ),
    );

    r.failed.dedup();
    println!("acceptance finished in {:.1}s, failing: {:?}", secs(t.elapsed()), r.failed);
    if !r.failed.is_empty() && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
