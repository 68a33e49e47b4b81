use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use splinesketch::{deserialize, parse_values, serialize, write_values, HeuristicKind, InterpolationKind};
use splinesketch_bench::harness::{run_merge_bench, run_stream, BenchRecord};
use splinesketch_bench::{AlgoConfig, Dataset, DatasetSpec, ExactOracle};

#[derive(Parser)]
#[command(name = "splinesketch", version, about = "Quantile sketch benchmarks and tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset, one value per line.
    Generate {
        #[arg(long)]
        dataset: Dataset,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stream a dataset into one sketch and report its rank error.
    Stream {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        algo: AlgoArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Build one sketch per chunk and merge them over a binary tree.
    MergeBench {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        algo: AlgoArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 1000)]
        chunks: usize,
        /// Merge independent pairs of each tree level in parallel.
        #[arg(long)]
        parallel: bool,
    },
    /// Print the contents of a serialized sketch.
    Inspect { path: PathBuf },
}

#[derive(Args)]
struct Input {
    /// File with one value per line.
    #[arg(long, conflicts_with = "dataset")]
    data: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<Dataset>,
    #[arg(long, default_value_t = 1_000_000)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct AlgoArgs {
    #[arg(long, default_value_t = 100)]
    k: usize,
    /// Buffer capacity; 16k when omitted.
    #[arg(long)]
    buffer: Option<usize>,
    #[arg(long)]
    with_mg: bool,
    #[arg(long)]
    mg_capacity: Option<usize>,
    #[arg(long, default_value_t = 1.5)]
    gamma: f64,
    #[arg(long, default_value = "second_derivative")]
    heuristic: HeuristicKind,
    #[arg(long, default_value = "pchip")]
    interpolation: InterpolationKind,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value_t = 100_000)]
    queries: usize,
    #[arg(long, default_value_t = 3)]
    reps: usize,
    /// CSV file to append the record to; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the final sketch in binary form.
    #[arg(long)]
    sketch_out: Option<PathBuf>,
}

impl AlgoArgs {
    fn config(&self) -> AlgoConfig {
        AlgoConfig {
            k: self.k,
            buffer: self.buffer,
            with_mg: self.with_mg,
            mg_capacity: self.mg_capacity,
            gamma: self.gamma,
            heuristic: self.heuristic,
            interpolation: self.interpolation,
        }
    }
}

type AnyError = Box<dyn std::error::Error>;

fn load(input: &Input) -> Result<(String, Vec<f64>), AnyError> {
    match (&input.data, input.dataset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            let values = parse_values(&text)?;
            if values.is_empty() {
                return Err(format!("{}: no values", path.display()).into());
            }
            let name = path.file_stem().map_or("data".into(), |s| s.to_string_lossy().into_owned());
            Ok((name, values))
        }
        (None, Some(d)) => Ok((d.name().to_string(), DatasetSpec::new(d, input.n, input.seed).generate()?)),
        (None, None) => Err("one of --data or --dataset is required".into()),
    }
}

fn emit(record: &BenchRecord, out: Option<&Path>) -> Result<(), AnyError> {
    match out {
        Some(path) => {
            let fresh = fs::metadata(path).map_or(true, |m| m.len() == 0);
            let file = fs::OpenOptions::new().create(true).append(true).open(path)?;
            record.write_csv(file, fresh)?;
        }
        None => record.write_csv(io::stdout().lock(), true)?,
    }
    Ok(())
}

fn save_sketch(s: &splinesketch::Sketch, path: Option<&Path>) -> Result<(), AnyError> {
    if let Some(path) = path {
        fs::write(path, serialize(s)?)?;
    }
    Ok(())
}

fn inspect(path: &Path) -> Result<(), AnyError> {
    let bytes = fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let s = deserialize(&bytes)?;
    let mut out = io::stdout().lock();
    writeln!(out, "format: SPSK v{} flags={:#04x} ({} bytes)", bytes[4], bytes[5], bytes.len())?;
    writeln!(out, "k: {}", s.thresholds().len())?;
    writeln!(out, "n: {}", s.n())?;
    writeln!(out, "min: {}", s.min().map_or("-".into(), |v| v.to_string()))?;
    writeln!(out, "max: {}", s.max().map_or("-".into(), |v| v.to_string()))?;
    if let Some(mg) = s.heavy_hitters() {
        writeln!(out, "heavy hitters: {}", mg.len())?;
        for (x, c) in mg.entries() {
            writeln!(out, "  {x}\t{}", c.inserted)?;
        }
    }
    let n = s.n().max(1) as f64;
    let widest = s.counters().iter().cloned().fold(0.0, f64::max).max(1e-300);
    writeln!(out, "buckets:")?;
    let mut lo = f64::NEG_INFINITY;
    for (&t, &b) in s.thresholds().iter().zip(s.counters()) {
        let bar = "#".repeat(((b / widest) * 40.0).round() as usize);
        writeln!(out, "  ({lo:>12.6e}, {t:>12.6e}]  {b:>14.3}  {:>6.2}%  {bar}", 100.0 * b / n)?;
        lo = t;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), AnyError> {
    match cli.command {
        Command::Generate { dataset, n, seed, out } => {
            let values = DatasetSpec::new(dataset, n, seed).generate()?;
            let text = write_values(&values);
            match out {
                Some(path) => fs::write(&path, text)?,
                None => io::stdout().lock().write_all(text.as_bytes())?,
            }
        }
        Command::Stream { input, algo, run } => {
            let (name, data) = load(&input)?;
            let oracle = ExactOracle::new(&data);
            let r = run_stream(&name, input.seed, &data, &oracle, &algo.config(), run.queries, run.reps)?;
            emit(&r.record, run.out.as_deref())?;
            save_sketch(&r.sketch, run.sketch_out.as_deref())?;
        }
        Command::MergeBench { input, algo, run, chunks, parallel } => {
            let (name, data) = load(&input)?;
            let oracle = ExactOracle::new(&data);
            let r = run_merge_bench(
                &name,
                input.seed,
                &data,
                &oracle,
                &algo.config(),
                chunks,
                run.queries,
                run.reps,
                parallel,
            )?;
            emit(&r.record, run.out.as_deref())?;
            save_sketch(&r.sketch, run.sketch_out.as_deref())?;
        }
        Command::Inspect { path } => inspect(&path)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
