//! Seeded synthetic datasets.

use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gumbel, LogNormal, Normal, Pareto};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dataset {
    Uniform,
    Normal,
    Pareto,
    Gumbel,
    Lognormal,
    Loguniform,
    SignedLoguniform,
    SignedLoguniformExtreme,
    NormalSmallChange,
    NormalLargeChange,
    NormalPlusDistinct42,
    SortedWithFrequent,
    /// Only 42 distinct values, each with a random large frequency, in
    /// random order.
    Distinct42,
}

impl Dataset {
    pub const ALL: [Dataset; 13] = [
        Dataset::Uniform,
        Dataset::Normal,
        Dataset::Pareto,
        Dataset::Gumbel,
        Dataset::Lognormal,
        Dataset::Loguniform,
        Dataset::SignedLoguniform,
        Dataset::SignedLoguniformExtreme,
        Dataset::NormalSmallChange,
        Dataset::NormalLargeChange,
        Dataset::NormalPlusDistinct42,
        Dataset::SortedWithFrequent,
        Dataset::Distinct42,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Dataset::Uniform => "uniform",
            Dataset::Normal => "normal",
            Dataset::Pareto => "pareto",
            Dataset::Gumbel => "gumbel",
            Dataset::Lognormal => "lognormal",
            Dataset::Loguniform => "loguniform",
            Dataset::SignedLoguniform => "signed_loguniform",
            Dataset::SignedLoguniformExtreme => "signed_loguniform_extreme",
            Dataset::NormalSmallChange => "normal_small_change",
            Dataset::NormalLargeChange => "normal_large_change",
            Dataset::NormalPlusDistinct42 => "normal_plus_distinct42",
            Dataset::SortedWithFrequent => "sorted_with_frequent",
            Dataset::Distinct42 => "distinct42",
        }
    }

    /// Human-readable distribution parameters.
    pub fn params(&self) -> &'static str {
        match self {
            Dataset::Uniform => "U(0,1)",
            Dataset::Normal => "N(0,1)",
            Dataset::Pareto => "Pareto(scale=1,shape=1.5)",
            Dataset::Gumbel => "Gumbel(0,1)",
            Dataset::Lognormal => "LogNormal(0,1)",
            Dataset::Loguniform => "10^U(-3,3)",
            Dataset::SignedLoguniform => "±10^U(-3,3)",
            Dataset::SignedLoguniformExtreme => "±10^U(-300,300)",
            Dataset::NormalSmallChange => "N(0,1) then N(1,1)",
            Dataset::NormalLargeChange => "N(0,1) then N(100,10)",
            Dataset::NormalPlusDistinct42 => "N(0,1) then 42 values in [-2.05,2.05]",
            Dataset::SortedWithFrequent => "ascending integers, frequency U[1,n/50]",
            Dataset::Distinct42 => "42 N(0,1) values, weights U[1,100]",
        }
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DatagenError {
    #[error("unknown dataset {0:?}")]
    UnknownDataset(String),
    #[error("dataset size must be at least 1")]
    EmptyDataset,
}

impl FromStr for Dataset {
    type Err = DatagenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Dataset::ALL
            .iter()
            .copied()
            .find(|d| d.name() == s)
            .ok_or_else(|| DatagenError::UnknownDataset(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DatasetSpec {
    pub dataset: Dataset,
    pub n: usize,
    pub seed: u64,
}

impl DatasetSpec {
    pub fn new(dataset: Dataset, n: usize, seed: u64) -> Self {
        DatasetSpec { dataset, n, seed }
    }

    pub fn generate(&self) -> Result<Vec<f64>, DatagenError> {
        generate(self)
    }
}

fn loguniform(rng: &mut ChaCha8Rng, exp: f64) -> f64 {
    10f64.powf(rng.random_range(-exp..exp))
}

fn sign(rng: &mut ChaCha8Rng) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

fn normals(rng: &mut ChaCha8Rng, n: usize, mean: f64, sd: f64) -> impl Iterator<Item = f64> + '_ {
    let d = Normal::new(mean, sd).expect("valid normal parameters");
    (0..n).map(move |_| d.sample(rng))
}

/// Produces `spec.n` finite values, identical for identical specs.
pub fn generate(spec: &DatasetSpec) -> Result<Vec<f64>, DatagenError> {
    let n = spec.n;
    if n == 0 {
        return Err(DatagenError::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let rng = &mut rng;
    let first = n - n / 2;
    let mut out: Vec<f64> = Vec::with_capacity(n);
    match spec.dataset {
        Dataset::Uniform => out.extend((0..n).map(|_| rng.random::<f64>())),
        Dataset::Normal => out.extend(normals(rng, n, 0.0, 1.0)),
        Dataset::Pareto => {
            let d = Pareto::new(1.0, 1.5).expect("valid pareto parameters");
            out.extend((0..n).map(|_| d.sample(rng)));
        }
        Dataset::Gumbel => {
            let d = Gumbel::new(0.0, 1.0).expect("valid gumbel parameters");
            out.extend((0..n).map(|_| d.sample(rng)));
        }
        Dataset::Lognormal => {
            let d = LogNormal::new(0.0, 1.0).expect("valid lognormal parameters");
            out.extend((0..n).map(|_| d.sample(rng)));
        }
        Dataset::Loguniform => out.extend((0..n).map(|_| loguniform(rng, 3.0))),
        Dataset::SignedLoguniform => {
            out.extend((0..n).map(|_| sign(rng) * loguniform(rng, 3.0)))
        }
        Dataset::SignedLoguniformExtreme => {
            out.extend((0..n).map(|_| sign(rng) * loguniform(rng, 300.0)))
        }
        Dataset::NormalSmallChange => {
            out.extend(normals(rng, first, 0.0, 1.0));
            out.extend(normals(rng, n / 2, 1.0, 1.0));
        }
        Dataset::NormalLargeChange => {
            out.extend(normals(rng, first, 0.0, 1.0));
            out.extend(normals(rng, n / 2, 100.0, 10.0));
        }
        Dataset::NormalPlusDistinct42 => {
            out.extend(normals(rng, first, 0.0, 1.0));
            let values: Vec<f64> = (0..42).map(|i| i as f64 * 0.1 - 2.05).collect();
            out.extend((0..n / 2).map(|_| values[rng.random_range(0..42)]));
        }
        Dataset::SortedWithFrequent => {
            let top = (n / 50).max(1);
            let mut v = 0u64;
            while out.len() < n {
                let f = rng.random_range(1..=top).min(n - out.len());
                out.extend(std::iter::repeat_n(v as f64, f));
                v += 1;
            }
        }
        Dataset::Distinct42 => {
            let values: Vec<f64> = normals(rng, 42, 0.0, 1.0).collect();
            let weights: Vec<f64> = (0..42).map(|_| rng.random_range(1.0..100.0)).collect();
            let pick = WeightedIndex::new(&weights).expect("positive weights");
            out.extend((0..n).map(|_| values[pick.sample(rng)]));
        }
    }
    debug_assert!(out.iter().all(|x| x.is_finite()));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for d in Dataset::ALL {
            assert_eq!(d.name().parse::<Dataset>().unwrap(), d);
        }
        assert!("zipf".parse::<Dataset>().is_err());
    }

    #[test]
    fn change_point_split() {
        let v = DatasetSpec::new(Dataset::NormalLargeChange, 10_000, 3).generate().unwrap();
        let first: f64 = v[..5000].iter().sum::<f64>() / 5000.0;
        let second: f64 = v[5000..].iter().sum::<f64>() / 5000.0;
        assert!(first.abs() < 0.1);
        assert!((second - 100.0).abs() < 1.0);
    }
}
