//! Seeded synthetic dataset families with planted covariate shift and
//! planted group imbalance.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use ndarray::Array2;
use rand::distr::{Distribution, weighted::WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Schema};
use crate::error::{Error, Result};

fn default_ratios() -> Vec<Vec<f64>> {
    vec![vec![0.8, 0.06, 0.14]]
}

fn default_rates() -> Vec<f64> {
    vec![0.45, 0.3, 0.35]
}

fn default_signal() -> f64 {
    1.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub n_families: usize,
    pub datasets_per_family: usize,
    /// Added after the regular families, assigned to families round-robin.
    #[serde(default)]
    pub extra_datasets: usize,
    pub d: usize,
    pub samples_min: usize,
    pub samples_max: usize,
    /// Euclidean distance between any two family means (when the families
    /// fit on a regular simplex, i.e. `n_families <= d + 1`).
    pub shift: f64,
    /// Group ratio simplex vectors, cycled over the datasets.
    #[serde(default = "default_ratios")]
    pub group_ratios: Vec<Vec<f64>>,
    /// P(Y = 1) per group.
    #[serde(default = "default_rates")]
    pub positive_rates: Vec<f64>,
    /// Mean offset between the two classes along the all-ones direction.
    #[serde(default = "default_signal")]
    pub class_signal: f64,
    pub seed: u64,
}

impl BenchmarkSpec {
    /// 5 families of 10 datasets, 500 rows each, in 4 dimensions.
    pub fn planted_five(seed: u64) -> BenchmarkSpec {
        BenchmarkSpec {
            n_families: 5,
            datasets_per_family: 10,
            extra_datasets: 0,
            d: 4,
            samples_min: 500,
            samples_max: 500,
            shift: 5.0,
            group_ratios: default_ratios(),
            positive_rates: default_rates(),
            class_signal: default_signal(),
            seed,
        }
    }

    pub fn n_groups(&self) -> usize {
        self.positive_rates.len()
    }

    pub fn n_datasets(&self) -> usize {
        self.n_families * self.datasets_per_family + self.extra_datasets
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidBenchmark(m));
        if self.n_families == 0 || self.d == 0 {
            return bad("n_families and d must be positive".into());
        }
        if self.n_datasets() == 0 {
            return bad("spec produces no datasets".into());
        }
        if self.samples_min < 2 || self.samples_min > self.samples_max {
            return bad(format!(
                "samples range [{}, {}] invalid (need 2 <= min <= max)",
                self.samples_min, self.samples_max
            ));
        }
        if !(self.shift >= 0.0 && self.shift.is_finite()) {
            return bad(format!("shift must be non-negative, got {}", self.shift));
        }
        let p = self.n_groups();
        if p < 2 {
            return bad("need at least two groups".into());
        }
        if self.positive_rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return bad("positive rates must lie in [0, 1]".into());
        }
        if self.group_ratios.is_empty() {
            return bad("group_ratios is empty".into());
        }
        for ratios in &self.group_ratios {
            let sum: f64 = ratios.iter().sum();
            if ratios.len() != p || ratios.iter().any(|&r| r < 0.0) || (sum - 1.0).abs() > 1e-9 {
                return bad(format!("group ratios {ratios:?} are not a {p}-simplex vector"));
            }
        }
        Ok(())
    }

    pub fn schema(&self) -> Schema {
        let groups: Vec<String> = (0..self.n_groups()).map(|g| format!("g{g}")).collect();
        Schema {
            feature_names: (0..self.d).map(|j| format!("x{j}")).collect(),
            protected_attribute: "group".into(),
            aggregation_map: groups.iter().map(|g| (g.clone(), g.clone())).collect(),
            protected_groups: groups,
            target: "y".into(),
            positive_label: "1".into(),
        }
    }

    pub fn from_path(path: &Path) -> Result<BenchmarkSpec> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: BenchmarkSpec = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| Error::InvalidBenchmark(e.to_string()))?
        } else {
            toml::from_str(&text).map_err(|e| Error::InvalidBenchmark(e.to_string()))?
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone)]
pub struct Benchmark {
    pub datasets: Vec<Dataset>,
    /// Planted family of each dataset.
    pub families: Vec<usize>,
    pub family_means: Vec<Vec<f64>>,
}

impl Benchmark {
    pub fn family_map(&self) -> BTreeMap<String, usize> {
        self.datasets
            .iter()
            .map(|d| d.id.clone())
            .zip(self.families.iter().copied())
            .collect()
    }
}

/// Family means `shift` apart from each other. With `f <= d + 1` families
/// they are the vertices of a regular simplex; otherwise they sit on the
/// diagonal at consecutive multiples of `shift`.
pub fn family_means(n_families: usize, d: usize, shift: f64) -> Vec<Vec<f64>> {
    if n_families <= d + 1 {
        // Orthonormal basis of span{e_f - e_0} in R^F, then coordinates of
        // the centred vertices e_f - mean in that basis.
        let f = n_families;
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for k in 1..f {
            let mut v = vec![0.0; f];
            v[k] = 1.0;
            v[0] = -1.0;
            for b in &basis {
                let dot: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
                v.iter_mut().zip(b).for_each(|(a, c)| *a -= dot * c);
            }
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            basis.push(v.into_iter().map(|a| a / norm).collect());
        }
        let scale = shift / 2f64.sqrt();
        (0..f)
            .map(|k| {
                let mut mu = vec![0.0; d];
                for (j, b) in basis.iter().enumerate() {
                    let centred_dot = b[k] - b.iter().sum::<f64>() / f as f64;
                    mu[j] = scale * centred_dot;
                }
                mu
            })
            .collect()
    } else {
        let step = shift / (d as f64).sqrt();
        (0..n_families).map(|k| vec![k as f64 * step; d]).collect()
    }
}

/// Draws every dataset from its family's Gaussian. Dataset `i` uses ChaCha8
/// stream `i` of `seed`, so each dataset is reproducible on its own.
pub fn generate(spec: &BenchmarkSpec) -> Result<Benchmark> {
    spec.validate()?;
    let schema = Arc::new(spec.schema());
    let means = family_means(spec.n_families, spec.d, spec.shift);
    let direction = 1.0 / (spec.d as f64).sqrt();
    let regular = spec.n_families * spec.datasets_per_family;
    let mut datasets = Vec::with_capacity(spec.n_datasets());
    let mut families = Vec::with_capacity(spec.n_datasets());
    for i in 0..spec.n_datasets() {
        let (family, local) = if i < regular {
            (i / spec.datasets_per_family, i % spec.datasets_per_family)
        } else {
            let e = i - regular;
            (e % spec.n_families, spec.datasets_per_family + e / spec.n_families)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(i as u64);
        let n = rng.random_range(spec.samples_min..=spec.samples_max);
        let ratios = &spec.group_ratios[i % spec.group_ratios.len()];
        let pick_group = WeightedIndex::new(ratios).map_err(|e| Error::InvalidBenchmark(e.to_string()))?;
        let mut features = Array2::zeros((n, spec.d));
        let mut groups = Vec::with_capacity(n);
        let mut targets = Vec::with_capacity(n);
        for r in 0..n {
            let g = pick_group.sample(&mut rng);
            let y = rng.random_bool(spec.positive_rates[g]) as u8;
            let offset = spec.class_signal * (y as f64 - 0.5) * direction;
            for j in 0..spec.d {
                let noise: f64 = StandardNormal.sample(&mut rng);
                features[[r, j]] = means[family][j] + offset + noise;
            }
            groups.push(g);
            targets.push(y);
        }
        let id = format!("f{family}_{local:02}");
        datasets.push(Dataset::new(id, features, groups, targets, schema.clone())?);
        families.push(family);
    }
    Ok(Benchmark {
        datasets,
        families,
        family_means: means,
    })
}
