//! Unbiased two-sample maximum mean discrepancy and the pairwise distance
//! matrix between datasets.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::io;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `k(x, z) = <x, z>`
    Linear,
    /// `k(x, z) = exp(-gamma * |x - z|^2)`
    Gaussian { gamma: f64 },
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec::Linear
    }
}

impl KernelSpec {
    pub fn gaussian(gamma: f64) -> Result<KernelSpec> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidKernel(format!(
                "gaussian gamma must be positive and finite, got {gamma}"
            )));
        }
        Ok(KernelSpec::Gaussian { gamma })
    }

    pub fn eval(&self, a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
        match *self {
            KernelSpec::Linear => a.dot(&b),
            KernelSpec::Gaussian { gamma } => {
                let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * sq).exp()
            }
        }
    }

    /// Median heuristic `gamma = 1 / (2 * median^2)` over pairwise Euclidean
    /// distances of at most `max_rows` rows taken at an even stride from the
    /// pooled datasets.
    pub fn gaussian_median_heuristic(datasets: &[Dataset], max_rows: usize) -> Result<KernelSpec> {
        let total: usize = datasets.iter().map(Dataset::n_rows).sum();
        if total < 2 {
            return Err(Error::TooFewSamples { needed: 2, got: total });
        }
        let take = total.min(max_rows.max(2));
        let rows: Vec<ArrayView1<f64>> = datasets
            .iter()
            .flat_map(|d| d.features.rows())
            .collect();
        let picked: Vec<ArrayView1<f64>> = (0..take).map(|i| rows[i * total / take]).collect();
        let mut dists = Vec::with_capacity(take * (take - 1) / 2);
        for i in 0..take {
            for j in (i + 1)..take {
                let sq: f64 = picked[i]
                    .iter()
                    .zip(picked[j])
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum();
                dists.push(sq.sqrt());
            }
        }
        dists.sort_by(f64::total_cmp);
        let mid = dists.len() / 2;
        let median = if dists.len() % 2 == 0 {
            0.5 * (dists[mid - 1] + dists[mid])
        } else {
            dists[mid]
        };
        if median <= 0.0 {
            return Err(Error::InvalidKernel(
                "median pairwise distance is zero".into(),
            ));
        }
        KernelSpec::gaussian(1.0 / (2.0 * median * median))
    }
}

/// Unbiased MMD estimate between samples `x` (n×d) and `z` (m×d):
///
/// ```text
/// 1/(n(n-1)) Σ_{i≠j} k(x_i,x_j) - 2/(nm) Σ_{i,j} k(x_i,z_j) + 1/(m(m-1)) Σ_{i≠j} k(z_i,z_j)
/// ```
///
/// Negative estimates (possible for near-identical samples) are clamped to 0.
pub fn mmd(x: ArrayView2<f64>, z: ArrayView2<f64>, kernel: &KernelSpec) -> Result<f64> {
    let (n, m) = (x.nrows(), z.nrows());
    for got in [n, m] {
        if got < 2 {
            return Err(Error::TooFewSamples { needed: 2, got });
        }
    }
    if x.ncols() != z.ncols() {
        return Err(Error::DimensionMismatch {
            expected: x.ncols(),
            found: z.ncols(),
        });
    }
    let (within_x, within_z, cross) = match kernel {
        KernelSpec::Linear => linear_terms(x, z),
        KernelSpec::Gaussian { .. } => (
            within_mean(x, kernel),
            within_mean(z, kernel),
            cross_mean(x, z, kernel),
        ),
    };
    // (a + b) - 2c makes the linear-kernel estimate exactly symmetric.
    Ok(((within_x + within_z) - 2.0 * cross).max(0.0))
}

/// Closed form for the linear kernel:
/// `Σ_{i≠j} <x_i, x_j> = |Σ x_i|^2 - Σ |x_i|^2` and `Σ_{i,j} <x_i, z_j> = <Σ x_i, Σ z_j>`.
fn linear_terms(x: ArrayView2<f64>, z: ArrayView2<f64>) -> (f64, f64, f64) {
    let (n, m) = (x.nrows() as f64, z.nrows() as f64);
    let sx: Array1<f64> = x.sum_axis(Axis(0));
    let sz: Array1<f64> = z.sum_axis(Axis(0));
    let within = |s: &Array1<f64>, v: ArrayView2<f64>, k: f64| {
        let sq_norms: f64 = v.iter().map(|a| a * a).sum();
        (s.dot(s) - sq_norms) / (k * (k - 1.0))
    };
    (within(&sx, x, n), within(&sz, z, m), sx.dot(&sz) / (n * m))
}

fn within_mean(x: ArrayView2<f64>, kernel: &KernelSpec) -> f64 {
    let n = x.nrows();
    let upper: f64 = (0..n)
        .into_par_iter()
        .map(|i| {
            ((i + 1)..n)
                .map(|j| kernel.eval(x.row(i), x.row(j)))
                .sum::<f64>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    2.0 * upper / (n as f64 * (n as f64 - 1.0))
}

fn cross_mean(x: ArrayView2<f64>, z: ArrayView2<f64>, kernel: &KernelSpec) -> f64 {
    let total: f64 = (0..x.nrows())
        .into_par_iter()
        .map(|i| {
            (0..z.nrows())
                .map(|j| kernel.eval(x.row(i), z.row(j)))
                .sum::<f64>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    total / (x.nrows() as f64 * z.nrows() as f64)
}

/// Symmetric matrix of pairwise discrepancies with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub values: Array2<f64>,
    pub dataset_ids: Vec<String>,
}

impl DistanceMatrix {
    pub fn len(&self) -> usize {
        self.dataset_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dataset_ids.is_empty()
    }

    /// Min-max scales the off-diagonal entries into [0, 1]; the diagonal
    /// stays 0. When every off-diagonal entry is equal the entries are
    /// divided by that value instead (all ones, or all zeros if it is 0).
    pub fn normalized(&self) -> DistanceMatrix {
        let r = self.len();
        let off: Vec<f64> = (0..r)
            .flat_map(|i| (0..r).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| self.values[[i, j]])
            .collect();
        let (lo, hi) = off
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        let mut values = self.values.clone();
        if off.is_empty() {
            return self.clone();
        }
        let span = hi - lo;
        for i in 0..r {
            for j in 0..r {
                if i == j {
                    continue;
                }
                let v = self.values[[i, j]];
                values[[i, j]] = if span > 0.0 {
                    (v - lo) / span
                } else if hi > 0.0 {
                    v / hi
                } else {
                    0.0
                };
            }
        }
        DistanceMatrix {
            values,
            dataset_ids: self.dataset_ids.clone(),
        }
    }

    pub fn to_csv(&self) -> String {
        io::matrix_csv(&self.dataset_ids, &self.values)
    }

    pub fn to_json(&self) -> Result<String> {
        io::matrix_json(&self.dataset_ids, &self.values)
    }
}

/// `W[i][j] = mmd(X_i, X_j)` for every unordered pair, optionally min-max
/// normalized.
pub fn pairwise_distance_matrix(
    datasets: &[Dataset],
    kernel: &KernelSpec,
    normalize: bool,
) -> Result<DistanceMatrix> {
    let r = datasets.len();
    if r < 2 {
        return Err(Error::TooFewDatasets(r));
    }
    for ds in &datasets[1..] {
        datasets[0].ensure_same_schema(ds)?;
    }
    let pairs: Vec<(usize, usize)> = (0..r)
        .flat_map(|i| ((i + 1)..r).map(move |j| (i, j)))
        .collect();
    let dists = pairs
        .par_iter()
        .map(|&(i, j)| mmd(datasets[i].features.view(), datasets[j].features.view(), kernel))
        .collect::<Result<Vec<f64>>>()?;
    let mut values = Array2::zeros((r, r));
    for (&(i, j), d) in pairs.iter().zip(dists) {
        values[[i, j]] = d;
        values[[j, i]] = d;
    }
    let w = DistanceMatrix {
        values,
        dataset_ids: datasets.iter().map(|d| d.id.clone()).collect(),
    };
    Ok(if normalize { w.normalized() } else { w })
}
