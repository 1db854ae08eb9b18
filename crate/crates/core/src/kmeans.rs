//! Seeded Lloyd k-means with k-means++ seeding and restarts.

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub restarts: usize,
    pub max_iter: usize,
    /// Stop once no centroid moves further than this (Euclidean).
    pub tol: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig {
            restarts: 10,
            max_iter: 300,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub labels: Vec<usize>,
    pub centroids: Array2<f64>,
    pub inertia: f64,
    pub iterations: usize,
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn distinct_rows(points: ArrayView2<f64>) -> usize {
    let mut rows: Vec<Vec<u64>> = points
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|v| v.to_bits()).collect())
        .collect();
    rows.sort();
    rows.dedup();
    rows.len()
}

/// Clusters the rows of `points` into `k` groups. Restart `i` draws from a
/// ChaCha8 stream `i` seeded with `seed`; the lowest-inertia restart wins
/// (earliest on ties).
pub fn kmeans(points: ArrayView2<f64>, k: usize, seed: u64, config: &KMeansConfig) -> Result<KMeansFit> {
    let n = points.nrows();
    if k == 0 || k > n {
        return Err(Error::InvalidK { k, r: n });
    }
    let distinct = distinct_rows(points);
    if distinct < k {
        return Err(Error::DegenerateEmbedding { distinct, k });
    }
    let fits: Vec<KMeansFit> = (0..config.restarts.max(1))
        .into_par_iter()
        .map(|restart| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(restart as u64);
            lloyd(points, k, &mut rng, config)
        })
        .collect();
    let best = fits
        .into_iter()
        .reduce(|best, fit| if fit.inertia < best.inertia { fit } else { best })
        .expect("at least one restart");
    Ok(best)
}

fn plus_plus_init(points: ArrayView2<f64>, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let n = points.nrows();
    let mut centroids = Array2::zeros((k, points.ncols()));
    let first = rng.random_range(0..n);
    centroids.row_mut(0).assign(&points.row(first));
    let mut closest: Vec<f64> = points
        .rows()
        .into_iter()
        .map(|p| sq_dist(p, centroids.row(0)))
        .collect();
    for c in 1..k {
        let total: f64 = closest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = None;
            for (i, &d) in closest.iter().enumerate() {
                if d > 0.0 {
                    chosen = Some(i);
                    if target < d {
                        break;
                    }
                    target -= d;
                }
            }
            chosen.expect("positive total implies a positive weight")
        } else {
            rng.random_range(0..n)
        };
        centroids.row_mut(c).assign(&points.row(pick));
        for (i, p) in points.rows().into_iter().enumerate() {
            closest[i] = closest[i].min(sq_dist(p, centroids.row(c)));
        }
    }
    centroids
}

fn assign(points: ArrayView2<f64>, centroids: &Array2<f64>) -> (Vec<usize>, Vec<f64>) {
    points
        .rows()
        .into_iter()
        .map(|p| {
            centroids
                .rows()
                .into_iter()
                .map(|c| sq_dist(p, c))
                .enumerate()
                .fold((0, f64::INFINITY), |best, (j, d)| if d < best.1 { (j, d) } else { best })
        })
        .unzip()
}

fn lloyd(points: ArrayView2<f64>, k: usize, rng: &mut ChaCha8Rng, config: &KMeansConfig) -> KMeansFit {
    let d = points.ncols();
    let mut centroids = plus_plus_init(points, k, rng);
    let (mut labels, mut dists) = assign(points, &centroids);
    let mut iterations = 0;
    for _ in 0..config.max_iter {
        iterations += 1;
        let mut sums = Array2::<f64>::zeros((k, d));
        let mut counts = vec![0usize; k];
        for (p, &l) in points.rows().into_iter().zip(&labels) {
            let mut row = sums.row_mut(l);
            row += &p;
            counts[l] += 1;
        }
        let mut next = centroids.clone();
        for c in 0..k {
            if counts[c] > 0 {
                next.row_mut(c).assign(&(&sums.row(c) / counts[c] as f64));
            } else {
                // Empty cluster: move it onto the point farthest from its centroid.
                let far = dists
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b })
                    .0;
                next.row_mut(c).assign(&points.row(far));
                dists[far] = 0.0;
            }
        }
        let shift = centroids
            .rows()
            .into_iter()
            .zip(next.rows())
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = next;
        (labels, dists) = assign(points, &centroids);
        if shift <= config.tol {
            break;
        }
    }
    KMeansFit {
        labels,
        inertia: dists.iter().sum(),
        centroids,
        iterations,
    }
}
