//! Unnormalized spectral clustering of datasets with eigengap selection of
//! the cluster count.
//!
//! ```text
//! A (affinity) -> L = D - A -> ascending eigenpairs of L
//!              -> e = [λ2-λ1, λ3-λ2, ..., λl-λl-1], k = 1 + argmax e
//!              -> U = first k eigenvectors (r × k) -> k-means on rows of U
//! ```
//!
//! The Laplacian is symmetric positive semi-definite, so its singular values
//! are its eigenvalues and a symmetric eigensolver gives them already paired
//! with eigenvectors.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use ndarray::{s, Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::affinity::AffinityMatrix;
use crate::error::{Error, Result};
use crate::kmeans::{kmeans, KMeansConfig};

const SYMMETRY_TOL: f64 = 1e-10;
const NEGATIVE_CLAMP: f64 = 1e-9;

/// `L = D - A` with `D[i][i] = Σ_j A[i][j]`.
pub fn laplacian(a: &AffinityMatrix) -> Array2<f64> {
    let degrees = a.values.sum_axis(Axis(1));
    let mut l = -a.values.clone();
    for (i, d) in degrees.iter().enumerate() {
        l[[i, i]] += d;
    }
    l
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianDecomposition {
    /// Ascending.
    pub eigenvalues: Array1<f64>,
    /// Column `j` belongs to `eigenvalues[j]`.
    pub eigenvectors: Array2<f64>,
}

impl LaplacianDecomposition {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

/// Full symmetric eigendecomposition, eigenvalues ascending. Eigenvalues in
/// `[-1e-9, 0)` are numerical noise on a PSD matrix and are clamped to 0.
pub fn decompose(l: &Array2<f64>) -> Result<LaplacianDecomposition> {
    let (r, c) = l.dim();
    if r != c {
        return Err(Error::NotSymmetric(f64::INFINITY));
    }
    let scale = l.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let asym = (0..r)
        .flat_map(|i| (0..r).map(move |j| (i, j)))
        .map(|(i, j)| (l[[i, j]] - l[[j, i]]).abs())
        .fold(0.0, f64::max);
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric(asym));
    }
    if r == 0 {
        return Ok(LaplacianDecomposition {
            eigenvalues: Array1::zeros(0),
            eigenvectors: Array2::zeros((0, 0)),
        });
    }
    let m = DMatrix::from_fn(r, r, |i, j| 0.5 * (l[[i, j]] + l[[j, i]]));
    let eig = nalgebra::SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let eigenvalues = order
        .iter()
        .map(|&k| {
            let v = eig.eigenvalues[k];
            if (-NEGATIVE_CLAMP..0.0).contains(&v) {
                0.0
            } else {
                v
            }
        })
        .collect();
    let eigenvectors = Array2::from_shape_fn((r, r), |(i, j)| eig.eigenvectors[(i, order[j])]);
    Ok(LaplacianDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// `min(r, 10)`: the eigengap is searched over the first ten eigenvalues at
/// most.
pub fn default_l_max(r: usize) -> usize {
    r.min(10)
}

/// Picks `k` as the position of the largest gap between consecutive
/// ascending eigenvalues among the first `l_max`. Returns `k` and the gap
/// vector `e` where `e[i] = λ[i+1] - λ[i]`; the largest gap `e[k-1]` lies
/// between `λ_k` and `λ_{k+1}` (1-based). Ties go to the smallest `k`.
pub fn select_k(d: &LaplacianDecomposition, l_max: usize) -> Result<(usize, Vec<f64>)> {
    let r = d.len();
    if r < 2 {
        return Err(Error::TooFewDatasets(r));
    }
    let l = l_max.clamp(2, r);
    let gaps: Vec<f64> = d
        .eigenvalues
        .slice(s![..l])
        .windows(2)
        .into_iter()
        .map(|w| w[1] - w[0])
        .collect();
    let (best, _) = gaps
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |b, (i, &g)| if g > b.1 { (i, g) } else { b });
    Ok((best + 1, gaps))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    pub k: usize,
    pub eigengap_vector: Vec<f64>,
    pub dataset_ids: Vec<String>,
}

impl ClusterAssignment {
    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&i| self.labels[i] == cluster)
            .collect()
    }

    pub fn label_of(&self, dataset_id: &str) -> Option<usize> {
        self.dataset_ids
            .iter()
            .position(|d| d == dataset_id)
            .map(|i| self.labels[i])
    }

    pub fn as_map(&self) -> BTreeMap<String, usize> {
        self.dataset_ids
            .iter()
            .cloned()
            .zip(self.labels.iter().copied())
            .collect()
    }
}

/// Embeds each dataset as a row of the first `k` eigenvectors and runs
/// k-means on those rows. Labels are renumbered by first appearance so the
/// first dataset is always in cluster 0.
pub fn embed_and_cluster(
    d: &LaplacianDecomposition,
    k: usize,
    seed: u64,
    dataset_ids: &[String],
    kmeans_config: &KMeansConfig,
) -> Result<ClusterAssignment> {
    let r = d.len();
    if k == 0 || k > r {
        return Err(Error::InvalidK { k, r });
    }
    if dataset_ids.len() != r {
        return Err(Error::LengthMismatch(r, dataset_ids.len()));
    }
    let labels = if k == 1 {
        vec![0; r]
    } else {
        let u = d.eigenvectors.slice(s![.., ..k]);
        canonical_labels(&kmeans(u, k, seed, kmeans_config)?.labels)
    };
    Ok(ClusterAssignment {
        labels,
        k,
        eigengap_vector: Vec::new(),
        dataset_ids: dataset_ids.to_vec(),
    })
}

fn canonical_labels(labels: &[usize]) -> Vec<usize> {
    let mut map = BTreeMap::new();
    labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect()
}

/// Adjusted Rand Index between two labelings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings must cover the same items");
    let n = a.len();
    let choose2 = |x: usize| (x * x.saturating_sub(1)) as f64 / 2.0;
    let mut table: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut rows: BTreeMap<usize, usize> = BTreeMap::new();
    let mut cols: BTreeMap<usize, usize> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| choose2(c)).sum();
    let sum_a: f64 = rows.values().map(|&c| choose2(c)).sum();
    let sum_b: f64 = cols.values().map(|&c| choose2(c)).sum();
    let expected = sum_a * sum_b / choose2(n);
    let max = 0.5 * (sum_a + sum_b);
    if max == expected {
        // Both labelings trivial (all one cluster or all singletons).
        return 1.0;
    }
    (index - expected) / (max - expected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn aff(values: Array2<f64>) -> AffinityMatrix {
        let r = values.nrows();
        AffinityMatrix {
            values,
            gamma: 1.0,
            dataset_ids: (0..r).map(|i| format!("d{i}")).collect(),
        }
    }

    fn decomp(eigenvalues: Vec<f64>) -> LaplacianDecomposition {
        let r = eigenvalues.len();
        LaplacianDecomposition {
            eigenvalues: Array1::from(eigenvalues),
            eigenvectors: Array2::eye(r),
        }
    }

    #[test]
    fn two_node_laplacian() {
        let l = laplacian(&aff(array![[0.0, 1.0], [1.0, 0.0]]));
        assert_eq!(l, array![[1.0, -1.0], [-1.0, 1.0]]);
        let d = decompose(&l).unwrap();
        assert!(d.eigenvalues[0].abs() < 1e-12);
        assert!((d.eigenvalues[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn empty_graph_has_zero_laplacian_and_spectrum() {
        let l = laplacian(&aff(Array2::zeros((3, 3))));
        assert_eq!(l, Array2::<f64>::zeros((3, 3)));
        let d = decompose(&l).unwrap();
        assert!(d.eigenvalues.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn laplacian_rows_sum_to_zero() {
        let a = aff(array![[0.0, 0.3, 0.9], [0.3, 0.0, 0.1], [0.9, 0.1, 0.0]]);
        for row in laplacian(&a).rows() {
            assert!(row.sum().abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_asymmetric_input() {
        let l = array![[1.0, -1.0], [-0.5, 1.0]];
        assert!(matches!(decompose(&l), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn eigenpairs_satisfy_residual() {
        let a = aff(array![
            [0.0, 0.8, 0.1, 0.05],
            [0.8, 0.0, 0.2, 0.3],
            [0.1, 0.2, 0.0, 0.9],
            [0.05, 0.3, 0.9, 0.0]
        ]);
        let l = laplacian(&a);
        let d = decompose(&l).unwrap();
        for j in 0..4 {
            let v = d.eigenvectors.column(j);
            let resid = &l.dot(&v) - &(&v * d.eigenvalues[j]);
            assert!(resid.iter().all(|x| x.abs() < 1e-6 * 4.0));
        }
        assert!(d.eigenvalues.windows(2).into_iter().all(|w| w[0] <= w[1]));
        assert!(d.eigenvalues[0] <= 1e-8);
    }

    #[test]
    fn picks_gap_after_three_zeros() {
        let (k, e) = select_k(&decomp(vec![0.0, 0.0, 0.0, 5.0, 5.1, 5.3]), 6).unwrap();
        assert_eq!(k, 3);
        assert_eq!(e.len(), 5);
    }

    #[test]
    fn two_nodes_give_one_cluster() {
        let (k, e) = select_k(&decomp(vec![0.0, 10.0]), 2).unwrap();
        assert_eq!(k, 1);
        assert_eq!(e, vec![10.0]);
    }

    #[test]
    fn ties_go_to_smallest_k() {
        let (k, _) = select_k(&decomp(vec![0.0, 1.0, 2.0, 3.0]), 4).unwrap();
        assert_eq!(k, 1);
    }

    #[test]
    fn l_max_limits_the_search() {
        // The 100 jump lies beyond l_max = 3.
        let (k, e) = select_k(&decomp(vec![0.0, 1.0, 3.0, 100.0]), 3).unwrap();
        assert_eq!(k, 2);
        assert_eq!(e.len(), 2);
    }

    #[test]
    fn select_k_needs_two_eigenvalues() {
        assert!(select_k(&decomp(vec![0.0]), 1).is_err());
    }

    #[test]
    fn k_one_and_k_r_extremes() {
        let a = aff(array![[0.0, 1.0, 0.2], [1.0, 0.0, 0.3], [0.2, 0.3, 0.0]]);
        let d = decompose(&laplacian(&a)).unwrap();
        let ids = a.dataset_ids.clone();
        let one = embed_and_cluster(&d, 1, 0, &ids, &KMeansConfig::default()).unwrap();
        assert_eq!(one.labels, vec![0, 0, 0]);
        let all = embed_and_cluster(&d, 3, 0, &ids, &KMeansConfig::default()).unwrap();
        assert_eq!(all.labels, vec![0, 1, 2]);
        assert!(embed_and_cluster(&d, 4, 0, &ids, &KMeansConfig::default()).is_err());
    }

    #[test]
    fn ari_extremes() {
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[1, 1, 0, 0]), 1.0);
        assert!(adjusted_rand_index(&[0, 0, 1, 1], &[0, 1, 0, 1]) < 0.0);
        assert_eq!(adjusted_rand_index(&[0, 0, 0], &[5, 5, 5]), 1.0);
    }
}
