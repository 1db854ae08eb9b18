#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use masc::affinity::AffinityMatrix;
use masc::data::{Dataset, Schema};
use masc::discrepancy::KernelSpec;
use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn schema(d: usize, p: usize) -> Arc<Schema> {
    let groups: Vec<String> = (0..p).map(|g| format!("g{g}")).collect();
    Arc::new(Schema {
        feature_names: (0..d).map(|j| format!("x{j}")).collect(),
        protected_attribute: "s".into(),
        aggregation_map: groups.iter().map(|g| (g.clone(), g.clone())).collect::<BTreeMap<_, _>>(),
        protected_groups: groups,
        target: "y".into(),
        positive_label: "1".into(),
    })
}

/// Naive estimator: explicit double sums, no algebraic shortcuts.
pub fn mmd_oracle(x: ArrayView2<f64>, z: ArrayView2<f64>, kernel: &KernelSpec) -> f64 {
    let (n, m) = (x.nrows(), z.nrows());
    let mut xx = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                xx += kernel.eval(x.row(i), x.row(j));
            }
        }
    }
    let mut zz = 0.0;
    for i in 0..m {
        for j in 0..m {
            if i != j {
                zz += kernel.eval(z.row(i), z.row(j));
            }
        }
    }
    let mut xz = 0.0;
    for i in 0..n {
        for j in 0..m {
            xz += kernel.eval(x.row(i), z.row(j));
        }
    }
    let v = xx / (n * (n - 1)) as f64 + zz / (m * (m - 1)) as f64 - 2.0 * xz / (n * m) as f64;
    v.max(0.0)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, d), |_| rng.random_range(-2.0..2.0))
}

/// Block-diagonal affinity with `sizes` blocks, in-block weights drawn from
/// U(0.9, 1), zero across blocks, nodes shuffled. Returns the matrix and
/// the planted block of every node.
pub fn block_affinity(sizes: &[usize], rng: &mut ChaCha8Rng) -> (AffinityMatrix, Vec<usize>) {
    let mut planted: Vec<usize> = sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &s)| std::iter::repeat_n(b, s))
        .collect();
    planted.shuffle(rng);
    let r = planted.len();
    let mut a = Array2::zeros((r, r));
    for i in 0..r {
        for j in (i + 1)..r {
            if planted[i] == planted[j] {
                let w = rng.random_range(0.9..1.0);
                a[[i, j]] = w;
                a[[j, i]] = w;
            }
        }
    }
    let ids = (0..r).map(|i| format!("n{i}")).collect();
    (
        AffinityMatrix {
            values: a,
            gamma: 1.0,
            dataset_ids: ids,
        },
        planted,
    )
}

/// Connected components of the graph with an edge wherever `a > 0`.
pub fn components(a: &Array2<f64>) -> usize {
    let r = a.nrows();
    let mut parent: Vec<usize> = (0..r).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut i = i;
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..r {
        for j in (i + 1)..r {
            if a[[i, j]] > 0.0 {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    (0..r).filter(|&i| find(&mut parent, i) == i).count()
}

/// Dataset whose group `g` has `counts[g]` rows; features identify rows.
pub fn grouped(id: &str, counts: &[usize], offset: f64) -> Dataset {
    let groups: Vec<usize> = counts
        .iter()
        .enumerate()
        .flat_map(|(g, &c)| std::iter::repeat_n(g, c))
        .collect();
    let n = groups.len();
    let x = Array2::from_shape_fn((n, 2), |(i, j)| offset + i as f64 + 0.25 * j as f64);
    let y = (0..n).map(|i| (i % 2) as u8).collect();
    Dataset::new(id, x, groups, y, schema(2, counts.len())).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
