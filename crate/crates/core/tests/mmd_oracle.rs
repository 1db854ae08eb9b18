mod common;

use common::{mmd_oracle, random_matrix, rng};
use masc::discrepancy::{mmd, KernelSpec};
use ndarray::Array2;
use proptest::prelude::*;

fn kernels() -> Vec<KernelSpec> {
    vec![KernelSpec::Linear, KernelSpec::gaussian(0.5).unwrap()]
}

#[test]
fn matches_naive_sums_on_random_pairs() {
    let mut r = rng(11);
    for trial in 0..40 {
        let n = 2 + trial % 17;
        let m = 2 + (trial * 7) % 23;
        let d = 1 + trial % 5;
        let x = random_matrix(&mut r, n, d);
        let z = random_matrix(&mut r, m, d);
        for k in kernels() {
            let fast = mmd(x.view(), z.view(), &k).unwrap();
            let slow = mmd_oracle(x.view(), z.view(), &k);
            assert!((fast - slow).abs() <= 1e-9, "{k:?} n={n} m={m}: {fast} vs {slow}");
        }
    }
}

#[test]
fn shifted_sample_is_far() {
    let mut r = rng(3);
    let x = random_matrix(&mut r, 40, 3);
    let z = x.mapv(|v| v + 3.0);
    let near = mmd(x.view(), random_matrix(&mut r, 40, 3).view(), &KernelSpec::Linear).unwrap();
    let far = mmd(x.view(), z.view(), &KernelSpec::Linear).unwrap();
    assert!(far > 10.0 * near.max(1e-3));
}

fn matrix(max_n: usize, d: usize) -> impl Strategy<Value = Array2<f64>> {
    (2..=max_n).prop_flat_map(move |n| {
        proptest::collection::vec(-3.0f64..3.0, n * d)
            .prop_map(move |v| Array2::from_shape_vec((n, d), v).unwrap())
    })
}

fn pair(max_n: usize) -> impl Strategy<Value = (Array2<f64>, Array2<f64>)> {
    (1usize..=5).prop_flat_map(move |d| (matrix(max_n, d), matrix(max_n, d)))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn symmetric((x, z) in pair(20)) {
        for k in kernels() {
            let a = mmd(x.view(), z.view(), &k).unwrap();
            let b = mmd(z.view(), x.view(), &k).unwrap();
            prop_assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn self_distance_is_zero(x in (1usize..=5).prop_flat_map(|d| matrix(20, d))) {
        for k in kernels() {
            prop_assert!(mmd(x.view(), x.view(), &k).unwrap() <= 1e-9);
        }
    }

    #[test]
    fn non_negative((x, z) in pair(20)) {
        for k in kernels() {
            prop_assert!(mmd(x.view(), z.view(), &k).unwrap() >= 0.0);
        }
    }

    #[test]
    fn equals_oracle((x, z) in pair(50)) {
        for k in kernels() {
            let fast = mmd(x.view(), z.view(), &k).unwrap();
            let slow = mmd_oracle(x.view(), z.view(), &k);
            prop_assert!((fast - slow).abs() <= 1e-9, "{fast} vs {slow}");
        }
    }
}
