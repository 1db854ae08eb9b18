mod common;

use std::collections::HashSet;

use common::grouped;
use masc::augmentation::{augment, build_pool, majority_group};
use masc::data::{group_cardinalities, RowOrigin};
use proptest::prelude::*;

fn counts() -> impl Strategy<Value = Vec<usize>> {
    proptest::collection::vec(1usize..40, 3)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    /// Each minority grows by exactly min(gap, available) and the shortfall
    /// is what is left of the gap.
    #[test]
    fn counts_follow_take_min(
        target in counts(),
        donors in proptest::collection::vec(counts(), 1..4),
        seed in 0u64..1000,
    ) {
        let t = grouped("t", &target, 0.0);
        let ds: Vec<_> = donors
            .iter()
            .enumerate()
            .map(|(i, c)| grouped(&format!("d{i}"), c, 1000.0 * (i + 1) as f64))
            .collect();
        let mut members = vec![&t];
        members.extend(ds.iter());
        let pool = build_pool(0, &members, "t").unwrap();
        let r = augment(&t, &pool, seed).unwrap();

        let maj = majority_group(&target);
        let available: Vec<usize> = (0..3).map(|g| donors.iter().map(|c| c[g]).sum()).collect();
        let after = group_cardinalities(&r.augmented);
        for g in 0..3 {
            if g == maj {
                prop_assert_eq!(after[g], target[g]);
                continue;
            }
            let gap = target[maj] - target[g];
            let take = gap.min(available[g]);
            prop_assert_eq!(after[g], target[g] + take);
            prop_assert_eq!(r.shortfall.get(&g).copied().unwrap_or(0), gap - take);
        }
    }

    /// Borrowed rows are distinct real rows of the right group in a donor,
    /// and the original rows come first, untouched.
    #[test]
    fn borrowed_rows_are_real(
        target in counts(),
        donor in counts(),
        seed in 0u64..1000,
    ) {
        let t = grouped("t", &target, 0.0);
        let d = grouped("d", &donor, 1000.0);
        let pool = build_pool(0, &[&t, &d], "t").unwrap();
        let r = augment(&t, &pool, seed).unwrap();
        let n = t.n_rows();
        prop_assert_eq!(r.augmented.features.slice(ndarray::s![..n, ..]), t.features.view());
        let mut seen = HashSet::new();
        for i in n..r.augmented.n_rows() {
            let RowOrigin::Original { dataset, row } = &r.augmented.origins[i] else {
                panic!("synthetic row in augmentation output");
            };
            prop_assert_eq!(&**dataset, "d");
            prop_assert!(seen.insert(*row));
            prop_assert_eq!(r.augmented.features.row(i), d.features.row(*row));
            prop_assert_eq!(r.augmented.group_labels[i], d.group_labels[*row]);
            prop_assert_eq!(r.augmented.targets[i], d.targets[*row]);
        }
    }

    #[test]
    fn deterministic_under_seed(target in counts(), donor in counts(), seed in 0u64..1000) {
        let t = grouped("t", &target, 0.0);
        let d = grouped("d", &donor, 1000.0);
        let pool = build_pool(0, &[&t, &d], "t").unwrap();
        let a = augment(&t, &pool, seed).unwrap();
        let b = augment(&t, &pool, seed).unwrap();
        prop_assert_eq!(a.augmented.origins, b.augmented.origins);
    }
}
