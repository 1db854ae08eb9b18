mod common;

use common::schema;
use masc::data::Dataset;
use masc::fairness::{
    disparate_impact_of, equalized_odds, group_ratio, statistical_parity_of,
};
use ndarray::Array2;
use proptest::prelude::*;

/// Labels for two groups: (positives, total) each, group 0 listed first.
fn labelled(maj: (usize, usize), min: (usize, usize)) -> (Vec<u8>, Vec<usize>) {
    let mut y = Vec::new();
    let mut s = Vec::new();
    for (g, (pos, total)) in [(0, maj), (1, min)] {
        for i in 0..total {
            y.push((i < pos) as u8);
            s.push(g);
        }
    }
    (y, s)
}

fn counts() -> impl Strategy<Value = (usize, usize)> {
    (1usize..60).prop_flat_map(|n| (0..=n, Just(n)))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn parity_zero_iff_impact_one(maj in counts(), min in counts()) {
        prop_assume!(maj.0 > 0);
        let (y, s) = labelled(maj, min);
        let sp = statistical_parity_of(&y, &s, 1, 0).unwrap();
        let di = disparate_impact_of(&y, &s, 1, 0).unwrap();
        prop_assert_eq!(sp == 0.0, di == 1.0);
        prop_assert!((-1.0..=1.0).contains(&sp));
        prop_assert!(di >= 0.0);
    }

    #[test]
    fn group_ratio_sums_to_one(c in proptest::collection::vec(1usize..30, 2..5)) {
        let groups: Vec<usize> = c.iter().enumerate().flat_map(|(g, &n)| std::iter::repeat_n(g, n)).collect();
        let n = groups.len();
        let ds = Dataset::new("d", Array2::zeros((n, 1)), groups, vec![0; n], schema(1, c.len())).unwrap();
        let gr = group_ratio(&ds);
        prop_assert!((gr.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (g, r) in gr.iter().enumerate() {
            prop_assert_eq!(*r, c[g] as f64 / n as f64);
        }
    }

    #[test]
    fn equalized_odds_in_range(
        rows in proptest::collection::vec((0u8..2, 0u8..2, 0usize..2), 8..80)
    ) {
        let y: Vec<u8> = rows.iter().map(|r| r.0).collect();
        let p: Vec<u8> = rows.iter().map(|r| r.1).collect();
        let s: Vec<usize> = rows.iter().map(|r| r.2).collect();
        if let Ok(e) = equalized_odds(&y, &p, &s, 1, 0) {
            prop_assert!((0.0..=2.0).contains(&e));
        }
        // Perfect predictions never differ in error rates.
        if let Ok(e) = equalized_odds(&y, &y, &s, 1, 0) {
            prop_assert_eq!(e, 0.0);
        }
    }
}
