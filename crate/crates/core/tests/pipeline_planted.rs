use masc::benchmark::{generate, BenchmarkSpec};
use masc::pipeline::{cluster_datasets, run_pipeline, PipelineConfig};
use masc::spectral::adjusted_rand_index;

#[test]
fn planted_families_are_recovered() {
    let bench = generate(&BenchmarkSpec::planted_five(42)).unwrap();
    let c = cluster_datasets(&bench.datasets, &PipelineConfig::default()).unwrap();
    assert_eq!(c.assignment.k, 5);
    assert_eq!(adjusted_rand_index(&c.assignment.labels, &bench.families), 1.0);
}

#[test]
fn dataset_order_does_not_change_the_partition() {
    let bench = generate(&BenchmarkSpec::planted_five(3)).unwrap();
    let cfg = PipelineConfig::default();
    let forward = cluster_datasets(&bench.datasets, &cfg).unwrap();
    let mut reversed = bench.datasets.clone();
    reversed.reverse();
    let backward = cluster_datasets(&reversed, &cfg).unwrap();
    let mut back_labels: Vec<usize> = backward.assignment.labels.clone();
    back_labels.reverse();
    assert_eq!(adjusted_rand_index(&forward.assignment.labels, &back_labels), 1.0);
}

#[test]
fn borrowed_rows_stay_in_the_family() {
    let bench = generate(&BenchmarkSpec::planted_five(8)).unwrap();
    let family = bench.family_map();
    let target = &bench.datasets[13];
    let out = run_pipeline(&bench.datasets, &target.id, &PipelineConfig::default()).unwrap();
    assert!(!out.result.borrowed.is_empty());
    for b in &out.result.borrowed {
        assert_eq!(family[&b.donor_id], family[&target.id]);
    }
}
