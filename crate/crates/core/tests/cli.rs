use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn masc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_masc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(path: &Path, text: &str) {
    fs::write(path, text).unwrap();
}

const SCHEMA: &str = r#"
feature_names = ["age", "income"]
protected_attribute = "race"
protected_groups = ["white", "black", "other"]
target = "label"
positive_label = "yes"

[aggregation_map]
white = "white"
black = "black"
asian = "other"
native = "other"
"#;

/// Three small datasets: `a` and `b` alike, `c` shifted.
fn small_corpus(dir: &Path) {
    write(&dir.join("schema.toml"), SCHEMA);
    fs::create_dir_all(dir.join("data")).unwrap();
    for (id, shift) in [("a", 0.0), ("b", 0.3), ("c", 40.0)] {
        let mut s = String::from("age,income,race,label,unused\n");
        for i in 0..30 {
            let race = match i % 6 {
                0 => "black",
                1 => "asian",
                2 => "native",
                _ => "white",
            };
            let label = if i % 3 == 0 { "yes" } else { "no" };
            let age = 20.0 + shift + (i % 7) as f64;
            let income = shift + (i * 13 % 11) as f64;
            s.push_str(&format!("{age},{income},{race},{label},x\n"));
        }
        write(&dir.join("data").join(format!("{id}.csv")), &s);
    }
    write(
        &dir.join("run.toml"),
        "schema = \"schema.toml\"\ndatasets = [\"data/*.csv\"]\noutput_dir = \"out\"\n",
    );
}

#[test]
fn cluster_writes_assignment_for_every_dataset() {
    let tmp = tempfile::tempdir().unwrap();
    small_corpus(tmp.path());
    let cfg = tmp.path().join("run.toml");
    let out = masc(&["cluster", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(tmp.path().join("out/assignment.json")).unwrap();
    let a: BTreeMap<String, usize> = serde_json::from_str(&text).unwrap();
    assert_eq!(a.len(), 3);
    assert_eq!(a["a"], a["b"]);
    assert_ne!(a["a"], a["c"]);
    let d = fs::read_to_string(tmp.path().join("out/distances.csv")).unwrap();
    assert!(d.starts_with("dataset_id,a,b,c\n"));
}

#[test]
fn missing_schema_exits_2_and_names_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    small_corpus(tmp.path());
    fs::remove_file(tmp.path().join("schema.toml")).unwrap();
    let cfg = tmp.path().join("run.toml");
    let out = masc(&["cluster", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("schema.toml"), "{err}");
}

#[test]
fn unknown_target_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    small_corpus(tmp.path());
    let cfg = tmp.path().join("run.toml");
    let out = masc(&["augment", "--config", cfg.to_str().unwrap(), "--target", "zz"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unmapped_category_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    small_corpus(tmp.path());
    let f = tmp.path().join("data/a.csv");
    let mut s = fs::read_to_string(&f).unwrap();
    s.push_str("30,1,martian,yes,x\n");
    write(&f, &s);
    let cfg = tmp.path().join("run.toml");
    let out = masc(&["cluster", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unmapped category"));
}

#[test]
fn augment_writes_csv_and_provenance() {
    let tmp = tempfile::tempdir().unwrap();
    small_corpus(tmp.path());
    let cfg = tmp.path().join("run.toml");
    let out = masc(&["augment", "--config", cfg.to_str().unwrap(), "--target", "a", "--seed", "9"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(tmp.path().join("out/augmented/masc/a.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("age,income,race,label"));
    let rows: Vec<&str> = lines.collect();
    // a and b both hold 15 white, 5 black, 10 other: `other` fills up, `black`
    // can only borrow b's 5 rows and is left 5 short.
    assert_eq!(rows.len(), 40);
    let prov: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("out/augmented/masc/a.provenance.json")).unwrap())
            .unwrap();
    assert_eq!(prov["per_group_before"], serde_json::json!([15, 5, 10]));
    assert_eq!(prov["per_group_after"], serde_json::json!([15, 10, 15]));
    assert_eq!(prov["shortfall"], serde_json::json!({"black": 5}));
    assert!(prov["borrowed"].as_array().unwrap().iter().all(|b| b["donor_id"] == "b"));
}

#[test]
fn baselines_through_the_cli() {
    let tmp = tempfile::tempdir().unwrap();
    small_corpus(tmp.path());
    let cfg = tmp.path().join("run.toml");
    for (method, rows) in [("rus", 15), ("smote", 45)] {
        let out = masc(&["augment", "--config", cfg.to_str().unwrap(), "--all", "--method", method]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let csv = fs::read_to_string(tmp.path().join(format!("out/augmented/{method}/c.csv"))).unwrap();
        assert_eq!(csv.lines().count() - 1, rows, "{method}");
    }
}

#[test]
fn geo_needs_a_region_map() {
    let tmp = tempfile::tempdir().unwrap();
    small_corpus(tmp.path());
    let cfg = tmp.path().join("run.toml");
    let out = masc(&["augment", "--config", cfg.to_str().unwrap(), "--all", "--method", "geo"]);
    assert_eq!(out.status.code(), Some(2));

    write(&tmp.path().join("regions.toml"), "a = \"north\"\nb = \"north\"\nc = \"south\"\n");
    let mut text = fs::read_to_string(&cfg).unwrap();
    text.push_str("region_map = \"regions.toml\"\n");
    write(&cfg, &text);
    let out = masc(&["augment", "--config", cfg.to_str().unwrap(), "--target", "a", "--method", "geo"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(tmp.path().join("out/augmented/geo/a.csv")).unwrap();
    assert_eq!(csv.lines().count() - 1, 60);
}

#[test]
fn evaluate_with_only_the_initial_method() {
    let tmp = tempfile::tempdir().unwrap();
    small_corpus(tmp.path());
    let cfg = tmp.path().join("run.toml");
    let out = masc(&["evaluate", "--config", cfg.to_str().unwrap(), "--methods", "none"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(tmp.path().join("out/fairness.csv")).unwrap();
    let rows: Vec<&str> = table.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.split(',').nth(1) == Some("initial")));
}

#[test]
fn report_lists_dataset_statistics() {
    let tmp = tempfile::tempdir().unwrap();
    small_corpus(tmp.path());
    let cfg = tmp.path().join("run.toml");
    let out = masc(&["report", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    let t = fs::read_to_string(tmp.path().join("out/datasets.csv")).unwrap();
    assert_eq!(
        t.lines().nth(1),
        Some("a,30,0,30,white,0.500000,0.166667,0.333333")
    );
}

const SPEC: &str = "n_families = 5\ndatasets_per_family = 10\nextra_datasets = 1\nd = 4\n\
samples_min = 500\nsamples_max = 500\nshift = 5.0\nseed = 11\n";

#[test]
fn benchmark_round_trip_reports_five_clusters() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = tmp.path().join("spec.toml");
    write(&spec, SPEC);
    let bench = tmp.path().join("bench");
    let out = masc(&["report", "--make-benchmark", spec.to_str().unwrap(), "--out", bench.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let cfg = bench.join("masc.toml");
    let out = masc(&["cluster", "--config", cfg.to_str().unwrap(), "--k", "auto"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(bench.join("results/clustering.json")).unwrap()).unwrap();
    assert_eq!(summary["k"], 5);
    let a: BTreeMap<String, usize> =
        serde_json::from_str(&fs::read_to_string(bench.join("results/assignment.json")).unwrap()).unwrap();
    assert_eq!(a.len(), 51);

    // Full evaluation: one metrics row per target x method x minority; GR of
    // every row sums to one.
    let out = masc(&[
        "evaluate",
        "--config",
        cfg.to_str().unwrap(),
        "--targets",
        "f0_00,f3_02",
        "--methods",
        "none,masc,smote,rus",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let metrics = fs::read_to_string(bench.join("results/model_metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count() - 1, 2 * 4 * 2);
    let table = fs::read_to_string(bench.join("results/fairness.csv")).unwrap();
    let header: Vec<&str> = table.lines().next().unwrap().split(',').collect();
    let gr_cols: Vec<usize> = (0..header.len()).filter(|&i| header[i].starts_with("gr_")).collect();
    for line in table.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        let sum: f64 = gr_cols.iter().map(|&i| cells[i].parse::<f64>().unwrap()).sum();
        assert!((sum - 1.0).abs() < 5e-6, "{line}");
    }
}

#[test]
fn duplicate_ids_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    small_corpus(tmp.path());
    fs::create_dir_all(tmp.path().join("more")).unwrap();
    fs::copy(tmp.path().join("data/a.csv"), tmp.path().join("more/a.csv")).unwrap();
    write(
        &tmp.path().join("run.toml"),
        "schema = \"schema.toml\"\ndatasets = [\"data/*.csv\", \"more/a.csv\"]\n",
    );
    let out = masc(&["cluster", "--config", tmp.path().join("run.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("duplicate"));
}
