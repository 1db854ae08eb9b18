//! Command-line front end.
//!
//! Four subcommands share one run configuration file (TOML, or JSON by
//! extension):
//!
//! ```toml
//! schema = "schema.toml"
//! datasets = ["data/*.csv"]      # globs or paths; id = file stem
//! kernel = "linear"              # or "gaussian"
//! # kernel_gamma = 0.5           # gaussian only; median heuristic if absent
//! gamma = 10.0                   # affinity bandwidth
//! normalize = true
//! k = "auto"                     # or an integer
//! # l_max = 10
//! scale = true
//! # region_map = "regions.toml"
//! methods = ["none", "masc", "smote", "rus"]
//! # targets = ["a", "b"]
//! k_neighbors = 5
//! output_dir = "out"
//!
//! [seeds]
//! cluster = 42
//! augment = 42
//! split = 42
//! ```
//!
//! Relative paths resolve against the configuration file's directory.
//! Exit codes: 0 success, 1 runtime failure, 2 configuration or validation
//! failure.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::augmentation::majority_group;
use crate::baselines::{geo_concat, group_rus, group_smote, RegionMap, DEFAULT_K_NEIGHBORS};
use crate::benchmark::{generate, BenchmarkSpec};
use crate::data::{
    dataset_csv, group_cardinalities, pooled_standard_scale, CsvLoader, Dataset, LoadReport, RowOrigin,
    Schema,
};
use crate::discrepancy::{DistanceMatrix, KernelSpec};
use crate::error::{Error, Result};
use crate::evaluator::{evaluate_method, EvaluationOutcome, LrConfig};
use crate::fairness::group_ratio;
use crate::io::{csv_field, fmt6, to_json, to_json_rounded, write_atomic};
use crate::pipeline::{augment_in_cluster, cluster_from_distances, distances, KChoice, PipelineConfig};
use crate::spectral::ClusterAssignment;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Rows used for the Gaussian median heuristic.
const MEDIAN_HEURISTIC_ROWS: usize = 1000;

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub error: Error,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.error.fmt(f)
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

trait Phase<T> {
    fn config(self) -> CliResult<T>;
    fn runtime(self) -> CliResult<T>;
}

impl<T> Phase<T> for Result<T> {
    fn config(self) -> CliResult<T> {
        self.map_err(|error| Failure {
            code: EXIT_CONFIG,
            error,
        })
    }

    fn runtime(self) -> CliResult<T> {
        self.map_err(|error| Failure {
            code: EXIT_RUNTIME,
            error,
        })
    }
}

fn invalid<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(Error::Config(msg.into())).config()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum KernelName {
    #[default]
    Linear,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// The dataset as loaded.
    None,
    Masc,
    Smote,
    Rus,
    Geo,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::None => "initial",
            Method::Masc => "masc",
            Method::Smote => "smote",
            Method::Rus => "rus",
            Method::Geo => "geo",
        }
    }
}

/// `k = "auto"` or `k = 5`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KSetting {
    Count(usize),
    Word(String),
}

impl Default for KSetting {
    fn default() -> Self {
        KSetting::Word("auto".into())
    }
}

impl KSetting {
    fn resolve(&self) -> Result<KChoice> {
        match self {
            KSetting::Count(0) => Err(Error::Config("k must be at least 1".into())),
            KSetting::Count(k) => Ok(KChoice::Fixed(*k)),
            KSetting::Word(w) if w == "auto" => Ok(KChoice::Auto),
            KSetting::Word(w) => match w.parse::<usize>() {
                Ok(k) => KSetting::Count(k).resolve(),
                Err(_) => Err(Error::Config(format!("k must be `auto` or a positive integer, got `{w}`"))),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub cluster: u64,
    pub augment: u64,
    pub split: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds {
            cluster: 42,
            augment: 42,
            split: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: PathBuf,
    pub datasets: Vec<String>,
    #[serde(default)]
    pub kernel: KernelName,
    #[serde(default)]
    pub kernel_gamma: Option<f64>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_true")]
    pub normalize: bool,
    #[serde(default)]
    pub k: KSetting,
    #[serde(default)]
    pub l_max: Option<usize>,
    #[serde(default = "default_true")]
    pub scale: bool,
    #[serde(default)]
    pub region_map: Option<PathBuf>,
    #[serde(default)]
    pub methods: Option<Vec<Method>>,
    #[serde(default)]
    pub targets: Option<Vec<String>>,
    #[serde(default = "default_k_neighbors")]
    pub k_neighbors: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seeds: Seeds,
}

fn default_gamma() -> f64 {
    crate::affinity::DEFAULT_AFFINITY_GAMMA
}

fn default_true() -> bool {
    true
}

fn default_k_neighbors() -> usize {
    DEFAULT_K_NEIGHBORS
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    /// Reads the file and returns the config with its base directory.
    pub fn from_path(path: &Path) -> Result<(RunConfig, PathBuf)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: RunConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        };
        let base = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        Ok((config, base))
    }

    fn default_methods(&self) -> Vec<Method> {
        let mut m = vec![Method::None, Method::Masc, Method::Smote, Method::Rus];
        if self.region_map.is_some() {
            m.push(Method::Geo);
        }
        m
    }
}

#[derive(Debug, Parser)]
#[command(name = "masc", version, about = "Cluster same-schema datasets and rebalance protected groups")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Pairwise MMD, affinity graph and spectral clustering.
    Cluster(ClusterArgs),
    /// Rebalance protected groups of one or all datasets.
    Augment(AugmentArgs),
    /// Train and score a classifier per target and method.
    Evaluate(EvaluateArgs),
    /// Dataset statistics, or generate a synthetic benchmark.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Affinity bandwidth.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, value_enum)]
    pub kernel: Option<KernelName>,
    /// Number of clusters, or `auto` for the eigengap choice.
    #[arg(long)]
    pub k: Option<String>,
    /// Cluster seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Extra copy of the distance matrix (JSON if the path ends in .json).
    #[arg(long)]
    pub emit_distances: Option<PathBuf>,
    /// Eigenvalues and eigengaps (JSON if the path ends in .json).
    #[arg(long)]
    pub emit_eigenvalues: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("which").required(true).args(["target", "all"]))]
pub struct AugmentArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub target: Vec<String>,
    #[arg(long)]
    pub all: bool,
    /// Augment seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value = "masc")]
    pub method: Method,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',')]
    pub methods: Option<Vec<Method>>,
    #[arg(long, value_delimiter = ',')]
    pub targets: Option<Vec<String>>,
    #[arg(long)]
    pub split_seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["config", "make_benchmark"]))]
pub struct ReportArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Benchmark spec file; writes the generated datasets instead of a report.
    #[arg(long)]
    pub make_benchmark: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Entry point for the binary.
pub fn main() -> i32 {
    run(std::env::args_os())
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Err(f) = configure_threads() {
        eprintln!("error: {f}");
        return f.code;
    }
    let result = match cli.command {
        Command::Cluster(a) => cmd_cluster(&a),
        Command::Augment(a) => cmd_augment(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Report(a) => cmd_report(&a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {f}");
            f.code
        }
    }
}

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("MASC_THREADS") else {
        return Ok(());
    };
    let n: usize = match raw.trim().parse() {
        Ok(n) if n > 0 => n,
        _ => return invalid(format!("MASC_THREADS must be a positive integer, got `{raw}`")),
    };
    // A second call in the same process keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Everything a subcommand needs after validation.
struct Context {
    config: RunConfig,
    datasets: Vec<Dataset>,
    reports: Vec<LoadReport>,
    region_map: Option<RegionMap>,
    k: KChoice,
    out: PathBuf,
}

fn has_glob_chars(s: &str) -> bool {
    s.contains(['*', '?', '['])
}

fn expand_datasets(entries: &[String], base: &Path) -> CliResult<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for entry in entries {
        if has_glob_chars(entry) {
            let pattern = if Path::new(entry).is_absolute() {
                entry.clone()
            } else {
                format!("{}/{}", glob::Pattern::escape(&base.to_string_lossy()), entry)
            };
            let mut matched: Vec<PathBuf> = glob::glob(&pattern)
                .map_err(|e| Error::Config(format!("bad dataset pattern `{entry}`: {e}")))
                .config()?
                .filter_map(|p| p.ok())
                .filter(|p| p.is_file())
                .collect();
            if matched.is_empty() {
                return invalid(format!("dataset pattern `{pattern}` matched no files"));
            }
            matched.sort();
            paths.extend(matched);
        } else {
            let p = base.join(entry);
            if !p.is_file() {
                return invalid(format!("dataset file not found: {}", p.display()));
            }
            paths.push(p);
        }
    }
    if paths.is_empty() {
        return invalid("no datasets listed");
    }
    Ok(paths)
}

fn load_context(mut config: RunConfig, base: &Path, out: Option<&Path>) -> CliResult<Context> {
    let schema_path = base.join(&config.schema);
    if !schema_path.is_file() {
        return invalid(format!("schema file not found: {}", schema_path.display()));
    }
    let schema = Arc::new(Schema::from_path(&schema_path).config()?);

    if !(config.gamma.is_finite() && config.gamma > 0.0) {
        return Err(Error::InvalidGamma(config.gamma)).config();
    }
    if let Some(g) = config.kernel_gamma {
        KernelSpec::gaussian(g).config()?;
        if config.kernel == KernelName::Linear {
            return invalid("kernel_gamma is only meaningful with kernel = \"gaussian\"");
        }
    }
    if config.k_neighbors == 0 {
        return invalid("k_neighbors must be at least 1");
    }
    let k = config.k.resolve().config()?;

    let region_map = match &config.region_map {
        Some(p) => {
            let p = base.join(p);
            if !p.is_file() {
                return invalid(format!("region map not found: {}", p.display()));
            }
            config.region_map = Some(p.clone());
            Some(RegionMap::from_path(&p).config()?)
        }
        None => None,
    };

    let paths = expand_datasets(&config.datasets, base)?;
    let mut seen = BTreeSet::new();
    for p in &paths {
        let id = file_id(p);
        if !seen.insert(id.clone()) {
            return invalid(format!("duplicate dataset id `{id}` ({})", p.display()));
        }
    }
    let mut loader = CsvLoader::new(schema).config()?;
    let mut datasets = Vec::with_capacity(paths.len());
    let mut reports = Vec::with_capacity(paths.len());
    for p in &paths {
        let (ds, report) = loader.load_as(p, &file_id(p)).config()?;
        datasets.push(ds);
        reports.push(report);
    }

    let out = match out {
        Some(o) => o.to_path_buf(),
        None => base.join(&config.output_dir),
    };
    Ok(Context {
        config,
        datasets,
        reports,
        region_map,
        k,
        out,
    })
}

fn file_id(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn read_config(path: &Path) -> CliResult<(RunConfig, PathBuf)> {
    if !path.is_file() {
        return invalid(format!("config file not found: {}", path.display()));
    }
    RunConfig::from_path(path).config()
}

fn write(path: &Path, contents: &str) -> CliResult<()> {
    write_atomic(path, contents).runtime()
}

impl Context {
    fn dataset(&self, id: &str) -> Option<&Dataset> {
        self.datasets.iter().find(|d| d.id == id)
    }

    fn check_targets(&self, targets: &[String]) -> CliResult<()> {
        for t in targets {
            if self.dataset(t).is_none() {
                return Err(Error::UnknownDataset(t.clone())).config();
            }
        }
        Ok(())
    }

    fn require_clusterable(&self) -> CliResult<()> {
        if self.datasets.len() < 2 {
            return Err(Error::TooFewDatasets(self.datasets.len())).config();
        }
        Ok(())
    }

    /// Pipeline settings, resolving the Gaussian median heuristic when no
    /// bandwidth was given.
    fn pipeline_config(&self) -> Result<PipelineConfig> {
        let kernel = match (self.config.kernel, self.config.kernel_gamma) {
            (KernelName::Linear, _) => KernelSpec::Linear,
            (KernelName::Gaussian, Some(g)) => KernelSpec::gaussian(g)?,
            (KernelName::Gaussian, None) => {
                if self.config.scale {
                    let scaled = pooled_standard_scale(&self.datasets)?;
                    KernelSpec::gaussian_median_heuristic(&scaled, MEDIAN_HEURISTIC_ROWS)?
                } else {
                    KernelSpec::gaussian_median_heuristic(&self.datasets, MEDIAN_HEURISTIC_ROWS)?
                }
            }
        };
        Ok(PipelineConfig {
            kernel,
            normalize: self.config.normalize,
            gamma: self.config.gamma,
            k: self.k,
            l_max: self.config.l_max,
            scale: self.config.scale,
            cluster_seed: self.config.seeds.cluster,
            augment_seed: self.config.seeds.augment,
            ..PipelineConfig::default()
        })
    }

    fn cache_dir(&self) -> PathBuf {
        self.out.join("cache")
    }

    /// Content hash of the loaded data and the discrepancy settings.
    fn input_digest(&self, pipeline: &PipelineConfig) -> Result<String> {
        let mut h = Sha256::new();
        h.update(b"distances-v1");
        h.update(serde_json::to_vec(&pipeline.kernel).map_err(|e| Error::Serialize(e.to_string()))?);
        h.update([pipeline.scale as u8, pipeline.normalize as u8]);
        for ds in &self.datasets {
            h.update(ds.id.as_bytes());
            h.update([0]);
            h.update((ds.n_rows() as u64).to_le_bytes());
            h.update((ds.n_features() as u64).to_le_bytes());
            for v in ds.features.iter() {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        Ok(hex::encode(h.finalize()))
    }

    fn distances(&self, pipeline: &PipelineConfig) -> CliResult<DistanceMatrix> {
        let key = self.input_digest(pipeline).runtime()?;
        let path = self.cache_dir().join(format!("distances-{key}.json"));
        if let Some(cached) = read_cache::<CachedMatrix>(&path) {
            if let Some(w) = cached.into_matrix() {
                return Ok(w);
            }
        }
        let w = distances(&self.datasets, pipeline).runtime()?;
        write(&path, &to_json(&CachedMatrix::from(&w)).runtime()?)?;
        Ok(w)
    }

    /// Assignment for the current settings, from the cache when possible.
    fn assignment(&self) -> CliResult<ClusterAssignment> {
        let pipeline = self.pipeline_config().runtime()?;
        let w = self.distances(&pipeline)?;
        let path = self.cache_dir().join(format!("clustering-{}.json", clustering_key(&w, &pipeline)));
        if let Some(a) = read_cache::<ClusterAssignment>(&path) {
            if a.dataset_ids == w.dataset_ids {
                return Ok(a);
            }
        }
        let clustering = cluster_from_distances(w, &pipeline).runtime()?;
        write(&path, &to_json(&clustering.assignment).runtime()?)?;
        Ok(clustering.assignment)
    }
}

/// Exact (not rounded) copy of a distance matrix for the cache.
#[derive(Serialize, Deserialize)]
struct CachedMatrix {
    dataset_ids: Vec<String>,
    values: Vec<Vec<f64>>,
}

impl From<&DistanceMatrix> for CachedMatrix {
    fn from(w: &DistanceMatrix) -> Self {
        CachedMatrix {
            dataset_ids: w.dataset_ids.clone(),
            values: w.values.rows().into_iter().map(|r| r.to_vec()).collect(),
        }
    }
}

impl CachedMatrix {
    fn into_matrix(self) -> Option<DistanceMatrix> {
        let r = self.dataset_ids.len();
        if self.values.len() != r || self.values.iter().any(|row| row.len() != r) {
            return None;
        }
        let flat: Vec<f64> = self.values.into_iter().flatten().collect();
        let values = ndarray::Array2::from_shape_vec((r, r), flat).ok()?;
        Some(DistanceMatrix {
            values,
            dataset_ids: self.dataset_ids,
        })
    }
}

fn read_cache<T: for<'de> Deserialize<'de>>(path: &Path) -> Option<T> {
    let text = std::fs::read_to_string(path).ok()?;
    serde_json::from_str(&text).ok()
}

fn clustering_key(w: &DistanceMatrix, p: &PipelineConfig) -> String {
    let mut h = Sha256::new();
    h.update(b"clustering-v1");
    for id in &w.dataset_ids {
        h.update(id.as_bytes());
        h.update([0]);
    }
    for v in w.values.iter() {
        h.update(v.to_bits().to_le_bytes());
    }
    h.update(p.gamma.to_bits().to_le_bytes());
    let k = match p.k {
        KChoice::Auto => 0,
        KChoice::Fixed(k) => k as u64,
    };
    h.update(k.to_le_bytes());
    h.update((p.l_max.unwrap_or(0) as u64).to_le_bytes());
    h.update(p.cluster_seed.to_le_bytes());
    h.update((p.kmeans.restarts as u64).to_le_bytes());
    h.update((p.kmeans.max_iter as u64).to_le_bytes());
    h.update(p.kmeans.tol.to_bits().to_le_bytes());
    hex::encode(h.finalize())
}

#[derive(Serialize)]
struct ClusteringSummary<'a> {
    k: usize,
    k_choice: &'static str,
    l_max: usize,
    kernel: &'a KernelSpec,
    gamma: f64,
    eigenvalues: Vec<f64>,
    eigengap: &'a [f64],
    clusters: BTreeMap<usize, Vec<&'a str>>,
    assignment: BTreeMap<String, usize>,
}

pub fn cmd_cluster(args: &ClusterArgs) -> CliResult<()> {
    let (mut config, base) = read_config(&args.config)?;
    if let Some(g) = args.gamma {
        config.gamma = g;
    }
    if let Some(k) = args.kernel {
        config.kernel = k;
    }
    if let Some(k) = &args.k {
        config.k = KSetting::Word(k.clone());
    }
    if let Some(s) = args.seed {
        config.seeds.cluster = s;
    }
    let ctx = load_context(config, &base, args.out.as_deref())?;
    ctx.require_clusterable()?;

    let pipeline = ctx.pipeline_config().runtime()?;
    let w = ctx.distances(&pipeline)?;
    let cache = ctx.cache_dir().join(format!("clustering-{}.json", clustering_key(&w, &pipeline)));
    let c = cluster_from_distances(w, &pipeline).runtime()?;
    let a = &c.assignment;
    write(&cache, &to_json(a).runtime()?)?;

    let out = &ctx.out;
    write(&out.join("distances.csv"), &c.distances.to_csv())?;
    write(&out.join("affinity.csv"), &c.affinity.to_csv())?;
    write(&out.join("assignment.json"), &to_json(&a.as_map()).runtime()?)?;

    let mut clusters: BTreeMap<usize, Vec<&str>> = BTreeMap::new();
    for (id, &l) in a.dataset_ids.iter().zip(&a.labels) {
        clusters.entry(l).or_default().push(id);
    }
    let summary = ClusteringSummary {
        k: a.k,
        k_choice: match pipeline.k {
            KChoice::Auto => "eigengap",
            KChoice::Fixed(_) => "fixed",
        },
        l_max: pipeline
            .l_max
            .unwrap_or_else(|| crate::spectral::default_l_max(c.decomposition.len())),
        kernel: &pipeline.kernel,
        gamma: pipeline.gamma,
        eigenvalues: c.decomposition.eigenvalues.to_vec(),
        eigengap: &a.eigengap_vector,
        clusters,
        assignment: a.as_map(),
    };
    write(&out.join("clustering.json"), &to_json_rounded(&summary).runtime()?)?;

    if let Some(p) = &args.emit_distances {
        let text = if is_json(p) {
            c.distances.to_json().runtime()?
        } else {
            c.distances.to_csv()
        };
        write(p, &text)?;
    }
    if let Some(p) = &args.emit_eigenvalues {
        let text = if is_json(p) {
            #[derive(Serialize)]
            struct Spectrum<'a> {
                eigenvalues: Vec<f64>,
                eigengap: &'a [f64],
            }
            to_json_rounded(&Spectrum {
                eigenvalues: c.decomposition.eigenvalues.to_vec(),
                eigengap: &a.eigengap_vector,
            })
            .runtime()?
        } else {
            let mut s = String::from("index,eigenvalue,eigengap\n");
            for (i, l) in c.decomposition.eigenvalues.iter().enumerate() {
                let gap = a.eigengap_vector.get(i).map(|g| fmt6(*g)).unwrap_or_default();
                s.push_str(&format!("{},{},{}\n", i + 1, fmt6(*l), gap));
            }
            s
        };
        write(p, &text)?;
    }
    println!("k={} ({} datasets) -> {}", a.k, a.labels.len(), out.display());
    Ok(())
}

fn is_json(p: &Path) -> bool {
    p.extension().is_some_and(|e| e == "json")
}

/// Sidecar for the baseline methods.
#[derive(Serialize)]
struct BaselineProvenance<'a> {
    target: &'a str,
    method: &'a str,
    seed: Option<u64>,
    groups: &'a [String],
    per_group_before: Vec<usize>,
    per_group_after: Vec<usize>,
    origins: &'a [RowOrigin],
}

/// One rebalanced dataset, plus its provenance sidecar as JSON.
struct Rebalanced {
    dataset: Dataset,
    provenance: String,
}

fn rebalance(ctx: &Context, target: &Dataset, method: Method, assignment: Option<&ClusterAssignment>) -> Result<Rebalanced> {
    let seed = ctx.config.seeds.augment;
    let baseline = |ds: Dataset, seed: Option<u64>| -> Result<Rebalanced> {
        let provenance = to_json_rounded(&BaselineProvenance {
            target: &target.id,
            method: method.label(),
            seed,
            groups: &target.schema.protected_groups,
            per_group_before: group_cardinalities(target),
            per_group_after: group_cardinalities(&ds),
            origins: &ds.origins,
        })?;
        Ok(Rebalanced { dataset: ds, provenance })
    };
    match method {
        Method::None => baseline(target.clone(), None),
        Method::Masc => {
            let assignment = assignment.expect("assignment computed for masc");
            let r = augment_in_cluster(&ctx.datasets, assignment, &target.id, seed)?;
            let provenance = to_json_rounded(&r.provenance())?;
            Ok(Rebalanced {
                dataset: r.augmented,
                provenance,
            })
        }
        Method::Smote => baseline(group_smote(target, ctx.config.k_neighbors, seed)?, Some(seed)),
        Method::Rus => baseline(group_rus(target, seed)?, Some(seed)),
        Method::Geo => {
            let map = ctx
                .region_map
                .as_ref()
                .ok_or_else(|| Error::Config("method geo needs a region_map".into()))?;
            baseline(geo_concat(&ctx.datasets, map, &target.id)?, None)
        }
    }
}

pub fn cmd_augment(args: &AugmentArgs) -> CliResult<()> {
    let (mut config, base) = read_config(&args.config)?;
    if let Some(s) = args.seed {
        config.seeds.augment = s;
    }
    let ctx = load_context(config, &base, args.out.as_deref())?;
    let targets: Vec<String> = if args.all {
        ctx.datasets.iter().map(|d| d.id.clone()).collect()
    } else {
        args.target.clone()
    };
    ctx.check_targets(&targets)?;
    if args.method == Method::Geo && ctx.region_map.is_none() {
        return invalid("method geo needs a region_map in the config");
    }
    let assignment = if args.method == Method::Masc {
        ctx.require_clusterable()?;
        Some(ctx.assignment()?)
    } else {
        None
    };

    let dir = ctx.out.join("augmented").join(args.method.label());
    for t in &targets {
        let ds = ctx.dataset(t).expect("checked above");
        let r = rebalance(&ctx, ds, args.method, assignment.as_ref()).runtime()?;
        write(&dir.join(format!("{t}.csv")), &dataset_csv(&r.dataset))?;
        write(&dir.join(format!("{t}.provenance.json")), &r.provenance)?;
        println!(
            "{t}: {:?} -> {:?}",
            group_cardinalities(ds),
            group_cardinalities(&r.dataset)
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct EvaluationRecord<'a> {
    dataset_id: &'a str,
    method: &'a str,
    n_rows: usize,
    n_train: usize,
    n_test: usize,
    epochs: usize,
    converged: bool,
    report: &'a crate::fairness::FairnessReport,
}

fn opt6(x: Option<f64>) -> String {
    x.map(fmt6).unwrap_or_default()
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> CliResult<()> {
    let (mut config, base) = read_config(&args.config)?;
    if let Some(s) = args.split_seed {
        config.seeds.split = s;
    }
    if let Some(m) = &args.methods {
        config.methods = Some(m.clone());
    }
    if let Some(t) = &args.targets {
        config.targets = Some(t.clone());
    }
    let ctx = load_context(config, &base, args.out.as_deref())?;
    let mut methods = ctx
        .config
        .methods
        .clone()
        .unwrap_or_else(|| ctx.config.default_methods());
    let mut seen = BTreeSet::new();
    methods.retain(|m| seen.insert(*m));
    if methods.is_empty() {
        return invalid("no methods selected");
    }
    if methods.contains(&Method::Geo) && ctx.region_map.is_none() {
        return invalid("method geo needs a region_map in the config");
    }
    let targets: Vec<String> = match &ctx.config.targets {
        Some(t) => t.clone(),
        None => ctx.datasets.iter().map(|d| d.id.clone()).collect(),
    };
    ctx.check_targets(&targets)?;
    let assignment = if methods.contains(&Method::Masc) {
        ctx.require_clusterable()?;
        Some(ctx.assignment()?)
    } else {
        None
    };

    let lr = LrConfig {
        seed: ctx.config.seeds.split,
        ..LrConfig::default()
    };
    let jobs: Vec<(&str, Method)> = targets
        .iter()
        .flat_map(|t| methods.iter().map(move |&m| (t.as_str(), m)))
        .collect();
    let results: Vec<(&str, Method, Result<(usize, EvaluationOutcome)>)> = jobs
        .par_iter()
        .map(|&(t, m)| {
            let original = ctx.dataset(t).expect("checked above");
            let outcome = rebalance(&ctx, original, m, assignment.as_ref()).and_then(|r| {
                let n = r.dataset.n_rows();
                evaluate_method(original, &r.dataset, m.label(), ctx.config.seeds.split, &lr).map(|o| (n, o))
            });
            (t, m, outcome)
        })
        .collect();

    let groups = &ctx.datasets[0].schema.protected_groups;
    let mut fairness = String::from("dataset_id,method,n_rows,majority");
    for prefix in ["gr", "sp", "di", "eq_odds"] {
        for g in groups {
            fairness.push(',');
            fairness.push_str(&csv_field(&format!("{prefix}_{g}")));
        }
    }
    fairness.push_str(",accuracy\n");
    let mut metrics = String::from(
        "dataset_id,method,minority,accuracy,eq_odds,prediction_di,prediction_sp,n_train,n_test\n",
    );
    let mut records = Vec::new();
    let mut failures = 0;
    for (t, m, outcome) in &results {
        let (n_rows, o) = match outcome {
            Ok(x) => x,
            Err(e) => {
                eprintln!("warning: skipping {t} / {}: {e}", m.label());
                failures += 1;
                continue;
            }
        };
        let r = &o.report;
        let mut row = vec![
            csv_field(t),
            m.label().to_string(),
            n_rows.to_string(),
            csv_field(&groups[r.majority]),
        ];
        row.extend(r.gr.iter().map(|v| fmt6(*v)));
        let by_group: BTreeMap<usize, &crate::fairness::MinorityComparison> =
            r.minorities.iter().map(|c| (c.group, c)).collect();
        for pick in [
            |c: &crate::fairness::MinorityComparison| c.sp,
            |c: &crate::fairness::MinorityComparison| c.di,
            |c: &crate::fairness::MinorityComparison| c.eq_odds,
        ] {
            for g in 0..groups.len() {
                row.push(opt6(by_group.get(&g).and_then(|c| pick(c))));
            }
        }
        row.push(opt6(r.accuracy));
        fairness.push_str(&row.join(","));
        fairness.push('\n');

        for c in &r.minorities {
            let cells = [
                csv_field(t),
                m.label().to_string(),
                csv_field(&c.label),
                opt6(r.accuracy),
                opt6(c.eq_odds),
                opt6(c.prediction_di),
                opt6(c.prediction_sp),
                o.n_train.to_string(),
                o.n_test.to_string(),
            ];
            metrics.push_str(&cells.join(","));
            metrics.push('\n');
        }
        records.push(EvaluationRecord {
            dataset_id: t,
            method: m.label(),
            n_rows: *n_rows,
            n_train: o.n_train,
            n_test: o.n_test,
            epochs: o.model.epochs,
            converged: o.model.converged,
            report: r,
        });
    }
    if records.is_empty() {
        return Err(Error::Config(format!("all {failures} evaluations failed"))).runtime();
    }
    write(&ctx.out.join("fairness.csv"), &fairness)?;
    write(&ctx.out.join("model_metrics.csv"), &metrics)?;
    write(&ctx.out.join("evaluation.json"), &to_json_rounded(&records).runtime()?)?;
    println!(
        "{} evaluations ({} skipped) -> {}",
        records.len(),
        failures,
        ctx.out.display()
    );
    Ok(())
}

pub fn cmd_report(args: &ReportArgs) -> CliResult<()> {
    if let Some(spec_path) = &args.make_benchmark {
        return make_benchmark(spec_path, args.out.as_deref());
    }
    let config_path = args.config.as_ref().expect("clap requires config or make_benchmark");
    let (config, base) = read_config(config_path)?;
    let ctx = load_context(config, &base, args.out.as_deref())?;
    let groups = &ctx.datasets[0].schema.protected_groups;
    let mut table = String::from("dataset_id,rows_read,rows_dropped,n_rows,majority");
    for g in groups {
        table.push(',');
        table.push_str(&csv_field(&format!("gr_{g}")));
    }
    table.push('\n');
    for (ds, rep) in ctx.datasets.iter().zip(&ctx.reports) {
        let majority = majority_group(&group_cardinalities(ds));
        let mut row = vec![
            csv_field(&ds.id),
            rep.rows_read.to_string(),
            rep.rows_dropped.to_string(),
            ds.n_rows().to_string(),
            csv_field(&groups[majority]),
        ];
        row.extend(group_ratio(ds).into_iter().map(fmt6));
        table.push_str(&row.join(","));
        table.push('\n');
    }
    write(&ctx.out.join("datasets.csv"), &table)?;
    println!("{} datasets -> {}", ctx.datasets.len(), ctx.out.display());
    Ok(())
}

fn make_benchmark(spec_path: &Path, out: Option<&Path>) -> CliResult<()> {
    if !spec_path.is_file() {
        return invalid(format!("benchmark spec not found: {}", spec_path.display()));
    }
    let spec = BenchmarkSpec::from_path(spec_path).config()?;
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("benchmark"));
    let bench = generate(&spec).runtime()?;
    for ds in &bench.datasets {
        write(&out.join(format!("{}.csv", ds.id)), &dataset_csv(ds))?;
    }
    let schema = toml::to_string(&spec.schema()).map_err(|e| Error::Serialize(e.to_string())).runtime()?;
    write(&out.join("schema.toml"), &schema)?;
    write(&out.join("families.json"), &to_json(&bench.family_map()).runtime()?)?;
    let run = "schema = \"schema.toml\"\ndatasets = [\"*.csv\"]\noutput_dir = \"results\"\n";
    write(&out.join("masc.toml"), run)?;
    println!("{} datasets -> {}", bench.datasets.len(), out.display());
    Ok(())
}
