//! End-to-end debiasing: pairwise MMD -> Gaussian affinity -> Laplacian ->
//! eigengap -> spectral k-means -> per-cluster pools -> augmentation.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::affinity::{to_affinity, AffinityMatrix, DEFAULT_AFFINITY_GAMMA};
use crate::augmentation::{augment, build_pool, AugmentationResult};
use crate::data::{pooled_standard_scale, Dataset};
use crate::discrepancy::{pairwise_distance_matrix, DistanceMatrix, KernelSpec};
use crate::error::{Error, Result};
use crate::kmeans::KMeansConfig;
use crate::spectral::{
    decompose, default_l_max, embed_and_cluster, laplacian, select_k, ClusterAssignment,
    LaplacianDecomposition,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KChoice {
    /// Eigengap heuristic.
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub kernel: KernelSpec,
    /// Min-max normalize the distance matrix before the Gaussian map.
    pub normalize: bool,
    /// Bandwidth of the Gaussian map from distances to affinities.
    pub gamma: f64,
    pub k: KChoice,
    /// Eigenvalues searched for the eigengap; `None` means `min(r, 10)`.
    pub l_max: Option<usize>,
    /// Standardize features with one scaler fitted on all datasets before
    /// measuring discrepancies.
    pub scale: bool,
    pub cluster_seed: u64,
    pub augment_seed: u64,
    pub kmeans: KMeansConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            kernel: KernelSpec::Linear,
            normalize: true,
            gamma: DEFAULT_AFFINITY_GAMMA,
            k: KChoice::Auto,
            l_max: None,
            scale: true,
            cluster_seed: 42,
            augment_seed: 42,
            kmeans: KMeansConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Clustering {
    pub distances: DistanceMatrix,
    pub affinity: AffinityMatrix,
    pub laplacian: Array2<f64>,
    pub decomposition: LaplacianDecomposition,
    pub assignment: ClusterAssignment,
}

/// Pairwise distances only (the first stage of [`cluster_datasets`]).
pub fn distances(datasets: &[Dataset], config: &PipelineConfig) -> Result<DistanceMatrix> {
    if datasets.len() < 2 {
        return Err(Error::TooFewDatasets(datasets.len()));
    }
    if config.scale {
        let scaled = pooled_standard_scale(datasets)?;
        pairwise_distance_matrix(&scaled, &config.kernel, config.normalize)
    } else {
        pairwise_distance_matrix(datasets, &config.kernel, config.normalize)
    }
}

/// Clusters datasets from an already computed distance matrix.
pub fn cluster_from_distances(w: DistanceMatrix, config: &PipelineConfig) -> Result<Clustering> {
    let affinity = to_affinity(&w, config.gamma)?;
    let l = laplacian(&affinity);
    let decomposition = decompose(&l)?;
    let r = decomposition.len();
    let l_max = config.l_max.unwrap_or_else(|| default_l_max(r));
    let (auto_k, gaps) = select_k(&decomposition, l_max)?;
    let k = match config.k {
        KChoice::Auto => auto_k,
        KChoice::Fixed(k) => k,
    };
    let mut assignment = embed_and_cluster(
        &decomposition,
        k,
        config.cluster_seed,
        &w.dataset_ids,
        &config.kmeans,
    )?;
    assignment.eigengap_vector = gaps;
    Ok(Clustering {
        distances: w,
        affinity,
        laplacian: l,
        decomposition,
        assignment,
    })
}

pub fn cluster_datasets(datasets: &[Dataset], config: &PipelineConfig) -> Result<Clustering> {
    let w = distances(datasets, config)?;
    cluster_from_distances(w, config)
}

/// Augments `target_id` from the other members of its cluster.
pub fn augment_in_cluster(
    datasets: &[Dataset],
    assignment: &ClusterAssignment,
    target_id: &str,
    seed: u64,
) -> Result<AugmentationResult> {
    let idx = datasets
        .iter()
        .position(|d| d.id == target_id)
        .ok_or_else(|| Error::UnknownDataset(target_id.to_string()))?;
    let cluster = assignment
        .label_of(target_id)
        .ok_or_else(|| Error::UnknownDataset(target_id.to_string()))?;
    let members: Vec<&Dataset> = datasets
        .iter()
        .filter(|d| assignment.label_of(&d.id) == Some(cluster))
        .collect();
    let pool = build_pool(cluster, &members, target_id)?;
    augment(&datasets[idx], &pool, seed)
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub clustering: Clustering,
    pub result: AugmentationResult,
}

/// Runs the whole procedure for one target dataset.
pub fn run_pipeline(datasets: &[Dataset], target_id: &str, config: &PipelineConfig) -> Result<PipelineOutput> {
    if !datasets.iter().any(|d| d.id == target_id) {
        return Err(Error::UnknownDataset(target_id.to_string()));
    }
    let clustering = cluster_datasets(datasets, config)?;
    let result = augment_in_cluster(datasets, &clustering.assignment, target_id, config.augment_seed)?;
    Ok(PipelineOutput { clustering, result })
}
