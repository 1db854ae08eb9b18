//! Rebalancing a dataset's protected groups with real rows borrowed from the
//! other datasets of its cluster.

use std::collections::BTreeMap;

use ndarray::{Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::data::{group_cardinalities, Dataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PoolEntry {
    /// Index into [`ClusterPool::donors`].
    pub donor: usize,
    pub row: usize,
}

/// Rows of every cluster member except the augmentation target, indexed by
/// protected group.
#[derive(Debug, Clone)]
pub struct ClusterPool<'a> {
    pub cluster_id: usize,
    pub donors: Vec<&'a Dataset>,
    pub per_group: Vec<Vec<PoolEntry>>,
}

impl ClusterPool<'_> {
    pub fn n_per_group(&self) -> Vec<usize> {
        self.per_group.iter().map(Vec::len).collect()
    }

    pub fn total(&self) -> usize {
        self.per_group.iter().map(Vec::len).sum()
    }
}

/// Pools every member of the cluster except `exclude`. Entries are ordered by
/// member, then by row.
pub fn build_pool<'a>(
    cluster_id: usize,
    members: &[&'a Dataset],
    exclude: &str,
) -> Result<ClusterPool<'a>> {
    let target = members
        .iter()
        .find(|m| m.id == exclude)
        .ok_or_else(|| Error::NotInCluster(exclude.to_string()))?;
    let donors: Vec<&Dataset> = members.iter().copied().filter(|m| m.id != exclude).collect();
    for d in &donors {
        target.ensure_same_schema(d)?;
    }
    let mut per_group = vec![Vec::new(); target.n_groups()];
    for (donor, ds) in donors.iter().enumerate() {
        for (row, &g) in ds.group_labels.iter().enumerate() {
            per_group[g].push(PoolEntry { donor, row });
        }
    }
    Ok(ClusterPool {
        cluster_id,
        donors,
        per_group,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BorrowedRow {
    pub donor_id: String,
    pub row: usize,
    pub group: usize,
}

#[derive(Debug, Clone)]
pub struct AugmentationResult {
    pub augmented: Dataset,
    pub cluster_id: usize,
    pub majority: usize,
    /// In the order the rows were appended to `augmented`.
    pub borrowed: Vec<BorrowedRow>,
    pub per_group_before: Vec<usize>,
    pub per_group_after: Vec<usize>,
    /// Rows each minority group still lacks after the pool ran dry.
    pub shortfall: BTreeMap<usize, usize>,
}

/// Index of the largest group, lowest index on ties.
pub fn majority_group(counts: &[usize]) -> usize {
    counts
        .iter()
        .enumerate()
        .fold((0, 0), |best, (g, &c)| if c > best.1 { (g, c) } else { best })
        .0
}

/// Brings every minority group `g` of `target` up to the majority count
/// `n_l` by drawing `min(n_l - n_g, |pool_g|)` rows uniformly without
/// replacement from the pool. Groups whose pool is too small take all of it
/// and the remaining gap is recorded in `shortfall`.
pub fn augment(target: &Dataset, pool: &ClusterPool<'_>, seed: u64) -> Result<AugmentationResult> {
    let before = group_cardinalities(target);
    if pool.per_group.len() != before.len() {
        return Err(Error::SchemaMismatch(
            target.id.clone(),
            format!("pool of cluster {}", pool.cluster_id),
        ));
    }
    for d in &pool.donors {
        target.ensure_same_schema(d)?;
    }
    let majority = majority_group(&before);
    let n_l = before[majority];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut drawn: Vec<PoolEntry> = Vec::new();
    let mut shortfall = BTreeMap::new();
    for (g, entries) in pool.per_group.iter().enumerate() {
        if g == majority {
            continue;
        }
        let need = n_l - before[g];
        let take = need.min(entries.len());
        if take < need {
            shortfall.insert(g, need - take);
        }
        if take == 0 {
            continue;
        }
        let mut picks = rand::seq::index::sample(&mut rng, entries.len(), take).into_vec();
        picks.sort_unstable();
        drawn.extend(picks.into_iter().map(|i| entries[i]));
    }

    let d = target.n_features();
    let extra = drawn.len();
    let mut features = Array2::zeros((target.n_rows() + extra, d));
    features
        .slice_mut(ndarray::s![..target.n_rows(), ..])
        .assign(&target.features);
    let mut groups = target.group_labels.clone();
    let mut targets = target.targets.clone();
    let mut origins = target.origins.clone();
    let mut borrowed = Vec::with_capacity(extra);
    for (k, e) in drawn.iter().enumerate() {
        let donor = pool.donors[e.donor];
        features
            .index_axis_mut(Axis(0), target.n_rows() + k)
            .assign(&donor.features.row(e.row));
        groups.push(donor.group_labels[e.row]);
        targets.push(donor.targets[e.row]);
        origins.push(donor.origins[e.row].clone());
        borrowed.push(BorrowedRow {
            donor_id: donor.id.clone(),
            row: e.row,
            group: donor.group_labels[e.row],
        });
    }
    let augmented = Dataset::with_origins(
        target.id.clone(),
        features,
        groups,
        targets,
        target.schema.clone(),
        origins,
    )?;
    let per_group_after = group_cardinalities(&augmented);
    Ok(AugmentationResult {
        augmented,
        cluster_id: pool.cluster_id,
        majority,
        borrowed,
        per_group_before: before,
        per_group_after,
        shortfall,
    })
}

/// JSON sidecar describing where every borrowed row came from.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance<'a> {
    pub target: &'a str,
    pub method: &'a str,
    pub cluster_id: usize,
    pub majority: usize,
    pub groups: &'a [String],
    pub per_group_before: &'a [usize],
    pub per_group_after: &'a [usize],
    pub shortfall: BTreeMap<String, usize>,
    pub borrowed: &'a [BorrowedRow],
}

impl AugmentationResult {
    pub fn provenance(&self) -> Provenance<'_> {
        Provenance {
            target: &self.augmented.id,
            method: "masc",
            cluster_id: self.cluster_id,
            majority: self.majority,
            groups: &self.augmented.schema.protected_groups,
            per_group_before: &self.per_group_before,
            per_group_after: &self.per_group_after,
            shortfall: self
                .shortfall
                .iter()
                .map(|(g, c)| (self.augmented.schema.protected_groups[*g].clone(), *c))
                .collect(),
            borrowed: &self.borrowed,
        }
    }
}
