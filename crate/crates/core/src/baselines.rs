//! Competitor rebalancing strategies: protected-group SMOTE, protected-group
//! random undersampling and concatenation of geographic neighbours.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use ndarray::{Array2, ArrayView1, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::augmentation::majority_group;
use crate::data::{concat, group_cardinalities, standard_scale, Dataset, RowOrigin};
use crate::error::{Error, Result};

pub const DEFAULT_K_NEIGHBORS: usize = 5;

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Oversamples every minority group up to the majority count by
/// interpolating between a random group member and one of its `k_neighbors`
/// nearest same-group neighbours (exact search, Euclidean distance on
/// standardized features). Synthetic rows copy the base row's target.
pub fn group_smote(ds: &Dataset, k_neighbors: usize, seed: u64) -> Result<Dataset> {
    if k_neighbors == 0 {
        return Err(Error::Config("k_neighbors must be at least 1".into()));
    }
    let counts = group_cardinalities(ds);
    let majority = majority_group(&counts);
    let n_l = counts[majority];
    for (g, &c) in counts.iter().enumerate() {
        if g != majority && c < n_l && c < 2 {
            return Err(Error::SmoteGroupTooSmall { group: g, count: c });
        }
    }
    let search = standard_scale(ds).features;
    let source: std::sync::Arc<str> = std::sync::Arc::from(ds.id.as_str());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let total_new: usize = counts.iter().map(|&c| n_l - c).sum();
    let d = ds.n_features();
    let mut features = Array2::zeros((total_new, d));
    let mut groups = Vec::with_capacity(total_new);
    let mut targets = Vec::with_capacity(total_new);
    let mut origins = Vec::with_capacity(total_new);
    let mut next = 0;
    for (g, &c) in counts.iter().enumerate() {
        if g == majority || c >= n_l {
            continue;
        }
        let members: Vec<usize> = (0..ds.n_rows()).filter(|&i| ds.group_labels[i] == g).collect();
        let k = k_neighbors.min(members.len() - 1);
        let mut neighbours: HashMap<usize, Vec<usize>> = HashMap::new();
        for _ in 0..(n_l - c) {
            let base = members[rng.random_range(0..members.len())];
            let near = neighbours.entry(base).or_insert_with(|| {
                let mut by_dist: Vec<(f64, usize)> = members
                    .iter()
                    .filter(|&&j| j != base)
                    .map(|&j| (sq_dist(search.row(base), search.row(j)), j))
                    .collect();
                by_dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                by_dist.into_iter().take(k).map(|(_, j)| j).collect()
            });
            let neighbor = near[rng.random_range(0..near.len())];
            let weight: f64 = rng.random();
            let x = ds.features.row(base);
            let x_nb = ds.features.row(neighbor);
            features
                .index_axis_mut(Axis(0), next)
                .assign(&(&x + &((&x_nb - &x) * weight)));
            groups.push(g);
            targets.push(ds.targets[base]);
            origins.push(RowOrigin::Synthetic {
                dataset: source.clone(),
                base,
                neighbor,
                weight,
            });
            next += 1;
        }
    }
    let synthetic = Dataset::with_origins(ds.id.clone(), features, groups, targets, ds.schema.clone(), origins);
    match synthetic {
        Ok(s) => concat(ds.id.clone(), &[ds, &s]),
        // Nothing to add: already balanced.
        Err(Error::EmptyDataset(_)) => Ok(ds.clone()),
        Err(e) => Err(e),
    }
}

/// Undersamples every group down to the smallest group's count, uniformly
/// without replacement. Groups already at that count are kept whole and
/// surviving rows keep their original order.
pub fn group_rus(ds: &Dataset, seed: u64) -> Result<Dataset> {
    let counts = group_cardinalities(ds);
    let smallest = *counts.iter().min().expect("at least two groups");
    if smallest == 0 {
        let g = counts.iter().position(|&c| c == 0).unwrap();
        return Err(Error::EmptyGroup(g));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = Vec::with_capacity(smallest * counts.len());
    for (g, &c) in counts.iter().enumerate() {
        let members: Vec<usize> = (0..ds.n_rows()).filter(|&i| ds.group_labels[i] == g).collect();
        if c == smallest {
            keep.extend(members);
        } else {
            let picks = rand::seq::index::sample(&mut rng, c, smallest);
            keep.extend(picks.into_iter().map(|i| members[i]));
        }
    }
    keep.sort_unstable();
    ds.select_rows(&keep)
}

/// Dataset id -> region label.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RegionMap {
    pub region_of: BTreeMap<String, String>,
}

impl RegionMap {
    /// Reads a flat `id = "region"` table from TOML, or an object from JSON.
    pub fn from_path(path: &Path) -> Result<RegionMap> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        }
    }
}

/// Concatenates every dataset in the target's region, target first.
pub fn geo_concat(datasets: &[Dataset], region_map: &RegionMap, target_id: &str) -> Result<Dataset> {
    let target = datasets
        .iter()
        .find(|d| d.id == target_id)
        .ok_or_else(|| Error::UnknownDataset(target_id.to_string()))?;
    let region = region_map
        .region_of
        .get(target_id)
        .ok_or_else(|| Error::UnknownRegion(target_id.to_string()))?;
    let mut parts = vec![target];
    parts.extend(
        datasets
            .iter()
            .filter(|d| d.id != target_id && region_map.region_of.get(&d.id) == Some(region)),
    );
    concat(target_id, &parts)
}
