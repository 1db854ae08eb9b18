//! Logistic-regression evaluation of a rebalanced training set on untouched
//! held-out rows of the original dataset.

use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use ndarray::{Array1, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::augmentation::majority_group;
use crate::data::{group_cardinalities, Dataset, RowOrigin, StandardScaler};
use crate::error::{Error, Result};
use crate::fairness::{fairness_report, FairnessReport, Predictions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LrConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Stop once the gradient norm falls below this.
    pub tolerance: f64,
    /// Recorded for reproducibility; weights start at zero.
    pub seed: u64,
}

impl Default for LrConfig {
    fn default() -> Self {
        LrConfig {
            learning_rate: 0.1,
            max_epochs: 2000,
            tolerance: 1e-6,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainedModel {
    /// Feature weights followed by the bias.
    pub weights: Vec<f64>,
    pub training_config: LrConfig,
    pub epochs: usize,
    pub converged: bool,
    /// Mean logistic loss before each update, plus the final loss.
    pub loss_trace: Vec<f64>,
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn logits(x: ArrayView2<f64>, w: ArrayView1<f64>) -> Array1<f64> {
    let d = x.ncols();
    x.dot(&w.slice(ndarray::s![..d])) + w[d]
}

/// Mean logistic loss `mean(log(1 + exp(z)) - y z)` with `z = x·w + b`.
pub fn logistic_loss(x: ArrayView2<f64>, y: &[u8], w: ArrayView1<f64>) -> f64 {
    let z = logits(x, w);
    z.iter()
        .zip(y)
        .map(|(&z, &y)| softplus(z) - y as f64 * z)
        .sum::<f64>()
        / y.len() as f64
}

/// Gradient of [`logistic_loss`] with respect to `[w, b]`.
pub fn logistic_gradient(x: ArrayView2<f64>, y: &[u8], w: ArrayView1<f64>) -> Array1<f64> {
    let n = y.len() as f64;
    let d = x.ncols();
    let resid: Array1<f64> = logits(x, w)
        .iter()
        .zip(y)
        .map(|(&z, &y)| sigmoid(z) - y as f64)
        .collect();
    let mut g = Array1::zeros(d + 1);
    g.slice_mut(ndarray::s![..d]).assign(&(x.t().dot(&resid) / n));
    g[d] = resid.sum() / n;
    g
}

/// Full-batch gradient descent on the mean logistic loss. The protected
/// attribute never enters: it is not one of the schema's feature columns.
pub fn train_lr(train: &Dataset, config: &LrConfig) -> Result<TrainedModel> {
    if train.n_rows() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: train.n_rows(),
        });
    }
    let positives = train.targets.iter().filter(|&&t| t == 1).count();
    if positives == 0 || positives == train.n_rows() {
        return Err(Error::SingleClass);
    }
    let x = train.features.view();
    let y = &train.targets;
    let mut w = Array1::<f64>::zeros(train.n_features() + 1);
    let mut loss_trace = Vec::new();
    let mut converged = false;
    let mut epochs = 0;
    while epochs < config.max_epochs {
        loss_trace.push(logistic_loss(x, y, w.view()));
        let g = logistic_gradient(x, y, w.view());
        if g.dot(&g).sqrt() < config.tolerance {
            converged = true;
            break;
        }
        w.scaled_add(-config.learning_rate, &g);
        epochs += 1;
    }
    if !converged {
        loss_trace.push(logistic_loss(x, y, w.view()));
    }
    Ok(TrainedModel {
        weights: w.to_vec(),
        training_config: *config,
        epochs,
        converged,
        loss_trace,
    })
}

impl TrainedModel {
    pub fn predict(&self, x: ArrayView2<f64>) -> Vec<u8> {
        let w = ArrayView1::from(&self.weights[..]);
        logits(x, w).iter().map(|&z| (z >= 0.0) as u8).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

pub const TEST_FRACTION: f64 = 0.3;

/// 70/30 split stratified by (group, target). Each stratum sends
/// `round(0.3 * size)` rows to the test side, but a stratum of two or more
/// rows always keeps at least one row on each side. A single-row stratum
/// cannot be split and stays in training.
pub fn stratified_split(ds: &Dataset, seed: u64) -> Result<Split> {
    let mut strata: BTreeMap<(usize, u8), Vec<usize>> = BTreeMap::new();
    for i in 0..ds.n_rows() {
        strata
            .entry((ds.group_labels[i], ds.targets[i]))
            .or_default()
            .push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for rows in strata.values_mut() {
        rows.shuffle(&mut rng);
        let n = rows.len();
        let n_test = if n < 2 {
            0
        } else {
            ((TEST_FRACTION * n as f64).round() as usize).clamp(1, n - 1)
        };
        test.extend_from_slice(&rows[..n_test]);
        train.extend_from_slice(&rows[n_test..]);
    }
    if test.is_empty() {
        let (&(group, target), _) = strata.iter().next().expect("dataset is non-empty");
        return Err(Error::StratumTooSmall { group, target });
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

#[derive(Debug, Clone, Serialize)]
pub struct EvaluationOutcome {
    pub report: FairnessReport,
    pub n_train: usize,
    pub n_test: usize,
    pub model: TrainedModel,
}

/// True when the row is a held-out original row or was interpolated from one.
fn touches_held_out(o: &RowOrigin, held_out: &HashSet<(Arc<str>, usize)>) -> bool {
    match o {
        RowOrigin::Original { dataset, row } => held_out.contains(&(dataset.clone(), *row)),
        RowOrigin::Synthetic {
            dataset,
            base,
            neighbor,
            ..
        } => {
            held_out.contains(&(dataset.clone(), *base)) || held_out.contains(&(dataset.clone(), *neighbor))
        }
    }
}

/// Splits `original`, trains on every row of `augmented` that neither is a
/// held-out original row nor was interpolated from one, and tests on the
/// held-out rows.
///
/// The returned report carries GR/DI/SP of `augmented` and accuracy,
/// Eq.Odds and prediction DI/SP on the test rows. Minorities are measured
/// against the original dataset's majority group.
pub fn evaluate_method(
    original: &Dataset,
    augmented: &Dataset,
    method: &str,
    split_seed: u64,
    lr: &LrConfig,
) -> Result<EvaluationOutcome> {
    original.ensure_same_schema(augmented)?;
    let split = stratified_split(original, split_seed)?;
    let held_out: HashSet<(Arc<str>, usize)> = split
        .test
        .iter()
        .filter_map(|&i| match &original.origins[i] {
            RowOrigin::Original { dataset, row } => Some((dataset.clone(), *row)),
            RowOrigin::Synthetic { .. } => None,
        })
        .collect();
    let train_rows: Vec<usize> = (0..augmented.n_rows())
        .filter(|&i| !touches_held_out(&augmented.origins[i], &held_out))
        .collect();
    let train = augmented.select_rows(&train_rows)?;
    let test = original.select_rows(&split.test)?;

    let scaler = StandardScaler::fit(&[&train])?;
    let train_scaled = scaler.transform(&train);
    let test_scaled = scaler.transform(&test);
    let model = train_lr(&train_scaled, lr)?;
    let y_pred = model.predict(test_scaled.features.view());

    let majority = majority_group(&group_cardinalities(original));
    let report = fairness_report(
        augmented,
        method,
        majority,
        Some(Predictions {
            y_true: &test.targets,
            y_pred: &y_pred,
            groups: &test.group_labels,
        }),
    )?;
    Ok(EvaluationOutcome {
        report,
        n_train: train.n_rows(),
        n_test: test.n_rows(),
        model,
    })
}

/// Training accuracy helper used by tests and reports.
pub fn accuracy_on(model: &TrainedModel, ds: &Dataset) -> f64 {
    let pred = model.predict(ds.features.view());
    let hits = pred.iter().zip(&ds.targets).filter(|(a, b)| a == b).count();
    hits as f64 / ds.n_rows() as f64
}
