//! Group-fairness measures. Minority groups are always compared against a
//! single majority group.
//!
//! Rates are formed from integer counts and each metric is reduced to a
//! single fraction before the one final division, so values built from small
//! counts are the correctly rounded image of the exact rational.

use num_integer::Integer;
use serde::Serialize;

use crate::data::{group_cardinalities, Dataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Frac {
    num: i128,
    den: i128,
}

impl Frac {
    fn new(num: i128, den: i128) -> Frac {
        debug_assert!(den != 0);
        let g = num.gcd(&den).max(1);
        let sign = if den < 0 { -1 } else { 1 };
        Frac {
            num: sign * num / g,
            den: sign * den / g,
        }
    }

    fn sub(self, o: Frac) -> Frac {
        Frac::new(self.num * o.den - o.num * self.den, self.den * o.den)
    }

    fn add(self, o: Frac) -> Frac {
        Frac::new(self.num * o.den + o.num * self.den, self.den * o.den)
    }

    fn div(self, o: Frac) -> Frac {
        Frac::new(self.num * o.den, self.den * o.num)
    }

    fn abs(self) -> Frac {
        Frac::new(self.num.abs(), self.den)
    }

    fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

/// `GR_g = n_g / n` for every group.
pub fn group_ratio(ds: &Dataset) -> Vec<f64> {
    let n = ds.n_rows() as f64;
    group_cardinalities(ds)
        .into_iter()
        .map(|c| c as f64 / n)
        .collect()
}

/// (positives, total) of `group` in a labels/groups pair.
fn positive_counts(labels: &[u8], groups: &[usize], group: usize) -> (i128, i128) {
    labels
        .iter()
        .zip(groups)
        .filter(|(_, &g)| g == group)
        .fold((0, 0), |(p, n), (&y, _)| (p + y as i128, n + 1))
}

fn positive_rate(labels: &[u8], groups: &[usize], group: usize) -> Result<Frac> {
    let (pos, n) = positive_counts(labels, groups, group);
    if n == 0 {
        return Err(Error::EmptyGroup(group));
    }
    Ok(Frac::new(pos, n))
}

/// `P(Y=1 | S=minority) / P(Y=1 | S=majority)` over arbitrary label vectors
/// (dataset targets or model predictions).
pub fn disparate_impact_of(labels: &[u8], groups: &[usize], minority: usize, majority: usize) -> Result<f64> {
    if labels.len() != groups.len() {
        return Err(Error::LengthMismatch(labels.len(), groups.len()));
    }
    let min_rate = positive_rate(labels, groups, minority)?;
    let maj_rate = positive_rate(labels, groups, majority)?;
    if maj_rate.num == 0 {
        return Err(Error::UndefinedDisparateImpact { group: majority });
    }
    Ok(min_rate.div(maj_rate).to_f64())
}

/// `P(Y=1 | S=minority) - P(Y=1 | S=majority)`; negative when the minority
/// receives fewer positive outcomes.
pub fn statistical_parity_of(labels: &[u8], groups: &[usize], minority: usize, majority: usize) -> Result<f64> {
    if labels.len() != groups.len() {
        return Err(Error::LengthMismatch(labels.len(), groups.len()));
    }
    let min_rate = positive_rate(labels, groups, minority)?;
    let maj_rate = positive_rate(labels, groups, majority)?;
    Ok(min_rate.sub(maj_rate).to_f64())
}

pub fn disparate_impact(ds: &Dataset, minority: usize, majority: usize) -> Result<f64> {
    disparate_impact_of(&ds.targets, &ds.group_labels, minority, majority)
}

pub fn statistical_parity(ds: &Dataset, minority: usize, majority: usize) -> Result<f64> {
    statistical_parity_of(&ds.targets, &ds.group_labels, minority, majority)
}

/// FNR and FPR of one group as fractions.
fn error_rates(y_true: &[u8], y_pred: &[u8], groups: &[usize], group: usize) -> Result<(Frac, Frac)> {
    let (mut pos, mut neg, mut fn_, mut fp) = (0i128, 0i128, 0i128, 0i128);
    for ((&t, &p), &g) in y_true.iter().zip(y_pred).zip(groups) {
        if g != group {
            continue;
        }
        if t == 1 {
            pos += 1;
            fn_ += (p == 0) as i128;
        } else {
            neg += 1;
            fp += (p == 1) as i128;
        }
    }
    if pos == 0 {
        return Err(Error::UndefinedRate { group, class: 1 });
    }
    if neg == 0 {
        return Err(Error::UndefinedRate { group, class: 0 });
    }
    Ok((Frac::new(fn_, pos), Frac::new(fp, neg)))
}

/// `|FNR_majority - FNR_minority| + |FPR_majority - FPR_minority|`, in [0, 2].
pub fn equalized_odds(
    y_true: &[u8],
    y_pred: &[u8],
    groups: &[usize],
    minority: usize,
    majority: usize,
) -> Result<f64> {
    let n = y_true.len();
    for len in [y_pred.len(), groups.len()] {
        if len != n {
            return Err(Error::LengthMismatch(n, len));
        }
    }
    let (fnr_maj, fpr_maj) = error_rates(y_true, y_pred, groups, majority)?;
    let (fnr_min, fpr_min) = error_rates(y_true, y_pred, groups, minority)?;
    let d_fnr = fnr_maj.sub(fnr_min).abs();
    let d_fpr = fpr_maj.sub(fpr_min).abs();
    Ok(d_fnr.add(d_fpr).to_f64())
}

pub fn accuracy(y_true: &[u8], y_pred: &[u8]) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch(y_true.len(), y_pred.len()));
    }
    if y_true.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let hits = y_true.iter().zip(y_pred).filter(|(a, b)| a == b).count();
    Ok(Frac::new(hits as i128, y_true.len() as i128).to_f64())
}

/// Per-minority comparison against the majority group. `None` marks a value
/// that is undefined on this data (empty group, no majority positives, a
/// group missing a class).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinorityComparison {
    pub group: usize,
    pub label: String,
    pub di: Option<f64>,
    pub sp: Option<f64>,
    pub eq_odds: Option<f64>,
    pub prediction_di: Option<f64>,
    pub prediction_sp: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FairnessReport {
    pub dataset_id: String,
    pub method: String,
    pub majority: usize,
    pub gr: Vec<f64>,
    pub minorities: Vec<MinorityComparison>,
    pub accuracy: Option<f64>,
}

/// Predictions on a held-out set, used for the model-dependent measures.
#[derive(Debug, Clone, Copy)]
pub struct Predictions<'a> {
    pub y_true: &'a [u8],
    pub y_pred: &'a [u8],
    pub groups: &'a [usize],
}

/// GR, DI and SP of `ds` (majority taken from `ds` itself), plus Eq.Odds,
/// accuracy and prediction DI/SP when predictions are supplied.
pub fn fairness_report(
    ds: &Dataset,
    method: &str,
    majority: usize,
    predictions: Option<Predictions<'_>>,
) -> Result<FairnessReport> {
    let p = ds.n_groups();
    let minorities = (0..p)
        .filter(|&g| g != majority)
        .map(|g| MinorityComparison {
            group: g,
            label: ds.schema.protected_groups[g].clone(),
            di: disparate_impact(ds, g, majority).ok(),
            sp: statistical_parity(ds, g, majority).ok(),
            eq_odds: predictions
                .and_then(|pr| equalized_odds(pr.y_true, pr.y_pred, pr.groups, g, majority).ok()),
            prediction_di: predictions
                .and_then(|pr| disparate_impact_of(pr.y_pred, pr.groups, g, majority).ok()),
            prediction_sp: predictions
                .and_then(|pr| statistical_parity_of(pr.y_pred, pr.groups, g, majority).ok()),
        })
        .collect();
    let accuracy = predictions
        .map(|pr| accuracy(pr.y_true, pr.y_pred))
        .transpose()?;
    Ok(FairnessReport {
        dataset_id: ds.id.clone(),
        method: method.to_string(),
        majority,
        gr: group_ratio(ds),
        minorities,
        accuracy,
    })
}
