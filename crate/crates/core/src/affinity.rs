use ndarray::Array2;

use crate::discrepancy::DistanceMatrix;
use crate::error::{Error, Result};
use crate::io;

/// Default bandwidth for the Gaussian map applied to min-max normalized
/// distances.
pub const DEFAULT_AFFINITY_GAMMA: f64 = 10.0;

/// Gaussian similarity between datasets; symmetric with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    pub values: Array2<f64>,
    pub gamma: f64,
    pub dataset_ids: Vec<String>,
}

impl AffinityMatrix {
    pub fn len(&self) -> usize {
        self.dataset_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dataset_ids.is_empty()
    }

    pub fn to_csv(&self) -> String {
        io::matrix_csv(&self.dataset_ids, &self.values)
    }

    pub fn to_json(&self) -> Result<String> {
        io::matrix_json(&self.dataset_ids, &self.values)
    }
}

/// `A[i][j] = exp(-gamma * W[i][j]^2)` off the diagonal, `A[i][i] = 0`.
pub fn to_affinity(w: &DistanceMatrix, gamma: f64) -> Result<AffinityMatrix> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidGamma(gamma));
    }
    let values = Array2::from_shape_fn(w.values.dim(), |(i, j)| {
        if i == j {
            0.0
        } else {
            let d = w.values[[i, j]];
            (-gamma * d * d).exp()
        }
    });
    Ok(AffinityMatrix {
        values,
        gamma,
        dataset_ids: w.dataset_ids.clone(),
    })
}
