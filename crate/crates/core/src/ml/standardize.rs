use serde::{Deserialize, Serialize};

use super::MlError;

/// Train-split mean and population standard deviation for the leading
/// (dense) columns of a row. Columns with zero spread pass through as-is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Standardizer {
    /// Fits on the first `names.len()` columns of `rows`.
    pub fn fit(rows: &[Vec<f64>], names: &[String]) -> Result<Self, MlError> {
        if rows.is_empty() {
            return Err(MlError::Empty);
        }
        let d = names.len();
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() < d) {
            return Err(MlError::RaggedRow { row: i, expected: d, found: r.len() });
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            mean.iter_mut().zip(r).for_each(|(m, v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in rows {
            for j in 0..d {
                let dev = r[j] - mean[j];
                var[j] += dev * dev;
            }
        }
        let sd = var.into_iter().map(|v| (v / n).sqrt()).collect();
        Ok(Standardizer {
            names: names.to_vec(),
            mean,
            sd,
        })
    }

    pub fn transform(&self, row: &mut [f64]) {
        for (j, v) in row.iter_mut().take(self.names.len()).enumerate() {
            if self.sd[j] > 0.0 {
                *v = (*v - self.mean[j]) / self.sd[j];
            }
        }
    }

    pub fn transform_all(&self, rows: &mut [Vec<f64>]) {
        rows.iter_mut().for_each(|r| self.transform(r));
    }
}
