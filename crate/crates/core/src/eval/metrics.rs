use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::corpus::SpecificityLabel;

/// Square count matrix; rows are ground truth, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn zeros(k: usize) -> Self {
        ConfusionMatrix {
            counts: vec![vec![0; k]; k],
        }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self, EvalError> {
        let k = counts.len();
        if k < 2 || counts.iter().any(|r| r.len() != k) {
            return Err(EvalError::NotSquare);
        }
        Ok(ConfusionMatrix { counts })
    }

    pub fn from_ordinals(y_true: &[usize], y_pred: &[usize], k: usize) -> Result<Self, EvalError> {
        if y_true.len() != y_pred.len() {
            return Err(EvalError::LengthMismatch {
                left: y_true.len(),
                right: y_pred.len(),
            });
        }
        if y_true.is_empty() {
            return Err(EvalError::Empty);
        }
        let mut m = ConfusionMatrix::zeros(k);
        for (&t, &p) in y_true.iter().zip(y_pred) {
            if t >= k || p >= k {
                return Err(EvalError::LabelOutOfRange(t.max(p)));
            }
            m.counts[t][p] += 1;
        }
        Ok(m)
    }

    pub fn from_labels(y_true: &[SpecificityLabel], y_pred: &[SpecificityLabel]) -> Result<Self, EvalError> {
        let t: Vec<usize> = y_true.iter().map(|l| l.ordinal()).collect();
        let p: Vec<usize> = y_pred.iter().map(|l| l.ordinal()).collect();
        Self::from_ordinals(&t, &p, 3)
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        (0..self.k()).map(|j| self.counts.iter().map(|r| r[j]).sum()).collect()
    }

    pub fn transpose(&self) -> Self {
        let k = self.k();
        ConfusionMatrix {
            counts: (0..k).map(|j| (0..k).map(|i| self.counts[i][j]).collect()).collect(),
        }
    }

    pub fn add(&mut self, other: &ConfusionMatrix) {
        for (r, o) in self.counts.iter_mut().zip(&other.counts) {
            r.iter_mut().zip(o).for_each(|(a, b)| *a += b);
        }
    }
}

/// Weighted kappa with weights `(i - j)^2 / (k - 1)^2`.
///
/// When either side puts all its mass on one label the chance correction
/// is undefined: a matrix with all mass in a single diagonal cell scores
/// 1.0, anything else is a [`EvalError::DegenerateMarginals`] error.
pub fn quadratic_weighted_kappa(m: &ConfusionMatrix) -> Result<f64, EvalError> {
    let k = m.k();
    let n = m.total();
    if n == 0 {
        return Err(EvalError::Empty);
    }
    let rows = m.row_sums();
    let cols = m.col_sums();
    let spread = |marg: &[u64]| marg.iter().filter(|&&c| c > 0).count();
    if spread(&rows) < 2 || spread(&cols) < 2 {
        let perfect = (0..k).any(|i| m.counts[i][i] == n);
        return if perfect { Ok(1.0) } else { Err(EvalError::DegenerateMarginals) };
    }
    let norm = ((k - 1) * (k - 1)) as f64;
    let n = n as f64;
    let mut observed = 0.0;
    let mut expected = 0.0;
    for (i, (row, &r)) in m.counts.iter().zip(&rows).enumerate() {
        for (j, (&o, &c)) in row.iter().zip(&cols).enumerate() {
            let w = ((i as f64 - j as f64).powi(2)) / norm;
            observed += w * o as f64;
            expected += w * r as f64 * c as f64 / n;
        }
    }
    Ok(1.0 - observed / expected)
}

/// QWK between two annotators' labels.
pub fn interrater_agreement(a: &[SpecificityLabel], b: &[SpecificityLabel]) -> Result<f64, EvalError> {
    quadratic_weighted_kappa(&ConfusionMatrix::from_labels(a, b)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use SpecificityLabel::*;

    #[test]
    fn confusion_layout() {
        let m = ConfusionMatrix::from_labels(&[Low, Medium, High], &[Low, Medium, High]).unwrap();
        assert_eq!(m.counts, vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]);
        let m = ConfusionMatrix::from_labels(&[Low], &[High]).unwrap();
        assert_eq!(m.counts[0][2], 1);
        assert_eq!(m.total(), 1);
        assert!(ConfusionMatrix::from_labels(&[Low], &[]).is_err());
    }

    #[test]
    fn two_by_two_uniform_is_zero() {
        let m = ConfusionMatrix::from_counts(vec![vec![1, 1], vec![1, 1]]).unwrap();
        assert_eq!(quadratic_weighted_kappa(&m).unwrap(), 0.0);
    }

    #[test]
    fn diagonal_is_one() {
        let m = ConfusionMatrix::from_counts(vec![vec![4, 0, 0], vec![0, 9, 0], vec![0, 0, 1]]).unwrap();
        assert_eq!(quadratic_weighted_kappa(&m).unwrap(), 1.0);
        let single = ConfusionMatrix::from_counts(vec![vec![0, 0, 0], vec![0, 5, 0], vec![0, 0, 0]]).unwrap();
        assert_eq!(quadratic_weighted_kappa(&single).unwrap(), 1.0);
    }

    #[test]
    fn interrater_fixture() {
        let a = [Low, Low, Medium, Medium, High, High];
        let b = [Low, Low, Medium, Medium, High, Medium];
        let k = interrater_agreement(&a, &b).unwrap();
        assert!((k - 0.8571428571428572).abs() < 1e-12, "{k}");
        assert_eq!(interrater_agreement(&a, &a).unwrap(), 1.0);
        let constant = [Medium; 6];
        assert!(matches!(interrater_agreement(&constant, &b), Err(EvalError::DegenerateMarginals)));
    }

    fn matrix() -> impl Strategy<Value = ConfusionMatrix> {
        let rows = |max: u64| proptest::collection::vec(proptest::collection::vec(0..max, 3), 3);
        prop_oneof![rows(4), rows(50)].prop_map(|counts| ConfusionMatrix { counts })
    }

    proptest! {
        #[test]
        fn symmetric(m in matrix()) {
            if let Ok(k) = quadratic_weighted_kappa(&m) {
                let kt = quadratic_weighted_kappa(&m.transpose()).unwrap();
                prop_assert!((k - kt).abs() < 1e-12);
                prop_assert!(k <= 1.0 + 1e-12);
            }
        }

        #[test]
        fn one_iff_no_off_diagonal_mass(m in matrix()) {
            if let Ok(k) = quadratic_weighted_kappa(&m) {
                let off: u64 = (0..3).flat_map(|i| (0..3).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m.counts[i][j]).sum();
                prop_assert_eq!((k - 1.0).abs() < 1e-12, off == 0);
            }
        }

        #[test]
        fn moving_mass_further_never_helps(mut m in matrix()) {
            prop_assume!(m.counts[0][1] > 0);
            // Only holds for non-negative kappa: [[0,3,1],[1,1,0],[1,0,0]]
            // goes from -0.68 to -0.667.
            let Ok(before) = quadratic_weighted_kappa(&m) else { return Ok(()) };
            prop_assume!(before >= 0.0);
            m.counts[0][1] -= 1;
            m.counts[0][2] += 1;
            if let Ok(after) = quadratic_weighted_kappa(&m) {
                prop_assert!(after <= before + 1e-12, "{} > {}", after, before);
            }
        }
    }
}
