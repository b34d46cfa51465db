use serde::{Deserialize, Serialize};

use super::{quadratic_weighted_kappa, ConfusionMatrix, EvalError};
use crate::corpus::SpecificityLabel;

pub const DEFAULT_STEP: f64 = 0.001;

/// Cut points on a [0, 1] score: `s <= t1` is low, `s <= t2` medium,
/// anything above high.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPair {
    pub t1: f64,
    pub t2: f64,
}

impl ThresholdPair {
    pub fn new(t1: f64, t2: f64) -> Result<Self, EvalError> {
        if !(0.0..=1.0).contains(&t1) || !(0.0..=1.0).contains(&t2) || t1 > t2 {
            return Err(EvalError::BadThresholds { t1, t2 });
        }
        Ok(ThresholdPair { t1, t2 })
    }
}

pub fn apply_thresholds(score: f64, t: ThresholdPair) -> Result<SpecificityLabel, EvalError> {
    if !(0.0..=1.0).contains(&score) {
        return Err(EvalError::ScoreOutOfRange(score));
    }
    Ok(if score <= t.t1 {
        SpecificityLabel::Low
    } else if score <= t.t2 {
        SpecificityLabel::Medium
    } else {
        SpecificityLabel::High
    })
}

/// `{0, step, 2 step, ..., 1}`. When `1 / step` is a whole number the
/// points are computed as `i / n` so that e.g. 0.1 is exact.
pub fn threshold_grid(step: f64) -> Result<Vec<f64>, EvalError> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(EvalError::BadStep(step));
    }
    let inverse = 1.0 / step;
    let n = inverse.round();
    if (inverse - n).abs() < 1e-9 {
        let n = n as usize;
        return Ok((0..=n).map(|i| i as f64 / n as f64).collect());
    }
    let mut grid = Vec::new();
    let mut i = 0usize;
    while (i as f64) * step <= 1.0 + 1e-12 {
        grid.push(((i as f64) * step).min(1.0));
        i += 1;
    }
    Ok(grid)
}

/// Exhaustive scan of `t1 <= t2` on the grid, `t1` ascending then `t2`
/// ascending, keeping the first pair with the highest QWK. Pairs whose
/// predictions collapse onto one label have no kappa and are skipped.
pub fn search_thresholds(
    scores: &[f64],
    labels: &[SpecificityLabel],
    step: f64,
) -> Result<(ThresholdPair, f64), EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            left: scores.len(),
            right: labels.len(),
        });
    }
    if let Some(&s) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(EvalError::ScoreOutOfRange(s));
    }
    let mut present = [false; 3];
    labels.iter().for_each(|l| present[l.ordinal()] = true);
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(EvalError::SingleCategory);
    }
    let grid = threshold_grid(step)?;
    // cum[g][l]: turns of true label l with score <= grid[g].
    let mut at_point = vec![[0u64; 3]; grid.len()];
    for (&s, l) in scores.iter().zip(labels) {
        let g = grid.partition_point(|&x| x < s);
        at_point[g][l.ordinal()] += 1;
    }
    let mut cum = vec![[0u64; 3]; grid.len()];
    let mut running = [0u64; 3];
    for (g, c) in at_point.iter().enumerate() {
        for l in 0..3 {
            running[l] += c[l];
        }
        cum[g] = running;
    }
    let totals = running;
    let mut best: Option<(ThresholdPair, f64)> = None;
    let mut m = ConfusionMatrix::zeros(3);
    for i in 0..grid.len() {
        for j in i..grid.len() {
            for l in 0..3 {
                m.counts[l][0] = cum[i][l];
                m.counts[l][1] = cum[j][l] - cum[i][l];
                m.counts[l][2] = totals[l] - cum[j][l];
            }
            let Ok(kappa) = quadratic_weighted_kappa(&m) else {
                continue;
            };
            if best.is_none_or(|(_, b)| kappa > b) {
                best = Some((ThresholdPair { t1: grid[i], t2: grid[j] }, kappa));
            }
        }
    }
    best.ok_or(EvalError::NoValidThresholds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use SpecificityLabel::*;

    #[test]
    fn boundaries() {
        let t = ThresholdPair::new(0.02, 0.78).unwrap();
        assert_eq!(apply_thresholds(0.01, t).unwrap(), Low);
        assert_eq!(apply_thresholds(0.02, t).unwrap(), Low);
        assert_eq!(apply_thresholds(0.5, t).unwrap(), Medium);
        assert_eq!(apply_thresholds(0.78, t).unwrap(), Medium);
        assert_eq!(apply_thresholds(0.781, t).unwrap(), High);
        assert_eq!(apply_thresholds(0.80, t).unwrap(), High);
        assert!(apply_thresholds(1.2, t).is_err());
        assert!(ThresholdPair::new(0.5, 0.4).is_err());
    }

    #[test]
    fn grid_points() {
        let g = threshold_grid(0.001).unwrap();
        assert_eq!(g.len(), 1001);
        assert_eq!(g[100], 0.1);
        assert_eq!(g[780], 0.78);
        assert_eq!(threshold_grid(0.5).unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(threshold_grid(0.3).unwrap().len(), 4);
        assert!(threshold_grid(0.0).is_err());
    }

    #[test]
    fn separable_scores() {
        let scores = [0.1, 0.1, 0.5, 0.5, 0.9, 0.9];
        let labels = [Low, Low, Medium, Medium, High, High];
        let (t, k) = search_thresholds(&scores, &labels, 0.001).unwrap();
        assert_eq!(k, 1.0);
        assert_eq!(t.t1, 0.1);
        assert_eq!(t.t2, 0.5);
    }

    #[test]
    fn shuffled_labels_have_no_signal() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let scores: Vec<f64> = (0..300).map(|_| rng.gen_range(0.0..1.0)).collect();
        let mut labels: Vec<_> = (0..300).map(|i| [Low, Medium, High][i % 3]).collect();
        labels.shuffle(&mut rng);
        let (_, k) = search_thresholds(&scores, &labels, 0.001).unwrap();
        assert!(k < 0.15, "{k}");
    }

    #[test]
    fn coarse_grid_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let scores: Vec<f64> = (0..60).map(|_| rng.gen_range(0.0..1.0)).collect();
        let labels: Vec<_> = scores
            .iter()
            .map(|&s| if s + rng.gen_range(-0.3..0.3) < 0.35 { Low } else if s < 0.7 { Medium } else { High })
            .collect();
        let (best, k) = search_thresholds(&scores, &labels, 0.05).unwrap();
        assert!(best.t1 <= best.t2);
        let grid = threshold_grid(0.05).unwrap();
        for (i, &t1) in grid.iter().enumerate() {
            for &t2 in &grid[i..] {
                let t = ThresholdPair::new(t1, t2).unwrap();
                let pred: Vec<_> = scores.iter().map(|&s| apply_thresholds(s, t).unwrap()).collect();
                if let Ok(kk) = quadratic_weighted_kappa(&ConfusionMatrix::from_labels(&labels, &pred).unwrap()) {
                    assert!(k >= kk);
                }
            }
        }
    }

    #[test]
    fn degenerate_grid_and_errors() {
        let scores = [0.2, 0.4, 0.6, 0.8];
        let labels = [Low, Low, High, High];
        let (t, _) = search_thresholds(&scores, &labels, 0.5).unwrap();
        assert!(t.t1 <= t.t2);
        assert!(matches!(search_thresholds(&scores, &[Low; 4], 0.5), Err(EvalError::SingleCategory)));
    }
}
