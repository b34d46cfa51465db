use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::MlError;
use crate::corpus::SpecificityLabel;

pub const N_LABELS: usize = 3;
pub const DEFAULT_L2: f64 = 1.0;
pub const MAX_ITERATIONS: usize = 500;
pub const GRADIENT_TOLERANCE: f64 = 1e-5;

/// Multinomial logistic regression over a fixed, named column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub feature_names: Vec<String>,
    /// One row of weights per label, low to high.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub l2: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub(crate) fn softmax(scores: &mut [f64]) {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for s in scores.iter_mut() {
        *s = (*s - max).exp();
        sum += *s;
    }
    scores.iter_mut().for_each(|s| *s /= sum);
}

/// Index of the largest value; the lowest index wins ties.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// `J(W, b) = (1/n) [ sum_i CE_i + (l2 / 2) ||W||^2 ]` over a flat parameter
/// vector laid out as `W` row-major (labels x features) followed by `b`.
/// The bias is not penalized.
pub struct LogisticObjective<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    l2: f64,
    d: usize,
}

impl<'a> LogisticObjective<'a> {
    pub fn new(x: &'a [Vec<f64>], y: &'a [usize], l2: f64) -> Result<Self, MlError> {
        if x.is_empty() {
            return Err(MlError::Empty);
        }
        if x.len() != y.len() {
            return Err(MlError::LengthMismatch {
                left: x.len(),
                right: y.len(),
            });
        }
        let d = x[0].len();
        for (i, row) in x.iter().enumerate() {
            if row.len() != d {
                return Err(MlError::RaggedRow { row: i, expected: d, found: row.len() });
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(MlError::NonFinite { row: i, column: j });
            }
        }
        if let Some(&bad) = y.iter().find(|&&l| l >= N_LABELS) {
            return Err(MlError::BadLabel(bad));
        }
        Ok(LogisticObjective { x, y, l2, d })
    }

    pub fn n_params(&self) -> usize {
        N_LABELS * (self.d + 1)
    }

    fn scores(&self, params: &[f64], row: &[f64]) -> [f64; N_LABELS] {
        let mut s = [0.0; N_LABELS];
        for (k, sk) in s.iter_mut().enumerate() {
            let w = &params[k * self.d..(k + 1) * self.d];
            *sk = params[N_LABELS * self.d + k] + w.iter().zip(row).map(|(a, b)| a * b).sum::<f64>();
        }
        s
    }

    fn penalty(&self, params: &[f64]) -> f64 {
        0.5 * self.l2 * params[..N_LABELS * self.d].iter().map(|w| w * w).sum::<f64>()
    }

    pub fn value(&self, params: &[f64]) -> f64 {
        let mut total = 0.0;
        for (row, &label) in self.x.iter().zip(self.y) {
            let s = self.scores(params, row);
            let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + s.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            total += lse - s[label];
        }
        (total + self.penalty(params)) / self.x.len() as f64
    }

    pub fn value_and_gradient(&self, params: &[f64]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.n_params()];
        let mut total = 0.0;
        for (row, &label) in self.x.iter().zip(self.y) {
            let mut p = self.scores(params, row);
            let max = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + p.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            total += lse - p[label];
            softmax(&mut p);
            p[label] -= 1.0;
            for (k, &r) in p.iter().enumerate() {
                if r != 0.0 {
                    let g = &mut grad[k * self.d..(k + 1) * self.d];
                    g.iter_mut().zip(row).for_each(|(gi, xi)| *gi += r * xi);
                }
                grad[N_LABELS * self.d + k] += r;
            }
        }
        let n = self.x.len() as f64;
        for (g, w) in grad.iter_mut().zip(&params[..N_LABELS * self.d]) {
            *g += self.l2 * w;
        }
        grad.iter_mut().for_each(|g| *g /= n);
        ((total + self.penalty(params)) / n, grad)
    }
}

/// Full-batch gradient descent from zero with backtracking (step halving
/// until the Armijo condition holds; the step doubles after each accepted
/// move). `seed` is accepted for interface stability: zero initialization
/// makes the result independent of it.
pub fn train_logistic(
    x: &[Vec<f64>],
    y: &[SpecificityLabel],
    feature_names: &[String],
    l2: f64,
    _seed: u64,
) -> Result<LinearModel, MlError> {
    let labels: Vec<usize> = y.iter().map(|l| l.ordinal()).collect();
    let objective = LogisticObjective::new(x, &labels, l2)?;
    if labels.iter().all(|&l| l == labels[0]) {
        return Err(MlError::SingleLabel);
    }
    if !(l2 >= 0.0 && l2.is_finite()) {
        return Err(MlError::BadRegularization(l2));
    }
    let d = objective.d;
    if feature_names.len() != d {
        return Err(MlError::SchemaMismatch {
            expected: d,
            found: feature_names.len(),
        });
    }
    let mut params = vec![0.0; objective.n_params()];
    let mut step = 1.0;
    let mut iterations = 0;
    let mut converged = false;
    let (mut value, mut grad) = objective.value_and_gradient(&params);
    while iterations < MAX_ITERATIONS {
        let inf_norm = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if inf_norm < GRADIENT_TOLERANCE {
            converged = true;
            break;
        }
        let sq_norm: f64 = grad.iter().map(|g| g * g).sum();
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = params.iter().zip(&grad).map(|(p, g)| p - step * g).collect();
            let trial_value = objective.value(&trial);
            if trial_value <= value - 0.5 * step * sq_norm {
                params = trial;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        iterations += 1;
        if !accepted {
            // No representable decrease left along the gradient.
            converged = true;
            break;
        }
        step *= 2.0;
        (value, grad) = objective.value_and_gradient(&params);
    }
    let weights = (0..N_LABELS).map(|k| params[k * d..(k + 1) * d].to_vec()).collect();
    Ok(LinearModel {
        feature_names: feature_names.to_vec(),
        weights,
        bias: params[N_LABELS * d..].to_vec(),
        l2,
        iterations,
        converged,
    })
}

impl LinearModel {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn scores(&self, x: &[f64]) -> Result<[f64; N_LABELS], MlError> {
        if x.len() != self.n_features() {
            return Err(MlError::SchemaMismatch {
                expected: self.n_features(),
                found: x.len(),
            });
        }
        let mut s = [0.0; N_LABELS];
        for (k, sk) in s.iter_mut().enumerate() {
            *sk = self.bias[k] + self.weights[k].iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
        Ok(s)
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<[f64; N_LABELS], MlError> {
        let mut s = self.scores(x)?;
        softmax(&mut s);
        Ok(s)
    }

    /// Argmax label; exact ties go to the lower ordinal.
    pub fn predict(&self, x: &[f64]) -> Result<SpecificityLabel, MlError> {
        let p = self.predict_proba(x)?;
        Ok(SpecificityLabel::from_ordinal(argmax(&p)).unwrap())
    }

    /// Features of one label's weight row sorted by decreasing magnitude,
    /// ties kept in column order.
    pub fn ranked_coefficients(&self, label: SpecificityLabel) -> Vec<(String, f64)> {
        let mut out: Vec<(String, f64)> = self
            .feature_names
            .iter()
            .cloned()
            .zip(self.weights[label.ordinal()].iter().copied())
            .collect();
        out.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()));
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, MlError> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Largest relative error between the analytic gradient and central finite
/// differences (step `h`) over `n_checks` randomly chosen parameters at
/// `params`. Relative error is `|a - n| / max(|a|, |n|)`, taken as 0 when
/// both are below 1e-8.
pub fn logistic_gradient_check(
    objective: &LogisticObjective,
    params: &[f64],
    n_checks: usize,
    h: f64,
    seed: u64,
) -> f64 {
    let (_, grad) = objective.value_and_gradient(params);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = params.len();
    let picks = sample(&mut rng, n, n_checks.min(n));
    let mut worst = 0.0f64;
    let mut p = params.to_vec();
    for i in picks {
        let orig = p[i];
        p[i] = orig + h;
        let plus = objective.value(&p);
        p[i] = orig - h;
        let minus = objective.value(&p);
        p[i] = orig;
        let numeric = (plus - minus) / (2.0 * h);
        worst = worst.max(relative_error(grad[i], numeric));
    }
    worst
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < 1e-8 {
        0.0
    } else {
        (analytic - numeric).abs() / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use SpecificityLabel::*;

    fn names(d: usize) -> Vec<String> {
        (0..d).map(|i| format!("f{i}")).collect()
    }

    #[test]
    fn separable_two_label_toy() {
        let x: Vec<Vec<f64>> = [-2.0, -1.5, -1.0, -0.5, 0.5, 1.0, 1.5, 2.0]
            .iter()
            .map(|&v| vec![v, 1.0 - v * 0.1])
            .collect();
        let y = [Low, Low, Low, Low, High, High, High, High];
        let m = train_logistic(&x, &y, &names(2), 0.01, 0).unwrap();
        for (row, label) in x.iter().zip(y) {
            assert_eq!(m.predict(row).unwrap(), label);
        }
    }

    #[test]
    fn zero_features_recover_label_frequencies() {
        let x = vec![vec![0.0, 0.0]; 10];
        let y = [Low, Low, Medium, Medium, Medium, Medium, Medium, High, High, High];
        let m = train_logistic(&x, &y, &names(2), 1.0, 0).unwrap();
        let p = m.predict_proba(&[0.0, 0.0]).unwrap();
        for (pi, want) in p.iter().zip([0.2, 0.5, 0.3]) {
            assert!((pi - want).abs() < 1e-5, "{p:?}");
        }
    }

    fn noisy_data(n: usize, d: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<SpecificityLabel>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let row: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let s = row[0] + 0.5 * row[1] + rng.gen_range(-0.8..0.8);
            y.push(if s < -0.4 { Low } else if s < 0.4 { Medium } else { High });
            x.push(row);
        }
        (x, y)
    }

    #[test]
    fn duplicating_rows_keeps_the_decision_function() {
        let (x, y) = noisy_data(60, 3, 4);
        let a = train_logistic(&x, &y, &names(3), 0.0, 0).unwrap();
        let x2: Vec<_> = x.iter().chain(&x).cloned().collect();
        let y2: Vec<_> = y.iter().chain(&y).copied().collect();
        let b = train_logistic(&x2, &y2, &names(3), 0.0, 0).unwrap();
        for row in &x {
            assert_eq!(a.predict(row).unwrap(), b.predict(row).unwrap());
            let (pa, pb) = (a.predict_proba(row).unwrap(), b.predict_proba(row).unwrap());
            assert!(pa.iter().zip(pb).all(|(u, v)| (u - v).abs() < 1e-4));
        }
        // With the penalty scaled by 1/n, doubling the data halves it.
        let c = train_logistic(&x, &y, &names(3), 0.5, 0).unwrap();
        let d = train_logistic(&x2, &y2, &names(3), 1.0, 0).unwrap();
        for (wc, wd) in c.weights.iter().flatten().zip(d.weights.iter().flatten()) {
            assert!((wc - wd).abs() < 1e-4);
        }
    }

    #[test]
    fn zero_model_is_uniform_and_ties_go_low() {
        let m = LinearModel {
            feature_names: names(2),
            weights: vec![vec![0.0; 2]; 3],
            bias: vec![0.0; 3],
            l2: 1.0,
            iterations: 0,
            converged: true,
        };
        let p = m.predict_proba(&[3.0, -1.0]).unwrap();
        assert!(p.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
        assert_eq!(m.predict(&[3.0, -1.0]).unwrap(), Low);
        let tie = LinearModel { bias: vec![0.0, 0.0, -1.0], ..m.clone() };
        assert_eq!(tie.predict(&[0.0, 0.0]).unwrap(), Low);
        assert!(matches!(m.predict(&[1.0]), Err(MlError::SchemaMismatch { .. })));
    }

    #[test]
    fn rejects_bad_input() {
        let x = vec![vec![1.0], vec![2.0]];
        assert!(matches!(train_logistic(&x, &[Low, Low], &names(1), 1.0, 0), Err(MlError::SingleLabel)));
        let bad = vec![vec![1.0], vec![f64::NAN]];
        assert!(matches!(
            train_logistic(&bad, &[Low, High], &names(1), 1.0, 0),
            Err(MlError::NonFinite { row: 1, column: 0 })
        ));
        assert!(train_logistic(&x, &[Low], &names(1), 1.0, 0).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (x, y) = noisy_data(25, 8, 9);
        let labels: Vec<usize> = y.iter().map(|l| l.ordinal()).collect();
        let obj = LogisticObjective::new(&x, &labels, 0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let params: Vec<f64> = (0..obj.n_params()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let err = logistic_gradient_check(&obj, &params, 27, 1e-5, 3);
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn json_roundtrip_and_ranking() {
        let (x, y) = noisy_data(50, 3, 1);
        let m = train_logistic(&x, &y, &names(3), 1.0, 0).unwrap();
        assert_eq!(LinearModel::from_json(&m.to_json()).unwrap(), m);
        let ranked = m.ranked_coefficients(High);
        assert_eq!(ranked[0].0, "f0");
        assert!(ranked.windows(2).all(|w| w[0].1.abs() >= w[1].1.abs()));
    }

    proptest! {
        #[test]
        fn probabilities_sum_to_one(w in proptest::collection::vec(-50.0f64..50.0, 9), x in proptest::collection::vec(-10.0f64..10.0, 2)) {
            let m = LinearModel {
                feature_names: names(2),
                weights: w.chunks(3).take(3).map(|c| c[..2].to_vec()).collect(),
                bias: w[6..9].to_vec(),
                l2: 0.0,
                iterations: 0,
                converged: true,
            };
            let p = m.predict_proba(&x).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let shifted = LinearModel { bias: m.bias.iter().map(|b| b + 7.25).collect(), ..m.clone() };
            prop_assert_eq!(m.predict(&x).unwrap(), shifted.predict(&x).unwrap());
        }
    }
}
