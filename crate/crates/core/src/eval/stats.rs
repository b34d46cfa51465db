use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t: f64,
    pub df: f64,
    /// Two-tailed.
    pub p: f64,
}

/// Two-tailed paired t-test on `a - b`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTestResult, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let n = a.len();
    if n < 2 {
        return Err(EvalError::TooFewPairs(n));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if var <= 0.0 || !var.is_finite() {
        return Err(EvalError::DegenerateDifferences);
    }
    let t = mean / (var.sqrt() / (n as f64).sqrt());
    let df = (n - 1) as f64;
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    let p = (2.0 * dist.cdf(-t.abs())).min(1.0);
    Ok(TTestResult { t, df, p })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_two_three() {
        let r = paired_t_test(&[1.0, 2.0, 3.0], &[0.0; 3]).unwrap();
        assert!((r.t - 3.464101615137755).abs() < 1e-12);
        assert_eq!(r.df, 2.0);
        assert!((r.p - 0.07417990022744853).abs() < 1e-9, "{}", r.p);
    }

    #[test]
    fn tight_differences() {
        let r = paired_t_test(&[5.0, 5.1, 4.9, 5.2, 4.8], &[0.0; 5]).unwrap();
        assert!(r.p < 0.001);
        assert!((r.p - 2.3968033567773545e-7).abs() < 1e-12, "{}", r.p);
        assert!((r.t - 70.71067811865476).abs() < 1e-9);
    }

    #[test]
    fn sign_and_errors() {
        let r = paired_t_test(&[0.0; 3], &[1.0, 2.0, 3.0]).unwrap();
        assert!(r.t < 0.0);
        let a = [0.5, 0.6, 0.7];
        assert!(matches!(paired_t_test(&a, &a), Err(EvalError::DegenerateDifferences)));
        assert!(paired_t_test(&[1.0], &[0.0]).is_err());
    }
}
