use super::{AnnotatedTurn, FeatureVector};
use crate::lexicons::LexiconBundle;

pub const HISTOGRAM_MAX: usize = 20;

pub fn names() -> Vec<String> {
    let mut names: Vec<String> = ["sem.deictic", "sem.len_min", "sem.len_max", "sem.len_avg", "sem.len_median"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    names.extend((1..=HISTOGRAM_MAX).map(|i| format!("sem.len{i:02}")));
    names
}

/// Length statistics run over every token, punctuation included.
pub(crate) fn values(at: &AnnotatedTurn, bundle: &LexiconBundle) -> Vec<f64> {
    let deictic = at
        .word_indices()
        .filter(|&i| bundle.deictic.contains(&at.lowered[i]))
        .count() as f64;
    let mut lengths: Vec<usize> = at.tokens.iter().map(|t| t.char_len()).collect();
    lengths.sort_unstable();
    let mut out = vec![deictic, 0.0, 0.0, 0.0, 0.0];
    let mut histogram = vec![0.0; HISTOGRAM_MAX];
    if !lengths.is_empty() {
        let n = lengths.len();
        out[1] = lengths[0] as f64;
        out[2] = lengths[n - 1] as f64;
        out[3] = lengths.iter().sum::<usize>() as f64 / n as f64;
        out[4] = if n % 2 == 1 {
            lengths[n / 2] as f64
        } else {
            (lengths[n / 2 - 1] + lengths[n / 2]) as f64 / 2.0
        };
        for &l in &lengths {
            histogram[l.clamp(1, HISTOGRAM_MAX) - 1] += 1.0;
        }
    }
    out.extend(histogram);
    out
}

pub fn extract_semantic(at: &AnnotatedTurn, bundle: &LexiconBundle) -> FeatureVector {
    FeatureVector::from_dense(names(), values(at, bundle))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Turn;
    use crate::features::Resources;

    fn semantic(text: &str) -> FeatureVector {
        let res = Resources::new(LexiconBundle::packaged());
        let turn = Turn::new("T", "1", "S", text);
        extract_semantic(&res.annotate(&turn), &res.bundle)
    }

    #[test]
    fn punctuation_counts_toward_lengths() {
        let fv = semantic("a bb !");
        assert_eq!(fv.dense["sem.len_min"], 1.0);
        assert_eq!(fv.dense["sem.len_max"], 2.0);
        assert_eq!(fv.dense["sem.len_median"], 1.0);
        assert!((fv.dense["sem.len_avg"] - 4.0 / 3.0).abs() < 1e-12);
        assert_eq!(fv.dense["sem.len01"], 2.0);
        assert_eq!(fv.dense["sem.len02"], 1.0);
    }

    #[test]
    fn overflow_goes_to_last_bucket() {
        let fv = semantic(&"x".repeat(25));
        assert_eq!(fv.dense["sem.len20"], 1.0);
        assert_eq!(fv.dense["sem.len_max"], 25.0);
        let fv = semantic(&"x".repeat(20));
        assert_eq!(fv.dense["sem.len20"], 1.0);
    }

    #[test]
    fn deictic_count() {
        assert_eq!(semantic("this that").dense["sem.deictic"], 2.0);
        assert_eq!(semantic("This is it").dense["sem.deictic"], 1.0);
    }

    #[test]
    fn even_median_and_empty() {
        assert_eq!(semantic("a bbb").dense["sem.len_median"], 2.0);
        let fv = semantic("");
        assert_eq!(fv.dense.len(), 25);
        assert!(fv.dense.values().all(|&v| v == 0.0));
    }
}
