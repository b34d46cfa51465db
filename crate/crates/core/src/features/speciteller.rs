use super::{AnnotatedTurn, FeatureVector};
use crate::lexicons::{LexiconBundle, Strength};
use crate::textproc::TokenKind;

pub const NAMES: [&str; 14] = [
    "spec.connectives",
    "spec.words",
    "spec.numbers",
    "spec.capitals",
    "spec.symbols",
    "spec.avg_word_len",
    "spec.stopword_frac",
    "spec.strong_subjective",
    "spec.polar",
    "spec.familiarity",
    "spec.imageability",
    "spec.idf_min",
    "spec.idf_max",
    "spec.idf_avg",
];

pub fn embedding_names(dim: usize) -> Vec<String> {
    (0..dim).map(|i| format!("emb.{i:03}")).collect()
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

pub(crate) fn shallow_values(at: &AnnotatedTurn, bundle: &LexiconBundle) -> Vec<f64> {
    let words: Vec<&str> = at.word_indices().map(|i| at.lowered[i].as_str()).collect();
    let n_words = words.len() as f64;
    let connectives = bundle.connectives.find_all(&at.lowered).len() as f64;
    let numbers = at.tokens.iter().filter(|t| t.kind == TokenKind::Number).count() as f64;
    let capitals = at.turn.text.chars().filter(|c| c.is_uppercase()).count() as f64;
    let symbols = at
        .turn
        .text
        .chars()
        .filter(|c| !c.is_alphanumeric() && !c.is_whitespace())
        .count() as f64;
    let avg_len = mean(&at.word_indices().map(|i| at.tokens[i].char_len() as f64).collect::<Vec<_>>());
    let stop = words.iter().filter(|w| bundle.is_stopword(w)).count() as f64;
    let stop_frac = if n_words > 0.0 { stop / n_words } else { 0.0 };
    let mut strong = 0.0;
    let mut polar = 0.0;
    for w in &words {
        if let Some(e) = bundle.subjectivity.get(*w) {
            if e.strength == Strength::Strong {
                strong += 1.0;
            }
            if e.polarity.is_some() {
                polar += 1.0;
            }
        }
    }
    let norms: Vec<_> = words.iter().filter_map(|w| bundle.norms.get(*w)).collect();
    let fam = mean(&norms.iter().map(|n| n.familiarity).collect::<Vec<_>>());
    let img = mean(&norms.iter().map(|n| n.imageability).collect::<Vec<_>>());
    let idf: Vec<f64> = words.iter().map(|w| bundle.idf.lookup(w)).collect();
    let (idf_min, idf_max) = if idf.is_empty() {
        (0.0, 0.0)
    } else {
        (
            idf.iter().copied().fold(f64::INFINITY, f64::min),
            idf.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        )
    };
    vec![
        connectives,
        n_words,
        numbers,
        capitals,
        symbols,
        avg_len,
        stop_frac,
        strong,
        polar,
        fam,
        img,
        idf_min,
        idf_max,
        mean(&idf),
    ]
}

/// Mean of the vectors of in-vocabulary word tokens; zeros when none are known.
pub fn extract_embedding_average(at: &AnnotatedTurn, bundle: &LexiconBundle) -> Vec<f64> {
    let dim = bundle.embeddings.dim();
    let mut sum = vec![0.0; dim];
    let mut n = 0usize;
    for i in at.word_indices() {
        if let Some(v) = bundle.embeddings.get(&at.tokens[i].text) {
            sum.iter_mut().zip(v).for_each(|(s, x)| *s += x);
            n += 1;
        }
    }
    if n > 0 {
        sum.iter_mut().for_each(|s| *s /= n as f64);
    }
    sum
}

/// Shallow surface features only; embeddings are a separate block.
pub fn extract_speciteller_shallow(at: &AnnotatedTurn, bundle: &LexiconBundle) -> FeatureVector {
    FeatureVector::from_dense(NAMES.iter().map(|s| s.to_string()), shallow_values(at, bundle))
}
