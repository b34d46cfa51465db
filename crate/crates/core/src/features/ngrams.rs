//! Lexical tf-idf and POS n-gram blocks, both with vocabularies fitted on a
//! set of training turns.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use super::{AnnotatedTurn, FeatureVector};

pub const LEXICAL_MIN_FREQUENCY: usize = 5;
pub const LEXICAL_STATS: [&str; 3] = ["lex.tfidf_min", "lex.tfidf_max", "lex.tfidf_avg"];
pub const LEXICAL_PREFIX: &str = "lex:";
pub const POS_PREFIX: &str = "pos:";

/// Lowercased word and number unigrams plus adjacent bigrams.
pub(crate) fn lexical_terms(at: &AnnotatedTurn) -> Vec<String> {
    let words: Vec<&str> = at
        .tokens
        .iter()
        .zip(&at.lowered)
        .filter(|(t, _)| t.kind != crate::textproc::TokenKind::Punctuation)
        .map(|(_, l)| l.as_str())
        .collect();
    let mut terms: Vec<String> = words.iter().map(|w| w.to_string()).collect();
    terms.extend(words.windows(2).map(|w| format!("{} {}", w[0], w[1])));
    terms
}

pub(crate) fn pos_ngrams(tags: &[String]) -> Vec<String> {
    (1..=3)
        .flat_map(|n| tags.windows(n).map(|w| w.join("_")))
        .collect()
}

/// Term → idf for every unigram/bigram seen at least
/// [`LEXICAL_MIN_FREQUENCY`] times in `turns`. Idf is `ln(N / df)` over the
/// same turns.
pub fn fit_lexical_vocab(turns: &[AnnotatedTurn]) -> BTreeMap<String, f64> {
    let mut freq: BTreeMap<String, usize> = BTreeMap::new();
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    for at in turns {
        let terms = lexical_terms(at);
        for t in &terms {
            *freq.entry(t.clone()).or_default() += 1;
        }
        for t in terms.into_iter().collect::<HashSet<_>>() {
            *df.entry(t).or_default() += 1;
        }
    }
    let n = turns.len() as f64;
    freq.into_iter()
        .filter(|(_, f)| *f >= LEXICAL_MIN_FREQUENCY)
        .map(|(t, _)| {
            let idf = (n / df[&t] as f64).ln();
            (t, idf)
        })
        .collect()
}

pub fn extract_lexical(at: &AnnotatedTurn, vocab: &BTreeMap<String, f64>) -> FeatureVector {
    let mut tf: BTreeMap<String, f64> = BTreeMap::new();
    for t in lexical_terms(at) {
        if vocab.contains_key(&t) {
            *tf.entry(t).or_default() += 1.0;
        }
    }
    let mut fv = FeatureVector::default();
    let mut nonzero = Vec::new();
    for (term, count) in tf {
        let value = count * vocab[&term];
        if value != 0.0 {
            nonzero.push(value);
        }
        fv.sparse.insert(format!("{LEXICAL_PREFIX}{term}"), value);
    }
    let stats = if nonzero.is_empty() {
        [0.0; 3]
    } else {
        [
            nonzero.iter().copied().fold(f64::INFINITY, f64::min),
            nonzero.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            nonzero.iter().sum::<f64>() / nonzero.len() as f64,
        ]
    };
    for (name, v) in LEXICAL_STATS.iter().zip(stats) {
        fv.dense.insert(name.to_string(), v);
    }
    fv
}

/// Every POS 1/2/3-gram seen in `turns`.
pub fn fit_pos_vocab(turns: &[AnnotatedTurn]) -> BTreeSet<String> {
    turns.iter().flat_map(|at| pos_ngrams(&at.tags)).collect()
}

pub fn extract_syntactic(at: &AnnotatedTurn, vocab: &BTreeSet<String>) -> FeatureVector {
    let mut fv = FeatureVector::default();
    for g in pos_ngrams(&at.tags) {
        if vocab.contains(&g) {
            *fv.sparse.entry(format!("{POS_PREFIX}{g}")).or_default() += 1.0;
        }
    }
    fv
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Turn;
    use crate::features::Resources;
    use crate::lexicons::LexiconBundle;

    fn turns(texts: &[&str]) -> Vec<Turn> {
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| Turn::new("T", &i.to_string(), "S", t))
            .collect()
    }

    #[test]
    fn min_frequency_five() {
        let res = Resources::new(LexiconBundle::packaged());
        let mut texts = vec!["storm"; 4];
        texts.extend(["lamp"; 5]);
        texts.push("zebra");
        let ts = turns(&texts);
        let ann: Vec<_> = ts.iter().map(|t| res.annotate(t)).collect();
        let vocab = fit_lexical_vocab(&ann);
        assert!(!vocab.contains_key("storm"));
        assert!(vocab.contains_key("lamp"));
        assert!((vocab["lamp"] - (10.0f64 / 5.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn bigrams_skip_punctuation_and_count_tf() {
        let res = Resources::new(LexiconBundle::packaged());
        let ts = turns(&["The lamp, the lamp."]);
        let at = res.annotate(&ts[0]);
        let terms = lexical_terms(&at);
        assert!(terms.contains(&"lamp the".to_string()));
        let vocab = BTreeMap::from([("lamp".to_string(), 1.5), ("the lamp".to_string(), 0.5)]);
        let fv = extract_lexical(&at, &vocab);
        assert_eq!(fv.sparse["lex:lamp"], 3.0);
        assert_eq!(fv.sparse["lex:the lamp"], 1.0);
        assert_eq!(fv.dense["lex.tfidf_min"], 1.0);
        assert_eq!(fv.dense["lex.tfidf_max"], 3.0);
        assert_eq!(fv.dense["lex.tfidf_avg"], 2.0);
    }

    #[test]
    fn empty_vocab() {
        let res = Resources::new(LexiconBundle::packaged());
        let ts = turns(&["anything at all"]);
        let at = res.annotate(&ts[0]);
        let fv = extract_lexical(&at, &fit_lexical_vocab(&[]));
        assert!(fv.sparse.is_empty());
        assert_eq!(fv.dense.len(), 3);
        assert!(fv.dense.values().all(|&v| v == 0.0));
    }

    #[test]
    fn pos_ngram_enumeration() {
        let two = pos_ngrams(&["DT".into(), "NN".into()]);
        assert_eq!(two, vec!["DT", "NN", "DT_NN"]);
        let three = pos_ngrams(&["DT".into(), "NN".into(), "VB".into()]);
        assert!(three.contains(&"DT_NN_VB".to_string()));
        assert!(pos_ngrams(&[]).is_empty());
    }

    #[test]
    fn syntactic_uses_external_tags() {
        let res = Resources::new(LexiconBundle::packaged());
        let mut t = Turn::new("T", "1", "S", "the lamp");
        t.external_pos = Some(vec!["DT".into(), "NN".into()]);
        let at = res.annotate(&t);
        let vocab = fit_pos_vocab(std::slice::from_ref(&at));
        let fv = extract_syntactic(&at, &vocab);
        assert_eq!(fv.sparse.len(), 3);
        assert_eq!(fv.sparse["pos:DT_NN"], 1.0);
    }
}
