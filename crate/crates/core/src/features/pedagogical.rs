//! Pronoun, named-entity and book feature sets.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use super::{AnnotatedTurn, BookIndex, FeatureVector};
use crate::lexicons::{GrammaticalNumber, LexiconBundle, PronounCategory};
use crate::textproc::{EntityCategory, EntitySpan};

pub fn pronoun_names() -> Vec<String> {
    let mut names: Vec<String> = [
        "pron.any",
        "pron.total",
        "pron.person1",
        "pron.person2",
        "pron.person3",
        "pron.singular",
        "pron.plural",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    names.extend(PronounCategory::ALL.iter().map(|c| format!("pron.{}", c.as_str())));
    names
}

pub(crate) fn pronoun_values(at: &AnnotatedTurn, bundle: &LexiconBundle) -> Vec<f64> {
    let mut v = vec![0.0; 7 + PronounCategory::ALL.len()];
    for (_, _, entry) in bundle.pronouns.find_all(&at.lowered) {
        v[1] += 1.0;
        if (1..=3).contains(&entry.person) {
            v[1 + entry.person as usize] += 1.0;
        }
        match entry.number {
            Some(GrammaticalNumber::Singular) => v[5] += 1.0,
            Some(GrammaticalNumber::Plural) => v[6] += 1.0,
            None => {}
        }
        for c in &entry.categories {
            let idx = PronounCategory::ALL.iter().position(|x| x == c).unwrap();
            v[7 + idx] += 1.0;
        }
    }
    v[0] = if v[1] > 0.0 { 1.0 } else { 0.0 };
    v
}

pub fn extract_pronoun(at: &AnnotatedTurn, bundle: &LexiconBundle) -> FeatureVector {
    FeatureVector::from_dense(pronoun_names(), pronoun_values(at, bundle))
}

const NE_RAW: [&str; 8] = [
    "ne.any",
    "ne.person_flag",
    "ne.location_flag",
    "ne.organization_flag",
    "ne.total",
    "ne.person",
    "ne.location",
    "ne.organization",
];

pub fn named_entity_names() -> Vec<String> {
    let mut names: Vec<String> = NE_RAW.iter().map(|s| s.to_string()).collect();
    names.extend(NE_RAW.iter().map(|s| format!("{s}_norm")));
    names
}

/// Eight raw indicators and counts, then each divided by the word count.
pub fn named_entity_values(spans: &[EntitySpan], n_words: usize) -> Vec<f64> {
    let mut raw = [0.0; 8];
    for span in spans {
        let idx = EntityCategory::ALL.iter().position(|c| *c == span.category).unwrap();
        raw[4] += 1.0;
        raw[5 + idx] += 1.0;
        raw[1 + idx] = 1.0;
    }
    raw[0] = if raw[4] > 0.0 { 1.0 } else { 0.0 };
    let mut v = raw.to_vec();
    v.extend(raw.iter().map(|x| if n_words > 0 { x / n_words as f64 } else { 0.0 }));
    v
}

pub fn extract_named_entity(at: &AnnotatedTurn) -> FeatureVector {
    FeatureVector::from_dense(named_entity_names(), named_entity_values(&at.entities, at.n_words()))
}

pub const BOOK_NAMES: [&str; 10] = [
    "book.char_present",
    "book.char_mentions",
    "book.char_mentions_norm",
    "book.char_distinct",
    "book.overlap_whole",
    "book.jaccard_whole",
    "book.cosine_whole",
    "book.overlap_sentence_max",
    "book.jaccard_sentence_max",
    "book.cosine_sentence_max",
];

fn overlap_and_jaccard(a: &BTreeSet<&str>, b: &BTreeSet<&str>) -> (f64, f64) {
    let inter = a.intersection(b).count() as f64;
    let union = a.union(b).count() as f64;
    (inter, if union > 0.0 { inter / union } else { 0.0 })
}

fn tfidf_cosine(a: &[String], b: &[String], bundle: &LexiconBundle) -> f64 {
    let weight = |w: &str| {
        if bundle.idf.n_docs() == 0 {
            1.0
        } else {
            bundle.idf.lookup(w)
        }
    };
    fn vector<'a>(terms: &'a [String], weight: &dyn Fn(&str) -> f64) -> BTreeMap<&'a str, f64> {
        let mut v: BTreeMap<&str, f64> = BTreeMap::new();
        for t in terms {
            *v.entry(t.as_str()).or_default() += 1.0;
        }
        for (t, x) in v.iter_mut() {
            *x *= weight(t);
        }
        v
    }
    let (va, vb) = (vector(a, &weight), vector(b, &weight));
    let dot: f64 = va.iter().filter_map(|(t, x)| vb.get(t).map(|y| x * y)).sum();
    let na = va.values().map(|x| x * x).sum::<f64>().sqrt();
    let nb = vb.values().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(0.0, 1.0)
    }
}

pub(crate) fn book_values(at: &AnnotatedTurn, bundle: &LexiconBundle) -> Vec<f64> {
    let mut v = vec![0.0; BOOK_NAMES.len()];
    let Some(index) = at.book else {
        return v;
    };
    let words: Vec<String> = at.word_indices().map(|i| at.lowered[i].clone()).collect();
    let hits = index.names.find_all(&words);
    let distinct: HashSet<usize> = hits.iter().map(|(_, _, &c)| c).collect();
    v[0] = if hits.is_empty() { 0.0 } else { 1.0 };
    v[1] = hits.len() as f64;
    v[2] = if words.is_empty() { 0.0 } else { hits.len() as f64 / words.len() as f64 };
    v[3] = distinct.len() as f64;

    let terms = BookIndex::content_terms(&at.tokens, bundle);
    let turn_set: BTreeSet<&str> = terms.iter().map(String::as_str).collect();
    let whole: BTreeSet<&str> = index.summary_terms.iter().map(String::as_str).collect();
    let (overlap, jaccard) = overlap_and_jaccard(&turn_set, &whole);
    v[4] = overlap;
    v[5] = jaccard;
    v[6] = tfidf_cosine(&terms, &index.summary_terms, bundle);
    for sentence in &index.sentence_terms {
        let set: BTreeSet<&str> = sentence.iter().map(String::as_str).collect();
        let (o, j) = overlap_and_jaccard(&turn_set, &set);
        v[7] = v[7].max(o);
        v[8] = v[8].max(j);
        v[9] = v[9].max(tfidf_cosine(&terms, sentence, bundle));
    }
    v
}

pub fn extract_book(at: &AnnotatedTurn, bundle: &LexiconBundle) -> FeatureVector {
    FeatureVector::from_dense(BOOK_NAMES.iter().map(|s| s.to_string()), book_values(at, bundle))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Book, CharacterName, Turn};
    use crate::features::Resources;

    fn resources_with_book(summary: &str) -> Resources {
        let mut res = Resources::new(LexiconBundle::packaged());
        let characters = vec![
            CharacterName {
                first: "Biff".into(),
                last: Some("Loman".into()),
                nicknames: vec![],
            },
            CharacterName {
                first: "Willy".into(),
                last: Some("Loman".into()),
                nicknames: vec!["the old man".into()],
            },
        ];
        res.add_book("T", Book::new("Salesman", characters, summary).unwrap());
        res
    }

    fn fv(res: &Resources, text: &str) -> FeatureVector {
        let turn = Turn::new("T", "1", "S", text);
        extract_book(&res.annotate(&turn), &res.bundle)
    }

    #[test]
    fn biff_example() {
        let res = resources_with_book("Biff returns home. Willy is tired.");
        let v = fv(&res, "I did not like Biff");
        assert_eq!(v.dense["book.char_present"], 1.0);
        assert_eq!(v.dense["book.char_mentions"], 1.0);
        assert_eq!(v.dense["book.char_mentions_norm"], 0.2);
    }

    #[test]
    fn multiword_nickname_and_distinct() {
        let res = resources_with_book("Biff returns home.");
        let v = fv(&res, "the old man yelled at biff and Biff left");
        assert_eq!(v.dense["book.char_mentions"], 3.0);
        assert_eq!(v.dense["book.char_distinct"], 2.0);
    }

    #[test]
    fn identical_to_summary() {
        let summary = "Biff returns home to the farm. Willy sells stockings.";
        let res = resources_with_book(summary);
        let v = fv(&res, summary);
        assert_eq!(v.dense["book.jaccard_whole"], 1.0);
        assert!((v.dense["book.cosine_whole"] - 1.0).abs() < 1e-12);
        assert_eq!(v.dense["book.overlap_whole"], 7.0);
    }

    #[test]
    fn disjoint_from_summary() {
        let res = resources_with_book("Biff returns home to the farm.");
        let v = fv(&res, "we like pizza");
        for name in ["book.overlap_whole", "book.jaccard_whole", "book.cosine_whole", "book.cosine_sentence_max"] {
            assert_eq!(v.dense[name], 0.0);
        }
    }

    #[test]
    fn sentence_max_at_least_whole_jaccard() {
        let res = resources_with_book("Biff returns home. Willy sells stockings on the road.");
        let v = fv(&res, "Biff returns");
        assert_eq!(v.dense["book.jaccard_sentence_max"], 2.0 / 3.0);
        assert!(v.dense["book.jaccard_sentence_max"] >= v.dense["book.jaccard_whole"]);
    }

    #[test]
    fn no_book_is_zero() {
        let res = Resources::new(LexiconBundle::packaged());
        let v = fv(&res, "Biff");
        assert!(v.dense.values().all(|&x| x == 0.0));
        assert_eq!(v.dense.len(), 10);
    }

    #[test]
    fn pronouns() {
        let res = Resources::new(LexiconBundle::packaged());
        let pron = |text: &str| {
            let turn = Turn::new("T", "1", "S", text);
            extract_pronoun(&res.annotate(&turn), &res.bundle)
        };
        let she = pron("she");
        assert_eq!(she.dense["pron.total"], 1.0);
        assert_eq!(she.dense["pron.person3"], 1.0);
        assert_eq!(she.dense["pron.singular"], 1.0);
        assert_eq!(she.dense["pron.personal"], 1.0);
        let their = pron("their themselves");
        assert_eq!(their.dense["pron.possessive"], 1.0);
        assert_eq!(their.dense["pron.reflexive"], 1.0);
        assert_eq!(their.dense["pron.plural"], 2.0);
        assert_eq!(their.dense["pron.person3"], 2.0);
        let none = pron("the lamp burned");
        assert!(none.dense.values().all(|&x| x == 0.0));
        assert_eq!(none.dense.len(), 15);
    }

    #[test]
    fn named_entities() {
        let person = EntitySpan { start: 0, end: 1, category: EntityCategory::Person };
        let place = EntitySpan { start: 3, end: 4, category: EntityCategory::Location };
        let names = named_entity_names();
        let get = |v: &[f64], n: &str| v[names.iter().position(|x| x == n).unwrap()];
        let v = named_entity_values(&[person], 5);
        assert_eq!(get(&v, "ne.person"), 1.0);
        assert_eq!(get(&v, "ne.person_norm"), 0.2);
        let v = named_entity_values(&[person, place], 10);
        assert_eq!(get(&v, "ne.total"), 2.0);
        assert_eq!(get(&v, "ne.total_norm"), 0.2);
        assert_eq!(get(&v, "ne.person_flag"), 1.0);
        assert_eq!(get(&v, "ne.location_flag"), 1.0);
        assert!(named_entity_values(&[], 0).iter().all(|&x| x == 0.0));
        assert_eq!(names.len(), 16);
    }
}
