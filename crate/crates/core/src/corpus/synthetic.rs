//! Seeded synthetic discussion corpus with a matching book and lexicons.
//!
//! Turns are assembled from generic filler clauses plus "specificity
//! elements": a character mention, book-specific content vocabulary, or a
//! connective-led elaboration. Low turns carry no elements, medium turns one,
//! high turns two or three. A fraction of turns get a perturbed element count
//! so the labels are learnable but not trivially separable.

use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Book, CharacterName, CorpusError, SpecificityLabel, Turn};
use crate::lexicons::{
    build_idf_table, Embeddings, LexiconBundle, Norm, Polarity, Strength, SubjectivityEntry,
    DEFAULT_EMBEDDING_DIM,
};
use crate::textproc::{tokenize, TokenKind};

pub const TRANSCRIPT_IDS: [&str; 4] = ["T01", "T02", "T03", "T04"];

const LABEL_NOISE: f64 = 0.2;

const FILLERS: &[&str] = &[
    "I think it is kind of interesting",
    "yeah I agree with that",
    "it's just like that I guess",
    "I don't really know",
    "maybe it is about people in general",
    "that is a good point",
    "it's kind of a weird thing",
    "everyone has their own opinion",
    "I mean it's just how people are",
    "um I guess",
    "it was pretty good",
    "people do that all the time",
    "I feel like it is true",
    "it's just the way it is",
    "you know what I mean",
    "I kind of like it",
    "that makes sense to me",
    "it's really hard to say",
];

const CHARACTER_PREDICATES: &[&str] = &[
    "keeps the lamp burning every night",
    "feels guilty about the ferry",
    "wants to leave the island",
    "does not trust the harbor master",
    "hides the letter from everyone",
    "is afraid of the storm",
    "promised to come back",
    "blames the village for the wreck",
];

const CONTENT_CLAUSES: &[&str] = &[
    "the storm wrecks the ferry near the harbor",
    "the lighthouse stands alone on the island",
    "the letter proves the rescue boat was sold",
    "the lamp is the only light in the winter",
    "the passengers wait on the rocks",
    "the fishing boats stay in the harbor",
    "the village rebuilds the ferry together",
    "the harbor master sold the rescue boat",
];

const CONNECTIVES: &[&str] = &[
    "because",
    "since",
    "for example",
    "therefore",
    "in addition",
    "however",
    "as a result",
    "in the end",
    "which means",
];

const OPENERS: &[&str] = &["yeah", "um", "well", "okay", "like"];

const CONTENT_WORDS: &[&str] = &[
    "lighthouse", "island", "harbor", "storm", "ferry", "lamp", "letter", "boat", "boats",
    "passengers", "rocks", "village", "winter", "master", "rescue", "light", "wreck", "fishing",
    "keeper", "father",
];

const GENERIC_NOUNS: &[&str] = &["thing", "people", "way", "opinion", "point", "time", "general"];

pub fn synthetic_book() -> Book {
    let characters = vec![
        CharacterName {
            first: "Marta".into(),
            last: Some("Vance".into()),
            nicknames: vec!["Marty".into()],
        },
        CharacterName {
            first: "Tobias".into(),
            last: Some("Reed".into()),
            nicknames: vec!["Toby".into()],
        },
        CharacterName {
            first: "Elena".into(),
            last: Some("Park".into()),
            nicknames: vec![],
        },
        CharacterName {
            first: "Jonah".into(),
            last: Some("Reed".into()),
            nicknames: vec!["the harbor boy".into()],
        },
    ];
    let summary = "Marta Vance keeps the lighthouse on Gull Island after her father dies. \
        Her childhood friend Tobias Reed works on the fishing boats in the harbor. \
        When a winter storm wrecks the ferry, Marta must choose between guarding the lamp and rescuing the passengers. \
        Jonah Reed hides a letter that proves the harbor master sold the rescue boat. \
        In the end Marta and Elena Park expose the lie and the village rebuilds the ferry together.";
    Book::new("The Keeper of Gull Island", characters, summary).expect("static book is valid")
}

#[derive(Clone, Copy)]
enum Element {
    Character,
    Content,
    Elaboration,
}

fn pick<'a, R: Rng>(rng: &mut R, items: &'a [&'a str]) -> &'a str {
    items.choose(rng).copied().unwrap()
}

fn character_mention<R: Rng>(rng: &mut R, book: &Book) -> String {
    let c = book.characters.choose(rng).unwrap();
    let r: f64 = rng.gen();
    if r < 0.6 {
        c.first.clone()
    } else if r < 0.8 {
        c.last.clone().unwrap_or_else(|| c.first.clone())
    } else {
        c.nicknames.first().cloned().unwrap_or_else(|| c.first.clone())
    }
}

fn element_clause<R: Rng>(rng: &mut R, book: &Book, element: Element) -> String {
    match element {
        Element::Character => {
            format!("{} {}", character_mention(rng, book), pick(rng, CHARACTER_PREDICATES))
        }
        Element::Content => {
            let mut s = pick(rng, CONTENT_CLAUSES).to_string();
            if rng.gen_bool(0.3) {
                s.push_str(&format!(" in chapter {}", rng.gen_range(1..=12)));
            }
            s
        }
        Element::Elaboration => {
            let inner = if rng.gen_bool(0.5) {
                pick(rng, FILLERS).to_string()
            } else {
                pick(rng, CONTENT_CLAUSES).to_string()
            };
            format!("{} {}", pick(rng, CONNECTIVES), inner)
        }
    }
}

fn element_count<R: Rng>(rng: &mut R, label: SpecificityLabel) -> usize {
    let base: i64 = match label {
        SpecificityLabel::Low => 0,
        SpecificityLabel::Medium => 1,
        SpecificityLabel::High => {
            if rng.gen_bool(0.6) {
                2
            } else {
                3
            }
        }
    };
    let count = if rng.gen_bool(LABEL_NOISE) {
        base + if rng.gen_bool(0.5) { 1 } else { -1 }
    } else {
        base
    };
    count.clamp(0, 3) as usize
}

fn sample_label<R: Rng>(rng: &mut R) -> SpecificityLabel {
    // Class proportions of the annotated classroom corpus (730 / 974 / 353).
    let r: f64 = rng.gen();
    if r < 730.0 / 2057.0 {
        SpecificityLabel::Low
    } else if r < 1704.0 / 2057.0 {
        SpecificityLabel::Medium
    } else {
        SpecificityLabel::High
    }
}

fn compose_text<R: Rng>(rng: &mut R, book: &Book, label: SpecificityLabel) -> String {
    let n_elements = element_count(rng, label);
    let n_fillers = if n_elements == 0 { rng.gen_range(1..=2) } else { rng.gen_range(0..=1) };
    let mut clauses: Vec<String> = (0..n_fillers).map(|_| pick(rng, FILLERS).to_string()).collect();
    for _ in 0..n_elements {
        let element = match rng.gen_range(0..3) {
            0 => Element::Character,
            1 => Element::Content,
            _ => Element::Elaboration,
        };
        clauses.push(element_clause(rng, book, element));
    }
    let mut text = String::new();
    if rng.gen_bool(0.3) {
        text.push_str(pick(rng, OPENERS));
        text.push_str(", ");
    }
    for (i, clause) in clauses.iter().enumerate() {
        if i > 0 {
            text.push_str(if rng.gen_bool(0.5) { ", " } else { " and " });
        }
        text.push_str(clause);
    }
    if rng.gen_bool(0.5) {
        text.push('.');
    }
    let mut chars = text.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => text,
    }
}

fn adjacent<R: Rng>(rng: &mut R, label: SpecificityLabel) -> SpecificityLabel {
    match label {
        SpecificityLabel::Low => SpecificityLabel::Medium,
        SpecificityLabel::High => SpecificityLabel::Medium,
        SpecificityLabel::Medium => {
            if rng.gen_bool(0.5) {
                SpecificityLabel::Low
            } else {
                SpecificityLabel::High
            }
        }
    }
}

/// Labeled turns spread over [`TRANSCRIPT_IDS`], each discussing
/// [`synthetic_book`]. Also fills `external_score` (a noisy stand-in for a
/// pre-trained specificity scorer) and `second_label` (a second annotator who
/// agrees 85% of the time).
pub fn generate_synthetic_corpus(seed: u64, n: usize) -> Result<Vec<Turn>, CorpusError> {
    if n < 30 {
        return Err(CorpusError::TooSmall(n));
    }
    let book = synthetic_book();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let score_noise = Normal::new(0.0, 0.18).unwrap();
    let per_transcript = n.div_ceil(TRANSCRIPT_IDS.len());
    let mut turns = Vec::with_capacity(n);
    for i in 0..n {
        let label = sample_label(&mut rng);
        let text = compose_text(&mut rng, &book, label);
        let transcript = TRANSCRIPT_IDS[i / per_transcript];
        let speaker = format!("S{}", rng.gen_range(1..=6));
        let mut turn = Turn::new(transcript, &format!("{:03}", i % per_transcript + 1), &speaker, &text)
            .with_label(label);
        let base = [0.2, 0.5, 0.8][label.ordinal()];
        let score: f64 = base + score_noise.sample(&mut rng);
        turn.external_score = Some((score.clamp(0.0, 1.0) * 1000.0).round() / 1000.0);
        turn.second_label = Some(if rng.gen_bool(0.85) { label } else { adjacent(&mut rng, label) });
        turns.push(turn);
    }
    Ok(turns)
}

fn vocabulary(book: &Book) -> BTreeSet<String> {
    let mut texts: Vec<&str> = Vec::new();
    texts.extend(FILLERS);
    texts.extend(CHARACTER_PREDICATES);
    texts.extend(CONTENT_CLAUSES);
    texts.extend(CONNECTIVES);
    texts.extend(OPENERS);
    texts.push(&book.summary_text);
    texts.push("in chapter");
    let mut vocab: BTreeSet<String> = texts
        .iter()
        .flat_map(|t| tokenize(t))
        .filter(|t| t.kind == TokenKind::Word)
        .map(|t| t.lower())
        .collect();
    for c in &book.characters {
        for form in c.forms() {
            vocab.extend(tokenize(form).iter().map(|t| t.lower()));
        }
    }
    vocab
}

/// Packaged tables plus norms, subjectivity, embeddings and idf values that
/// cover the synthetic vocabulary. The idf table is computed over a separate
/// background sample so it never sees the evaluation turns.
pub fn synthetic_lexicons(seed: u64) -> LexiconBundle {
    let book = synthetic_book();
    let mut bundle = LexiconBundle::packaged();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_1e71);

    for w in CONTENT_WORDS {
        bundle.norms.insert(
            w.to_string(),
            Norm {
                familiarity: rng.gen_range(480.0..600.0f64).round(),
                imageability: rng.gen_range(560.0..660.0f64).round(),
            },
        );
    }
    for w in GENERIC_NOUNS {
        bundle.norms.insert(
            w.to_string(),
            Norm {
                familiarity: rng.gen_range(560.0..640.0f64).round(),
                imageability: rng.gen_range(280.0..380.0f64).round(),
            },
        );
    }
    for (w, strength, polarity) in [
        ("alone", Strength::Strong, Some(Polarity::Negative)),
        ("trust", Strength::Weak, Some(Polarity::Positive)),
        ("interesting", Strength::Weak, Some(Polarity::Positive)),
        ("weird", Strength::Weak, Some(Polarity::Negative)),
        ("true", Strength::Weak, None),
    ] {
        bundle
            .subjectivity
            .insert(w.to_string(), SubjectivityEntry { strength, polarity });
    }

    let vocab = vocabulary(&book);
    let names: BTreeSet<String> = book
        .characters
        .iter()
        .flat_map(|c| c.forms().map(str::to_lowercase).collect::<Vec<_>>())
        .collect();
    let unit = Normal::new(0.0, 1.0).unwrap();
    let mut center = |scale: f64| -> Vec<f64> {
        (0..DEFAULT_EMBEDDING_DIM).map(|_| unit.sample(&mut rng) * scale).collect()
    };
    let content_center = center(0.3);
    let name_center = center(0.3);
    let mut vectors = HashMap::new();
    for w in &vocab {
        let mut v = center(0.1);
        let shift = if CONTENT_WORDS.contains(&w.as_str()) {
            Some(&content_center)
        } else if names.contains(w) {
            Some(&name_center)
        } else {
            None
        };
        if let Some(c) = shift {
            v.iter_mut().zip(c).for_each(|(x, c)| *x += c);
        }
        let v: Vec<f64> = v.into_iter().map(|x| (x * 1e6).round() / 1e6).collect();
        vectors.insert(w.clone(), v);
    }
    bundle.embeddings = Embeddings::new(DEFAULT_EMBEDDING_DIM, vectors).expect("uniform dimension");

    let background = generate_synthetic_corpus(seed.wrapping_add(1_000_003), 400)
        .expect("background size is valid");
    let mut docs: Vec<Vec<String>> = background
        .iter()
        .map(|t| tokenize(&t.text).iter().filter(|t| t.is_word()).map(|t| t.lower()).collect())
        .collect();
    docs.extend(book.summary_sentences.iter().map(|s| {
        tokenize(s).iter().filter(|t| t.is_word()).map(|t| t.lower()).collect()
    }));
    let idf = build_idf_table(&docs).expect("background is non-empty");
    bundle.idf = idf;
    bundle
}
