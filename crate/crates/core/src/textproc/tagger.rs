//! Averaged-perceptron part-of-speech tagger.
//!
//! Greedy left-to-right decoding with the usual word-shape, affix and
//! previous-tag context features. Training shuffles sentences every epoch
//! with a seeded RNG, so a fixed seed always yields the same weight table.

use std::collections::{BTreeMap, HashMap};
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{TextprocError, Token};

const START: [&str; 2] = ["-START-", "-START2-"];
const END: [&str; 2] = ["-END-", "-END2-"];

/// A tagged sentence: tokens and their tags, equal length.
pub type TaggedSentence = (Vec<String>, Vec<String>);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosTaggerModel {
    tags: Vec<String>,
    weights: BTreeMap<String, Vec<f64>>,
    tagdict: BTreeMap<String, usize>,
}

static PACKAGED: OnceLock<PosTaggerModel> = OnceLock::new();

const PACKAGED_CORPUS: &str = include_str!("../../data/pos_train.txt");

impl PosTaggerModel {
    /// Tagger trained on the small corpus shipped with the crate.
    pub fn packaged() -> &'static PosTaggerModel {
        PACKAGED.get_or_init(|| {
            let corpus = parse_tagged_corpus(PACKAGED_CORPUS).expect("packaged corpus parses");
            train_pos_tagger(&corpus, 8, 0).expect("packaged corpus is non-empty")
        })
    }

    pub fn tagset(&self) -> &[String] {
        &self.tags
    }

    fn predict(&self, features: &[String]) -> usize {
        let mut scores = vec![0.0; self.tags.len()];
        for f in features {
            if let Some(w) = self.weights.get(f) {
                for (s, v) in scores.iter_mut().zip(w) {
                    *s += v;
                }
            }
        }
        argmax(&scores)
    }

    /// Tags raw token strings.
    pub fn tag_words<S: AsRef<str>>(&self, words: &[S]) -> Vec<String> {
        let context = build_context(words);
        let mut prev = START[0].to_string();
        let mut prev2 = START[1].to_string();
        let mut out = Vec::with_capacity(words.len());
        for (i, word) in words.iter().enumerate() {
            let word = word.as_ref();
            let idx = match self.tagdict.get(word) {
                Some(&t) => t,
                None => self.predict(&features(i, word, &context, &prev, &prev2)),
            };
            let tag = self.tags[idx].clone();
            prev2 = std::mem::replace(&mut prev, tag.clone());
            out.push(tag);
        }
        out
    }
}

fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

pub fn pos_tag(tokens: &[Token], model: &PosTaggerModel) -> Vec<String> {
    let words: Vec<&str> = tokens.iter().map(|t| t.text.as_str()).collect();
    model.tag_words(&words)
}

/// Parses one-sentence-per-line `token_tag` text. Blank lines are skipped.
pub fn parse_tagged_corpus(text: &str) -> Result<Vec<TaggedSentence>, TextprocError> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut toks = Vec::new();
        let mut tags = Vec::new();
        for pair in line.split_whitespace() {
            match pair.rsplit_once('_') {
                Some((tok, tag)) if !tok.is_empty() && !tag.is_empty() => {
                    toks.push(tok.to_string());
                    tags.push(tag.to_string());
                }
                _ => {
                    return Err(TextprocError::MalformedTaggedToken {
                        line: lineno + 1,
                        token: pair.to_string(),
                    })
                }
            }
        }
        out.push((toks, tags));
    }
    Ok(out)
}

fn normalize(word: &str) -> String {
    let first = word.chars().next();
    if word.contains('-') && first != Some('-') {
        "!HYPHEN".to_string()
    } else if word.len() == 4 && word.chars().all(|c| c.is_ascii_digit()) {
        "!YEAR".to_string()
    } else if first.is_some_and(|c| c.is_ascii_digit()) {
        "!DIGITS".to_string()
    } else {
        word.to_lowercase()
    }
}

fn build_context<S: AsRef<str>>(words: &[S]) -> Vec<String> {
    let mut ctx: Vec<String> = START.iter().map(|s| s.to_string()).collect();
    ctx.extend(words.iter().map(|w| normalize(w.as_ref())));
    ctx.extend(END.iter().map(|s| s.to_string()));
    ctx
}

fn suffix(s: &str, n: usize) -> &str {
    let count = s.chars().count();
    if count <= n {
        return s;
    }
    let (idx, _) = s.char_indices().nth(count - n).unwrap();
    &s[idx..]
}

fn prefix(s: &str) -> &str {
    match s.char_indices().nth(1) {
        Some((idx, _)) => &s[..idx],
        None => s,
    }
}

fn features(i: usize, word: &str, context: &[String], prev: &str, prev2: &str) -> Vec<String> {
    let i = i + 2;
    let w = &context[i];
    vec![
        "bias".to_string(),
        format!("i suffix {}", suffix(w, 3)),
        format!("i pref1 {}", prefix(word)),
        format!("i-1 tag {prev}"),
        format!("i-2 tag {prev2}"),
        format!("i tag+i-2 tag {prev} {prev2}"),
        format!("i word {w}"),
        format!("i-1 tag+i word {prev} {w}"),
        format!("i-1 word {}", context[i - 1]),
        format!("i-1 suffix {}", suffix(&context[i - 1], 3)),
        format!("i-2 word {}", context[i - 2]),
        format!("i+1 word {}", context[i + 1]),
        format!("i+1 suffix {}", suffix(&context[i + 1], 3)),
        format!("i+2 word {}", context[i + 2]),
    ]
}

#[derive(Default)]
struct Trainer {
    n_tags: usize,
    instances: u64,
    weights: HashMap<String, Vec<f64>>,
    totals: HashMap<String, Vec<f64>>,
    stamps: HashMap<String, Vec<u64>>,
}

impl Trainer {
    fn predict(&self, features: &[String]) -> usize {
        let mut scores = vec![0.0; self.n_tags];
        for f in features {
            if let Some(w) = self.weights.get(f) {
                for (s, v) in scores.iter_mut().zip(w) {
                    *s += v;
                }
            }
        }
        argmax(&scores)
    }

    fn update(&mut self, truth: usize, guess: usize, features: &[String]) {
        self.instances += 1;
        if truth == guess {
            return;
        }
        for f in features {
            for (class, delta) in [(truth, 1.0), (guess, -1.0)] {
                let n = self.n_tags;
                let w = self.weights.entry(f.clone()).or_insert_with(|| vec![0.0; n]);
                let totals = self.totals.entry(f.clone()).or_insert_with(|| vec![0.0; n]);
                let stamps = self.stamps.entry(f.clone()).or_insert_with(|| vec![0; n]);
                totals[class] += (self.instances - stamps[class]) as f64 * w[class];
                stamps[class] = self.instances;
                w[class] += delta;
            }
        }
    }

    fn averaged(mut self) -> BTreeMap<String, Vec<f64>> {
        let mut out = BTreeMap::new();
        let instances = self.instances.max(1);
        for (feat, w) in self.weights.drain() {
            let totals = &self.totals[&feat];
            let stamps = &self.stamps[&feat];
            let avg: Vec<f64> = (0..w.len())
                .map(|c| (totals[c] + (instances - stamps[c]) as f64 * w[c]) / instances as f64)
                .collect();
            if avg.iter().any(|&v| v != 0.0) {
                out.insert(feat, avg);
            }
        }
        out
    }
}

/// Words seen often enough with a single dominant tag skip the perceptron.
fn build_tagdict(corpus: &[TaggedSentence], tags: &[String]) -> BTreeMap<String, usize> {
    const FREQ_THRESHOLD: usize = 20;
    const AMBIGUITY_THRESHOLD: f64 = 0.97;
    let mut counts: BTreeMap<&str, BTreeMap<&str, usize>> = BTreeMap::new();
    for (words, word_tags) in corpus {
        for (w, t) in words.iter().zip(word_tags) {
            *counts.entry(w).or_default().entry(t).or_default() += 1;
        }
    }
    let mut dict = BTreeMap::new();
    for (word, tag_counts) in counts {
        let n: usize = tag_counts.values().sum();
        let (tag, &mode) = tag_counts
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .unwrap();
        if n >= FREQ_THRESHOLD && mode as f64 / n as f64 >= AMBIGUITY_THRESHOLD {
            let idx = tags.iter().position(|t| t == tag).unwrap();
            dict.insert(word.to_string(), idx);
        }
    }
    dict
}

pub fn train_pos_tagger(
    annotated: &[TaggedSentence],
    epochs: usize,
    seed: u64,
) -> Result<PosTaggerModel, TextprocError> {
    if annotated.iter().all(|(w, _)| w.is_empty()) {
        return Err(TextprocError::EmptyCorpus);
    }
    for (i, (w, t)) in annotated.iter().enumerate() {
        if w.len() != t.len() {
            return Err(TextprocError::TagLengthMismatch {
                sentence: i,
                tokens: w.len(),
                tags: t.len(),
            });
        }
    }
    let mut tags: Vec<String> = annotated.iter().flat_map(|(_, t)| t.iter().cloned()).collect();
    tags.sort();
    tags.dedup();
    let tag_index: HashMap<&str, usize> =
        tags.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    let tagdict = build_tagdict(annotated, &tags);

    let mut trainer = Trainer {
        n_tags: tags.len(),
        ..Default::default()
    };
    let mut order: Vec<usize> = (0..annotated.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..epochs {
        for &s in &order {
            let (words, gold) = &annotated[s];
            let context = build_context(words);
            let mut prev = START[0].to_string();
            let mut prev2 = START[1].to_string();
            for (i, word) in words.iter().enumerate() {
                let guess = match tagdict.get(word) {
                    Some(&t) => t,
                    None => {
                        let feats = features(i, word, &context, &prev, &prev2);
                        let guess = trainer.predict(&feats);
                        trainer.update(tag_index[gold[i].as_str()], guess, &feats);
                        guess
                    }
                };
                prev2 = std::mem::replace(&mut prev, tags[guess].clone());
            }
        }
        order.shuffle(&mut rng);
    }
    Ok(PosTaggerModel {
        weights: trainer.averaged(),
        tags,
        tagdict,
    })
}

/// Fraction of tokens whose predicted tag matches the gold tag.
pub fn tagging_accuracy(model: &PosTaggerModel, corpus: &[TaggedSentence]) -> f64 {
    let mut correct = 0usize;
    let mut total = 0usize;
    for (words, gold) in corpus {
        let predicted = model.tag_words(words);
        correct += predicted.iter().zip(gold).filter(|(p, g)| p == g).count();
        total += gold.len();
    }
    if total == 0 {
        0.0
    } else {
        correct as f64 / total as f64
    }
}
