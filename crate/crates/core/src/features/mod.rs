//! Handcrafted feature sets, vocabulary fitting and feature-vector assembly.
//!
//! Extraction works on an [`AnnotatedTurn`] (tokens, POS tags and entity
//! spans computed once per turn). A [`FeatureSchema`] fixes the requested
//! sets, their column order and the fitted n-gram vocabularies; it turns
//! annotated turns into [`FeatureVector`]s and dense rows.

mod ngrams;
mod pedagogical;
mod semantic;
mod speciteller;

use std::borrow::Cow;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Book, Turn};
use crate::lexicons::{LexiconBundle, PhraseTable};
use crate::textproc::{
    pos_tag, recognize_entities, tokenize, EntityCategory, EntitySpan, Gazetteer, PosTaggerModel,
    Token, TokenKind,
};

pub use ngrams::{
    extract_lexical, extract_syntactic, fit_lexical_vocab, fit_pos_vocab, LEXICAL_MIN_FREQUENCY,
    LEXICAL_PREFIX, LEXICAL_STATS, POS_PREFIX,
};
pub use pedagogical::{
    extract_book, extract_named_entity, extract_pronoun, named_entity_names, named_entity_values,
    pronoun_names, BOOK_NAMES,
};
pub use semantic::{extract_semantic, HISTOGRAM_MAX};
pub use speciteller::{embedding_names, extract_embedding_average, extract_speciteller_shallow};

/// Speciteller features kept in the interpretable pedagogical set.
pub const PEDAGOGICAL_FIXED: [&str; 6] = [
    "spec.imageability",
    "spec.strong_subjective",
    "spec.polar",
    "spec.familiarity",
    "spec.connectives",
    "spec.stopword_frac",
];

pub const SPECITELLER_SHALLOW: [&str; 14] = speciteller::NAMES;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("no feature sets requested")]
    EmptyConfig,
    #[error("unknown feature set {0:?}")]
    UnknownSet(String),
    #[error("feature set {0} is not part of this schema")]
    NotFitted(FeatureSet),
    #[error("the embeddings set is only available to the joint neural model")]
    EmbeddingsNeedJointModel,
    #[error("lexicon embedding dimension {found} does not match schema dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureSet {
    Speciteller,
    Semantic,
    Lexical,
    Syntactic,
    Pronoun,
    NamedEntity,
    Book,
    /// Fixed interpretable Speciteller features plus IG-selected pronoun,
    /// entity and book features.
    Pedagogical,
    /// Learned character-LSTM embedding; joint model only.
    Embeddings,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 9] = [
        FeatureSet::Speciteller,
        FeatureSet::Semantic,
        FeatureSet::Lexical,
        FeatureSet::Syntactic,
        FeatureSet::Pronoun,
        FeatureSet::NamedEntity,
        FeatureSet::Book,
        FeatureSet::Pedagogical,
        FeatureSet::Embeddings,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSet::Speciteller => "speciteller",
            FeatureSet::Semantic => "semantic",
            FeatureSet::Lexical => "lexical",
            FeatureSet::Syntactic => "syntactic",
            FeatureSet::Pronoun => "pronoun",
            FeatureSet::NamedEntity => "named-entity",
            FeatureSet::Book => "book",
            FeatureSet::Pedagogical => "pedagogical",
            FeatureSet::Embeddings => "embeddings",
        }
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureSet {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "ne" | "named-entity" | "named_entity" | "entities" => Ok(FeatureSet::NamedEntity),
            _ => FeatureSet::ALL
                .into_iter()
                .find(|f| f.as_str() == s)
                .ok_or(FeatureError::UnknownSet(s)),
        }
    }
}

/// Parses a `+`-joined list such as `speciteller+semantic+embeddings`.
/// `online-dialogue` expands to semantic, lexical and syntactic; `all` to
/// every handcrafted set except pedagogical.
pub fn parse_feature_sets(spec: &str) -> Result<BTreeSet<FeatureSet>, FeatureError> {
    let mut sets = BTreeSet::new();
    for part in spec.split('+').map(str::trim).filter(|p| !p.is_empty()) {
        match part.to_ascii_lowercase().as_str() {
            "online-dialogue" | "online_dialogue" => {
                sets.extend([FeatureSet::Semantic, FeatureSet::Lexical, FeatureSet::Syntactic])
            }
            "all" => sets.extend([
                FeatureSet::Speciteller,
                FeatureSet::Semantic,
                FeatureSet::Lexical,
                FeatureSet::Syntactic,
                FeatureSet::Pronoun,
                FeatureSet::NamedEntity,
                FeatureSet::Book,
            ]),
            _ => {
                sets.insert(part.parse()?);
            }
        }
    }
    if sets.is_empty() {
        return Err(FeatureError::EmptyConfig);
    }
    Ok(sets)
}

pub fn format_feature_sets(sets: &BTreeSet<FeatureSet>) -> String {
    sets.iter().map(|s| s.as_str()).collect::<Vec<_>>().join("+")
}

/// Named feature values: a dense block in insertion order and a sparse
/// n-gram block.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub dense: IndexMap<String, f64>,
    pub sparse: BTreeMap<String, f64>,
}

impl FeatureVector {
    pub fn from_dense(names: impl IntoIterator<Item = String>, values: Vec<f64>) -> Self {
        FeatureVector {
            dense: names.into_iter().zip(values).collect(),
            sparse: BTreeMap::new(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.dense.values().chain(self.sparse.values()).all(|v| v.is_finite())
    }
}

/// Character-name matcher and stopword-free summary terms for one book.
#[derive(Debug, Clone)]
pub struct BookIndex {
    pub book: Book,
    names: PhraseTable<usize>,
    gazetteer: Gazetteer,
    summary_terms: Vec<String>,
    sentence_terms: Vec<Vec<String>>,
}

impl BookIndex {
    pub fn new(book: Book, base: &Gazetteer, bundle: &LexiconBundle) -> Self {
        let mut names = PhraseTable::new();
        let mut gazetteer = base.clone();
        for (i, c) in book.characters.iter().enumerate() {
            for form in c.forms() {
                let key: Vec<String> = tokenize(form).iter().map(Token::lower).collect();
                names.insert(&key.join(" "), i);
                gazetteer.insert(form, EntityCategory::Person);
            }
        }
        let summary_terms = Self::content_terms(&tokenize(&book.summary_text), bundle);
        let sentence_terms = book
            .summary_sentences
            .iter()
            .map(|s| Self::content_terms(&tokenize(s), bundle))
            .collect();
        BookIndex {
            book,
            names,
            gazetteer,
            summary_terms,
            sentence_terms,
        }
    }

    /// Lowercased word and number tokens that are not stopwords.
    pub fn content_terms(tokens: &[Token], bundle: &LexiconBundle) -> Vec<String> {
        tokens
            .iter()
            .filter(|t| t.kind != TokenKind::Punctuation)
            .map(Token::lower)
            .filter(|w| !bundle.is_stopword(w))
            .collect()
    }
}

/// Everything extraction needs besides the turn itself.
#[derive(Debug, Clone)]
pub struct Resources {
    pub bundle: LexiconBundle,
    pub tagger: Cow<'static, PosTaggerModel>,
    pub gazetteer: Gazetteer,
    books: BTreeMap<String, BookIndex>,
}

impl Resources {
    pub fn new(bundle: LexiconBundle) -> Self {
        Resources {
            bundle,
            tagger: Cow::Borrowed(PosTaggerModel::packaged()),
            gazetteer: Gazetteer::new(),
            books: BTreeMap::new(),
        }
    }

    /// Set the base gazetteer before adding books; each book extends it
    /// with its character names.
    pub fn with_gazetteer(mut self, gazetteer: Gazetteer) -> Self {
        self.gazetteer = gazetteer;
        self
    }

    pub fn add_book(&mut self, transcript_id: &str, book: Book) {
        let index = BookIndex::new(book, &self.gazetteer, &self.bundle);
        self.books.insert(transcript_id.to_string(), index);
    }

    pub fn book_for(&self, transcript_id: &str) -> Option<&BookIndex> {
        self.books.get(transcript_id)
    }

    /// External POS tags and entity spans take precedence over the built-in
    /// tagger and recognizer.
    pub fn annotate<'a>(&'a self, turn: &'a Turn) -> AnnotatedTurn<'a> {
        let tokens = tokenize(&turn.text);
        let lowered = tokens.iter().map(Token::lower).collect();
        let book = self.books.get(&turn.transcript_id);
        let tags = match &turn.external_pos {
            Some(tags) => tags.clone(),
            None => pos_tag(&tokens, &self.tagger),
        };
        let entities = match &turn.external_entities {
            Some(spans) => spans.clone(),
            None => {
                let gazetteer = book.map(|b| &b.gazetteer).unwrap_or(&self.gazetteer);
                recognize_entities(&tokens, gazetteer)
            }
        };
        AnnotatedTurn {
            turn,
            tokens,
            lowered,
            tags,
            entities,
            book,
        }
    }

    pub fn annotate_all<'a>(&'a self, turns: &'a [Turn]) -> Vec<AnnotatedTurn<'a>> {
        turns.iter().map(|t| self.annotate(t)).collect()
    }
}

/// A turn with its tokenization, tags and entity spans.
#[derive(Debug, Clone)]
pub struct AnnotatedTurn<'a> {
    pub turn: &'a Turn,
    pub tokens: Vec<Token>,
    pub lowered: Vec<String>,
    pub tags: Vec<String>,
    pub entities: Vec<EntitySpan>,
    pub book: Option<&'a BookIndex>,
}

impl AnnotatedTurn<'_> {
    pub fn word_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.tokens.len()).filter(|&i| self.tokens[i].is_word())
    }

    pub fn n_words(&self) -> usize {
        self.word_indices().count()
    }
}

/// Requested sets, column order and fitted vocabularies. Frozen once fitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    sets: BTreeSet<FeatureSet>,
    dense_names: Vec<String>,
    lexical_vocab: BTreeMap<String, f64>,
    pos_vocab: BTreeSet<String>,
    embedding_dim: usize,
    fitted_on: String,
}

fn dense_block_names(set: FeatureSet, embedding_dim: usize) -> Vec<String> {
    match set {
        FeatureSet::Speciteller => {
            let mut names: Vec<String> = speciteller::NAMES.iter().map(|s| s.to_string()).collect();
            names.extend(embedding_names(embedding_dim));
            names
        }
        FeatureSet::Semantic => semantic::names(),
        FeatureSet::Lexical => LEXICAL_STATS.iter().map(|s| s.to_string()).collect(),
        FeatureSet::Syntactic | FeatureSet::Embeddings => Vec::new(),
        FeatureSet::Pronoun => pronoun_names(),
        FeatureSet::NamedEntity => named_entity_names(),
        FeatureSet::Book => BOOK_NAMES.iter().map(|s| s.to_string()).collect(),
        FeatureSet::Pedagogical => {
            let mut names: Vec<String> = PEDAGOGICAL_FIXED.iter().map(|s| s.to_string()).collect();
            names.extend(pronoun_names());
            names.extend(named_entity_names());
            names.extend(BOOK_NAMES.iter().map(|s| s.to_string()));
            names
        }
    }
}

impl FeatureSchema {
    /// Fits n-gram vocabularies on `turns` (the training split, or the whole
    /// corpus in corpus-fit mode).
    pub fn fit(
        sets: &BTreeSet<FeatureSet>,
        turns: &[AnnotatedTurn],
        embedding_dim: usize,
        fitted_on: &str,
    ) -> Result<Self, FeatureError> {
        if sets.is_empty() {
            return Err(FeatureError::EmptyConfig);
        }
        if sets.contains(&FeatureSet::Embeddings) {
            return Err(FeatureError::EmbeddingsNeedJointModel);
        }
        let mut dense: IndexMap<String, ()> = IndexMap::new();
        for &set in sets {
            for name in dense_block_names(set, embedding_dim) {
                dense.insert(name, ());
            }
        }
        let lexical_vocab = if sets.contains(&FeatureSet::Lexical) {
            fit_lexical_vocab(turns)
        } else {
            BTreeMap::new()
        };
        let pos_vocab = if sets.contains(&FeatureSet::Syntactic) {
            fit_pos_vocab(turns)
        } else {
            BTreeSet::new()
        };
        Ok(FeatureSchema {
            sets: sets.clone(),
            dense_names: dense.into_keys().collect(),
            lexical_vocab,
            pos_vocab,
            embedding_dim,
            fitted_on: fitted_on.to_string(),
        })
    }

    pub fn sets(&self) -> &BTreeSet<FeatureSet> {
        &self.sets
    }

    pub fn fitted_on(&self) -> &str {
        &self.fitted_on
    }

    pub fn embedding_dim(&self) -> usize {
        self.embedding_dim
    }

    pub fn dense_names(&self) -> &[String] {
        &self.dense_names
    }

    pub fn lexical_vocab(&self) -> &BTreeMap<String, f64> {
        &self.lexical_vocab
    }

    pub fn pos_vocab(&self) -> &BTreeSet<String> {
        &self.pos_vocab
    }

    pub fn sparse_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .lexical_vocab
            .keys()
            .map(|t| format!("{LEXICAL_PREFIX}{t}"))
            .collect();
        names.extend(self.pos_vocab.iter().map(|g| format!("{POS_PREFIX}{g}")));
        names
    }

    /// Dense names followed by sparse names: the column order of [`to_row`].
    ///
    /// [`to_row`]: FeatureSchema::to_row
    pub fn names(&self) -> Vec<String> {
        let mut names = self.dense_names.clone();
        names.extend(self.sparse_names());
        names
    }

    pub fn n_dense(&self) -> usize {
        self.dense_names.len()
    }

    pub fn n_features(&self) -> usize {
        self.dense_names.len() + self.lexical_vocab.len() + self.pos_vocab.len()
    }

    pub fn extract(&self, at: &AnnotatedTurn, bundle: &LexiconBundle) -> Result<FeatureVector, FeatureError> {
        let mut fv = FeatureVector::default();
        let mut shallow = None;
        let mut shallow_values = || {
            shallow
                .get_or_insert_with(|| speciteller::shallow_values(at, bundle))
                .clone()
        };
        for &set in &self.sets {
            match set {
                FeatureSet::Speciteller => {
                    if bundle.embeddings.dim() != self.embedding_dim {
                        return Err(FeatureError::DimensionMismatch {
                            expected: self.embedding_dim,
                            found: bundle.embeddings.dim(),
                        });
                    }
                    let mut values = shallow_values();
                    values.extend(extract_embedding_average(at, bundle));
                    fv.dense.extend(dense_block_names(set, self.embedding_dim).into_iter().zip(values));
                }
                FeatureSet::Semantic => fv.dense.extend(extract_semantic(at, bundle).dense),
                FeatureSet::Lexical => {
                    let lex = extract_lexical(at, &self.lexical_vocab);
                    fv.dense.extend(lex.dense);
                    fv.sparse.extend(lex.sparse);
                }
                FeatureSet::Syntactic => fv.sparse.extend(extract_syntactic(at, &self.pos_vocab).sparse),
                FeatureSet::Pronoun => fv.dense.extend(extract_pronoun(at, bundle).dense),
                FeatureSet::NamedEntity => fv.dense.extend(extract_named_entity(at).dense),
                FeatureSet::Book => fv.dense.extend(extract_book(at, bundle).dense),
                FeatureSet::Pedagogical => {
                    let values = shallow_values();
                    for name in PEDAGOGICAL_FIXED {
                        let i = speciteller::NAMES.iter().position(|n| *n == name).unwrap();
                        fv.dense.insert(name.to_string(), values[i]);
                    }
                    fv.dense.extend(extract_pronoun(at, bundle).dense);
                    fv.dense.extend(extract_named_entity(at).dense);
                    fv.dense.extend(extract_book(at, bundle).dense);
                }
                FeatureSet::Embeddings => return Err(FeatureError::EmbeddingsNeedJointModel),
            }
        }
        // Re-key in schema order so equal vectors compare and serialize equally.
        let dense = self
            .dense_names
            .iter()
            .map(|n| (n.clone(), fv.dense[n]))
            .collect();
        Ok(FeatureVector {
            dense,
            sparse: fv.sparse,
        })
    }

    /// Dense values in schema order, then sparse values (0 when absent).
    pub fn to_row(&self, fv: &FeatureVector) -> Vec<f64> {
        let mut row: Vec<f64> = self
            .dense_names
            .iter()
            .map(|n| fv.dense.get(n).copied().unwrap_or(0.0))
            .collect();
        row.extend(
            self.sparse_names()
                .iter()
                .map(|n| fv.sparse.get(n).copied().unwrap_or(0.0)),
        );
        row
    }

    pub fn matrix(&self, turns: &[AnnotatedTurn], bundle: &LexiconBundle) -> Result<Vec<Vec<f64>>, FeatureError> {
        turns
            .iter()
            .map(|at| Ok(self.to_row(&self.extract(at, bundle)?)))
            .collect()
    }

    /// Dense block as CSV keyed by turn, plus a sidecar with one line of
    /// `name:value` pairs per turn for the sparse block.
    pub fn write_csv<W: Write, S: Write>(
        &self,
        turns: &[AnnotatedTurn],
        bundle: &LexiconBundle,
        csv_out: W,
        mut sparse_out: S,
    ) -> Result<(), FeatureError> {
        let mut writer = csv::Writer::from_writer(csv_out);
        let mut header = vec!["transcript_id".to_string(), "turn_id".to_string()];
        header.extend(self.dense_names.iter().cloned());
        writer.write_record(&header)?;
        for at in turns {
            let fv = self.extract(at, bundle)?;
            let mut record = vec![at.turn.transcript_id.clone(), at.turn.turn_id.clone()];
            record.extend(fv.dense.values().map(|v| v.to_string()));
            writer.write_record(&record)?;
            let pairs: Vec<String> = fv.sparse.iter().map(|(n, v)| format!("{n}:{v}")).collect();
            writeln!(
                sparse_out,
                "{}\t{}\t{}",
                at.turn.transcript_id,
                at.turn.turn_id,
                pairs.join(" ")
            )?;
        }
        writer.flush()?;
        Ok(())
    }
}
