//! Tokenization, sentence splitting, POS tagging and entity recognition.

mod ner;
mod sentences;
mod tagger;
mod tokenize;

pub use ner::{recognize_entities, validate_spans, EntityCategory, EntitySpan, Gazetteer};
pub use sentences::{split_sentences, ABBREVIATIONS};
pub use tagger::{
    parse_tagged_corpus, pos_tag, tagging_accuracy, train_pos_tagger, PosTaggerModel,
    TaggedSentence,
};
pub use tokenize::{tokenize, Token, TokenKind};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TextprocError {
    #[error("tagger training corpus is empty")]
    EmptyCorpus,
    #[error("sentence {sentence} has {tokens} tokens but {tags} tags")]
    TagLengthMismatch {
        sentence: usize,
        tokens: usize,
        tags: usize,
    },
    #[error("line {line}: expected token_TAG, found {token:?}")]
    MalformedTaggedToken { line: usize, token: String },
    #[error("gazetteer line {line}: expected phrase<TAB>category, found {content:?}")]
    MalformedGazetteer { line: usize, content: String },
    #[error("unknown entity category {0:?}")]
    UnknownEntityCategory(String),
}
