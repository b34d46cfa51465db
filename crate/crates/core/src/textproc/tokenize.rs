//! Rule-based tokenizer.
//!
//! Words are runs of letters (apostrophes inside a word are kept so clitics
//! can be split off afterwards), numbers are digit runs with an optional
//! decimal part, and every other non-space character is its own punctuation
//! token. Offsets are byte offsets into the original string.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenKind {
    Word,
    Number,
    Punctuation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub kind: TokenKind,
    /// Byte offset of the first character.
    pub start: usize,
    /// Byte offset one past the last character.
    pub end: usize,
}

impl Token {
    pub fn is_word(&self) -> bool {
        self.kind == TokenKind::Word
    }

    pub fn lower(&self) -> String {
        self.text.to_lowercase()
    }

    /// Length in characters, not bytes.
    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }
}

const CLITICS: [&str; 6] = ["'s", "'re", "'ve", "'d", "'ll", "'m"];

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() && !c.is_ascii_digit()
}

pub fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let byte_at = |i: usize| chars.get(i).map(|&(b, _)| b).unwrap_or(text.len());
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i].1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() {
            while i < chars.len() && chars[i].1.is_ascii_digit() {
                i += 1;
            }
            if i + 1 < chars.len() && chars[i].1 == '.' && chars[i + 1].1.is_ascii_digit() {
                i += 1;
                while i < chars.len() && chars[i].1.is_ascii_digit() {
                    i += 1;
                }
            }
            push(&mut tokens, text, byte_at(start), byte_at(i), TokenKind::Number);
        } else if is_word_char(c) {
            while i < chars.len() {
                let ch = chars[i].1;
                let inner_apostrophe =
                    is_apostrophe(ch) && i + 1 < chars.len() && is_word_char(chars[i + 1].1);
                if !(is_word_char(ch) || inner_apostrophe) {
                    break;
                }
                i += 1;
            }
            split_clitic(&mut tokens, text, byte_at(start), byte_at(i));
        } else {
            i += 1;
            push(&mut tokens, text, byte_at(start), byte_at(i), TokenKind::Punctuation);
        }
    }
    tokens
}

fn push(tokens: &mut Vec<Token>, text: &str, start: usize, end: usize, kind: TokenKind) {
    tokens.push(Token {
        text: text[start..end].to_string(),
        kind,
        start,
        end,
    });
}

/// Splits a word run into stem + clitic, PTB-style ("it's" -> "it" "'s",
/// "couldn't" -> "could" "n't"). Words with other apostrophes stay whole.
fn split_clitic(tokens: &mut Vec<Token>, text: &str, start: usize, end: usize) {
    let word = &text[start..end];
    let lower = word.to_lowercase().replace('\u{2019}', "'");
    if lower.len() == word.len() {
        if lower.ends_with("n't") && lower.len() > 3 {
            let cut = end - 3;
            push(tokens, text, start, cut, TokenKind::Word);
            push(tokens, text, cut, end, TokenKind::Word);
            return;
        }
        for clitic in CLITICS {
            if lower.ends_with(clitic) && lower.len() > clitic.len() {
                let cut = end - clitic.len();
                push(tokens, text, start, cut, TokenKind::Word);
                push(tokens, text, cut, end, TokenKind::Word);
                return;
            }
        }
    } else if let Some(pos) = word.rfind('\u{2019}') {
        // Curly apostrophe: byte lengths differ from the ASCII-normalized form.
        let suffix = lower.rsplit('\'').next().unwrap_or("");
        let is_nt = suffix == "t" && word[..pos].to_lowercase().ends_with('n') && pos > 1;
        if is_nt {
            let cut = start + pos - 1;
            push(tokens, text, start, cut, TokenKind::Word);
            push(tokens, text, cut, end, TokenKind::Word);
            return;
        }
        if CLITICS.iter().any(|c| &c[1..] == suffix) && pos > 0 {
            let cut = start + pos;
            push(tokens, text, start, cut, TokenKind::Word);
            push(tokens, text, cut, end, TokenKind::Word);
            return;
        }
    }
    push(tokens, text, start, end, TokenKind::Word);
}
