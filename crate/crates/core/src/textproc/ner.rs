//! Gazetteer named-entity recognition with a capitalization fallback.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{tokenize, TextprocError, Token};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EntityCategory {
    #[serde(rename = "PERSON")]
    Person,
    #[serde(rename = "LOCATION")]
    Location,
    #[serde(rename = "ORGANIZATION")]
    Organization,
}

impl EntityCategory {
    pub const ALL: [EntityCategory; 3] = [
        EntityCategory::Person,
        EntityCategory::Location,
        EntityCategory::Organization,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityCategory::Person => "PERSON",
            EntityCategory::Location => "LOCATION",
            EntityCategory::Organization => "ORGANIZATION",
        }
    }
}

impl fmt::Display for EntityCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntityCategory {
    type Err = TextprocError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "PERSON" | "PER" => Ok(EntityCategory::Person),
            "LOCATION" | "LOC" => Ok(EntityCategory::Location),
            "ORGANIZATION" | "ORG" => Ok(EntityCategory::Organization),
            _ => Err(TextprocError::UnknownEntityCategory(s.to_string())),
        }
    }
}

/// Token span `[start, end)` tagged with an entity category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    pub category: EntityCategory,
}

/// Checks that spans are in range, non-empty, sorted and non-overlapping.
pub fn validate_spans(spans: &[EntitySpan], n_tokens: usize) -> Result<(), String> {
    let mut prev_end = 0;
    for (i, s) in spans.iter().enumerate() {
        if s.start >= s.end || s.end > n_tokens {
            return Err(format!(
                "entity span {i} [{}, {}) invalid for {n_tokens} tokens",
                s.start, s.end
            ));
        }
        if i > 0 && s.start < prev_end {
            return Err(format!("entity span {i} overlaps or is out of order"));
        }
        prev_end = s.end;
    }
    Ok(())
}

/// Phrase -> category table matched case-insensitively over token sequences.
#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    entries: HashMap<Vec<String>, EntityCategory>,
    max_len: usize,
}

impl Gazetteer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, phrase: &str, category: EntityCategory) {
        let key: Vec<String> = tokenize(phrase).iter().map(Token::lower).collect();
        if key.is_empty() {
            return;
        }
        self.max_len = self.max_len.max(key.len());
        self.entries.insert(key, category);
    }

    /// Parses `phrase<TAB>category` lines; `#` starts a comment line.
    pub fn from_tsv(text: &str) -> Result<Self, TextprocError> {
        let mut g = Gazetteer::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (phrase, cat) = line.split_once('\t').ok_or_else(|| {
                TextprocError::MalformedGazetteer {
                    line: lineno + 1,
                    content: line.to_string(),
                }
            })?;
            g.insert(phrase, cat.parse()?);
        }
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn longest_match(&self, lowered: &[String], at: usize) -> Option<(usize, EntityCategory)> {
        let max = self.max_len.min(lowered.len() - at);
        (1..=max)
            .rev()
            .find_map(|len| self.entries.get(&lowered[at..at + len]).map(|&c| (len, c)))
    }
}

fn is_capitalized_word(tok: &Token) -> bool {
    tok.is_word() && tok.text != "I" && tok.text.chars().next().is_some_and(char::is_uppercase)
}

fn sentence_initial(tokens: &[Token], i: usize) -> bool {
    i == 0 || matches!(tokens[i - 1].text.as_str(), "." | "!" | "?")
}

/// Longest gazetteer match wins; leftover capitalized runs that do not start
/// a sentence are tagged PERSON. Spans come out sorted and disjoint.
pub fn recognize_entities(tokens: &[Token], gazetteer: &Gazetteer) -> Vec<EntitySpan> {
    let lowered: Vec<String> = tokens.iter().map(Token::lower).collect();
    let mut spans = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        if let Some((len, category)) = gazetteer.longest_match(&lowered, i) {
            spans.push(EntitySpan {
                start: i,
                end: i + len,
                category,
            });
            i += len;
            continue;
        }
        if is_capitalized_word(&tokens[i]) && !sentence_initial(tokens, i) {
            let start = i;
            i += 1;
            while i < tokens.len()
                && is_capitalized_word(&tokens[i])
                && gazetteer.longest_match(&lowered, i).is_none()
            {
                i += 1;
            }
            spans.push(EntitySpan {
                start,
                end: i,
                category: EntityCategory::Person,
            });
            continue;
        }
        i += 1;
    }
    spans
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaz(entries: &[(&str, EntityCategory)]) -> Gazetteer {
        let mut g = Gazetteer::new();
        for (p, c) in entries {
            g.insert(p, *c);
        }
        g
    }

    #[test]
    fn single_gazetteer_hit() {
        let g = gaz(&[("Willy", EntityCategory::Person)]);
        let spans = recognize_entities(&tokenize("Willy"), &g);
        assert_eq!(
            spans,
            vec![EntitySpan { start: 0, end: 1, category: EntityCategory::Person }]
        );
    }

    #[test]
    fn lowercase_turn_has_no_entities() {
        let spans = recognize_entities(&tokenize("i think it was fine"), &Gazetteer::new());
        assert!(spans.is_empty());
    }

    #[test]
    fn longest_match_beats_prefix() {
        let g = gaz(&[("New", EntityCategory::Organization), ("New York", EntityCategory::Location)]);
        let spans = recognize_entities(&tokenize("they went to New York"), &g);
        assert_eq!(
            spans,
            vec![EntitySpan { start: 3, end: 5, category: EntityCategory::Location }]
        );
    }

    #[test]
    fn capitalized_run_becomes_person() {
        let spans = recognize_entities(&tokenize("Then I saw Linda Loman there. Happy left."), &Gazetteer::new());
        assert_eq!(
            spans,
            vec![EntitySpan { start: 3, end: 5, category: EntityCategory::Person }]
        );
    }

    #[test]
    fn tsv_parsing() {
        let g = Gazetteer::from_tsv("# names\nGull Island\tLOCATION\nReed\tPERSON\n").unwrap();
        assert_eq!(g.len(), 2);
        assert!(Gazetteer::from_tsv("nocategory").is_err());
        assert!(Gazetteer::from_tsv("x\tANIMAL").is_err());
    }

    #[test]
    fn span_validation() {
        let ok = [EntitySpan { start: 0, end: 1, category: EntityCategory::Person }];
        assert!(validate_spans(&ok, 1).is_ok());
        assert!(validate_spans(&ok, 0).is_err());
        let overlap = [
            EntitySpan { start: 0, end: 2, category: EntityCategory::Person },
            EntitySpan { start: 1, end: 3, category: EntityCategory::Location },
        ];
        assert!(validate_spans(&overlap, 3).is_err());
    }
}
