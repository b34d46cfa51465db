use serde::{Deserialize, Serialize};

/// 26 lowercase letters, 10 digits and space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharAlphabet {
    symbols: Vec<char>,
    /// Drop word boundaries too, keeping only letters and digits.
    pub strict: bool,
}

impl Default for CharAlphabet {
    fn default() -> Self {
        Self::new(false)
    }
}

impl CharAlphabet {
    pub fn new(strict: bool) -> Self {
        let mut symbols: Vec<char> = ('a'..='z').collect();
        symbols.extend('0'..='9');
        symbols.push(' ');
        CharAlphabet { symbols, strict }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbol(&self, index: usize) -> Option<char> {
        self.symbols.get(index).copied()
    }

    pub fn index(&self, c: char) -> Option<usize> {
        match c {
            'a'..='z' => Some(c as usize - 'a' as usize),
            '0'..='9' => Some(26 + c as usize - '0' as usize),
            ' ' => Some(36),
            _ => None,
        }
    }

    /// ASCII letters are lowercased and kept with digits. Other letters and
    /// digits (accented, non-Latin) are dropped without a trace. Any other
    /// run of characters becomes one space, trimmed at both ends; in strict
    /// mode those runs vanish as well.
    pub fn normalize(&self, text: &str) -> String {
        let mut out = String::with_capacity(text.len());
        let mut pending_space = false;
        for c in text.chars() {
            if c.is_ascii_alphanumeric() {
                if pending_space && !out.is_empty() {
                    out.push(' ');
                }
                pending_space = false;
                out.push(c.to_ascii_lowercase());
            } else if c.is_alphanumeric() {
                continue;
            } else if !self.strict {
                pending_space = true;
            }
        }
        out
    }

    /// Symbol indices of the normalized text, cut to `max_len` characters.
    /// An empty result becomes a single `None` step (an all-zero input).
    pub fn encode_indices(&self, text: &str, max_len: usize) -> Vec<Option<usize>> {
        let seq: Vec<Option<usize>> = self
            .normalize(text)
            .chars()
            .take(max_len)
            .map(|c| self.index(c))
            .collect();
        if seq.is_empty() {
            vec![None]
        } else {
            seq
        }
    }
}

/// One-hot rows for `text`; the empty sequence is one all-zero row.
pub fn encode_chars(text: &str, alphabet: &CharAlphabet) -> Vec<Vec<f64>> {
    alphabet
        .encode_indices(text, usize::MAX)
        .into_iter()
        .map(|i| {
            let mut v = vec![0.0; alphabet.len()];
            if let Some(i) = i {
                v[i] = 1.0;
            }
            v
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bijective() {
        let a = CharAlphabet::default();
        assert_eq!(a.len(), 37);
        for i in 0..a.len() {
            assert_eq!(a.index(a.symbol(i).unwrap()), Some(i));
        }
    }

    #[test]
    fn one_hot() {
        let a = CharAlphabet::default();
        let e = encode_chars("ab1", &a);
        assert_eq!(e.len(), 3);
        assert_eq!(e[0][0], 1.0);
        assert_eq!(e[1][1], 1.0);
        assert_eq!(e[2][27], 1.0);
        assert!(e.iter().all(|r| r.iter().sum::<f64>() == 1.0));
    }

    #[test]
    fn normalization() {
        let a = CharAlphabet::default();
        assert_eq!(a.normalize("A,b"), "a b");
        assert_eq!(a.normalize("  Hi --  there!! "), "hi there");
        assert_eq!(a.normalize("café au lait"), "caf au lait");
        assert_eq!(CharAlphabet::new(true).normalize("A,b c"), "abc");
    }

    #[test]
    fn sentinel() {
        let a = CharAlphabet::default();
        assert_eq!(a.encode_indices("!!!", 2000), vec![None]);
        let e = encode_chars("!!!", &a);
        assert_eq!(e.len(), 1);
        assert!(e[0].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn truncation() {
        let a = CharAlphabet::default();
        assert_eq!(a.encode_indices(&"ab".repeat(50), 7).len(), 7);
    }

    proptest! {
        #[test]
        fn case_and_foreign_symbols_do_not_matter(s in "[a-z0-9 ]{0,30}") {
            let a = CharAlphabet::default();
            let noisy: String = s.chars().map(|c| if c == ' ' { " ;- ".to_string() } else { c.to_ascii_uppercase().to_string() + "é" }).collect();
            prop_assert_eq!(a.encode_indices(&noisy, 2000), a.encode_indices(&s.split_whitespace().collect::<Vec<_>>().join(" "), 2000));
        }
    }
}
