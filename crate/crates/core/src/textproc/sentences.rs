/// Lowercased abbreviations (without the final period) that never end a sentence.
pub const ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "mt", "vs", "etc", "e.g", "i.e", "no",
    "vol", "ch", "pp", "fig", "gen", "col", "capt", "lt", "sgt", "rev", "hon", "ave",
];

/// Splits on `.`, `!` or `?` (possibly repeated) followed by whitespace and an
/// uppercase letter, unless the period closes a known abbreviation.
pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut sentences = Vec::new();
    let mut begin = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        let (_, c) = chars[i];
        if !matches!(c, '.' | '!' | '?') {
            i += 1;
            continue;
        }
        let first_terminal = i;
        while i < chars.len() && matches!(chars[i].1, '.' | '!' | '?' | '"' | '\'' | ')') {
            i += 1;
        }
        let end_byte = chars.get(i).map(|&(b, _)| b).unwrap_or(text.len());
        let mut j = i;
        while j < chars.len() && chars[j].1.is_whitespace() {
            j += 1;
        }
        let boundary = j > i && j < chars.len() && chars[j].1.is_uppercase();
        if boundary && !closes_abbreviation(text, &chars, first_terminal) {
            push_trimmed(&mut sentences, &text[begin..end_byte]);
            begin = chars[j].0;
        }
    }
    push_trimmed(&mut sentences, &text[begin..]);
    sentences
}

fn closes_abbreviation(text: &str, chars: &[(usize, char)], terminal: usize) -> bool {
    if chars[terminal].1 != '.' {
        return false;
    }
    let end = chars[terminal].0;
    let mut k = terminal;
    while k > 0 && !chars[k - 1].1.is_whitespace() {
        k -= 1;
    }
    let word = text[chars[k].0..end]
        .trim_start_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase();
    ABBREVIATIONS.contains(&word.as_str())
}

fn push_trimmed(out: &mut Vec<String>, piece: &str) {
    let piece = piece.trim();
    if !piece.is_empty() {
        out.push(piece.to_string());
    }
}
