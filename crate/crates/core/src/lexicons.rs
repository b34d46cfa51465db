//! Word lists and lookup tables used by the feature extractors.
//!
//! Each table lives in its own tab-separated file inside a lexicon
//! directory:
//!
//! | file               | columns                                              |
//! |--------------------|------------------------------------------------------|
//! | `stopwords.tsv`    | word                                                 |
//! | `connectives.tsv`  | phrase                                               |
//! | `subjectivity.tsv` | word, `strong`/`weak`, `positive`/`negative`/`neutral` |
//! | `norms.tsv`        | word, familiarity, imageability                      |
//! | `pronouns.tsv`     | phrase, person, number, category...                  |
//! | `deictic.tsv`      | word                                                 |
//! | `idf.tsv`          | `#N=<docs>` header, then word, idf                   |
//! | `embeddings.tsv`   | word, d floats                                       |
//!
//! Every lookup is total: unknown words resolve to a documented default.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_EMBEDDING_DIM: usize = 100;

pub const TABLE_FILES: [&str; 8] = [
    "stopwords.tsv",
    "connectives.tsv",
    "subjectivity.tsv",
    "norms.tsv",
    "pronouns.tsv",
    "deictic.tsv",
    "idf.tsv",
    "embeddings.tsv",
];

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("missing lexicon file {0}")]
    MissingFile(PathBuf),
    #[error("{file}:{line}: {message}")]
    Malformed {
        file: String,
        line: usize,
        message: String,
    },
    #[error("embeddings.tsv:{line}: expected dimension {expected}, found {found}")]
    InconsistentDimension {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("cannot build an idf table from zero documents")]
    NoDocuments,
}

fn malformed(file: &str, line: usize, message: impl Into<String>) -> LexiconError {
    LexiconError::Malformed {
        file: file.to_string(),
        line,
        message: message.into(),
    }
}

/// What to do when a table file is absent from the lexicon directory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MissingPolicy {
    #[default]
    Error,
    /// Log a warning and use an empty table.
    Warn,
}

/// Lowercased multi-token phrases matched longest-first.
#[derive(Debug, Clone, PartialEq)]
pub struct PhraseTable<V> {
    entries: HashMap<Vec<String>, V>,
    max_len: usize,
}

impl<V> Default for PhraseTable<V> {
    fn default() -> Self {
        Self::new()
    }
}

impl<V> PhraseTable<V> {
    pub fn new() -> Self {
        PhraseTable {
            entries: HashMap::new(),
            max_len: 0,
        }
    }

    pub fn insert(&mut self, phrase: &str, value: V) {
        let key: Vec<String> = phrase.split_whitespace().map(str::to_lowercase).collect();
        if key.is_empty() {
            return;
        }
        self.max_len = self.max_len.max(key.len());
        self.entries.insert(key, value);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, phrase: &[String]) -> Option<&V> {
        self.entries.get(phrase)
    }

    /// Greedy left-to-right longest matches over already-lowercased tokens.
    /// Returns `(start, len, value)` for each non-overlapping hit.
    pub fn find_all<'a>(&'a self, lowered: &[String]) -> Vec<(usize, usize, &'a V)> {
        let mut hits = Vec::new();
        let mut i = 0;
        while i < lowered.len() {
            let max = self.max_len.min(lowered.len() - i);
            let found = (1..=max)
                .rev()
                .find_map(|len| self.entries.get(&lowered[i..i + len]).map(|v| (len, v)));
            match found {
                Some((len, v)) => {
                    hits.push((i, len, v));
                    i += len;
                }
                None => i += 1,
            }
        }
        hits
    }

    fn sorted(&self) -> Vec<(String, &V)> {
        let mut out: Vec<(String, &V)> =
            self.entries.iter().map(|(k, v)| (k.join(" "), v)).collect();
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strength {
    Strong,
    Weak,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubjectivityEntry {
    pub strength: Strength,
    pub polarity: Option<Polarity>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norm {
    pub familiarity: f64,
    pub imageability: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GrammaticalNumber {
    Singular,
    Plural,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PronounCategory {
    Personal,
    Possessive,
    Reflexive,
    Reciprocal,
    Relative,
    Demonstrative,
    Interrogative,
    Indefinite,
}

impl PronounCategory {
    pub const ALL: [PronounCategory; 8] = [
        PronounCategory::Personal,
        PronounCategory::Possessive,
        PronounCategory::Reflexive,
        PronounCategory::Reciprocal,
        PronounCategory::Relative,
        PronounCategory::Demonstrative,
        PronounCategory::Interrogative,
        PronounCategory::Indefinite,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PronounCategory::Personal => "personal",
            PronounCategory::Possessive => "possessive",
            PronounCategory::Reflexive => "reflexive",
            PronounCategory::Reciprocal => "reciprocal",
            PronounCategory::Relative => "relative",
            PronounCategory::Demonstrative => "demonstrative",
            PronounCategory::Interrogative => "interrogative",
            PronounCategory::Indefinite => "indefinite",
        }
    }
}

impl FromStr for PronounCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PronounCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == s.trim().to_lowercase())
            .ok_or_else(|| format!("unknown pronoun category {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PronounEntry {
    /// 1, 2 or 3.
    pub person: u8,
    pub number: Option<GrammaticalNumber>,
    pub categories: BTreeSet<PronounCategory>,
}

/// Inverse document frequencies, `ln(N / df)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IdfTable {
    values: HashMap<String, f64>,
    n_docs: usize,
}

impl IdfTable {
    pub fn new(values: HashMap<String, f64>, n_docs: usize) -> Self {
        IdfTable { values, n_docs }
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Unseen words get `ln(N / 1)`; an empty table (N = 0) yields 0.
    pub fn lookup(&self, word: &str) -> f64 {
        match self.values.get(word) {
            Some(&v) => v,
            None if self.n_docs > 0 => (self.n_docs as f64).ln(),
            None => 0.0,
        }
    }

    pub fn contains(&self, word: &str) -> bool {
        self.values.contains_key(word)
    }
}

/// Builds `ln(N / df)` over lowercased document types.
pub fn build_idf_table<S: AsRef<str>>(documents: &[Vec<S>]) -> Result<IdfTable, LexiconError> {
    if documents.is_empty() {
        return Err(LexiconError::NoDocuments);
    }
    let mut df: HashMap<String, usize> = HashMap::new();
    for doc in documents {
        let types: HashSet<String> = doc.iter().map(|w| w.as_ref().to_lowercase()).collect();
        for t in types {
            *df.entry(t).or_default() += 1;
        }
    }
    let n = documents.len() as f64;
    let values = df
        .into_iter()
        .map(|(w, d)| (w, (n / d as f64).ln()))
        .collect();
    Ok(IdfTable::new(values, documents.len()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl Default for Embeddings {
    fn default() -> Self {
        Embeddings {
            dim: DEFAULT_EMBEDDING_DIM,
            vectors: HashMap::new(),
        }
    }
}

impl Embeddings {
    /// All vectors must share one length.
    pub fn new(dim: usize, vectors: HashMap<String, Vec<f64>>) -> Result<Self, LexiconError> {
        for v in vectors.values() {
            if v.len() != dim {
                return Err(LexiconError::InconsistentDimension {
                    line: 0,
                    expected: dim,
                    found: v.len(),
                });
            }
        }
        Ok(Embeddings { dim, vectors })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Exact match first, then the lowercased form.
    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors
            .get(word)
            .or_else(|| self.vectors.get(&word.to_lowercase()))
            .map(Vec::as_slice)
    }
}

/// All lexical resources, immutable after loading.
#[derive(Debug, Clone, Default)]
pub struct LexiconBundle {
    pub stopwords: HashSet<String>,
    pub connectives: PhraseTable<()>,
    pub subjectivity: HashMap<String, SubjectivityEntry>,
    pub norms: HashMap<String, Norm>,
    pub pronouns: PhraseTable<PronounEntry>,
    pub deictic: HashSet<String>,
    pub idf: IdfTable,
    pub embeddings: Embeddings,
}

mod packaged {
    pub const STOPWORDS: &str = include_str!("../data/lexicons/stopwords.tsv");
    pub const CONNECTIVES: &str = include_str!("../data/lexicons/connectives.tsv");
    pub const SUBJECTIVITY: &str = include_str!("../data/lexicons/subjectivity.tsv");
    pub const NORMS: &str = include_str!("../data/lexicons/norms.tsv");
    pub const PRONOUNS: &str = include_str!("../data/lexicons/pronouns.tsv");
    pub const DEICTIC: &str = include_str!("../data/lexicons/deictic.tsv");
}

impl LexiconBundle {
    /// Tables shipped with the crate. Subjectivity and norms are small
    /// fixtures; there is no idf table and no embedding table.
    pub fn packaged() -> Self {
        let mut b = LexiconBundle::default();
        b.parse_table("stopwords.tsv", packaged::STOPWORDS)
            .and_then(|_| b.parse_table("connectives.tsv", packaged::CONNECTIVES))
            .and_then(|_| b.parse_table("subjectivity.tsv", packaged::SUBJECTIVITY))
            .and_then(|_| b.parse_table("norms.tsv", packaged::NORMS))
            .and_then(|_| b.parse_table("pronouns.tsv", packaged::PRONOUNS))
            .and_then(|_| b.parse_table("deictic.tsv", packaged::DEICTIC))
            .expect("packaged lexicons are well-formed");
        b
    }

    pub fn load(dir: &Path, missing: MissingPolicy) -> Result<Self, LexiconError> {
        let mut bundle = LexiconBundle::default();
        for name in TABLE_FILES {
            let path = dir.join(name);
            if !path.exists() {
                match missing {
                    MissingPolicy::Error => return Err(LexiconError::MissingFile(path)),
                    MissingPolicy::Warn => {
                        log::warn!("{} not found, using an empty table", path.display());
                        continue;
                    }
                }
            }
            let text = fs::read_to_string(&path).map_err(|source| LexiconError::Io {
                path: path.clone(),
                source,
            })?;
            bundle.parse_table(name, &text)?;
        }
        Ok(bundle)
    }

    fn parse_table(&mut self, name: &str, text: &str) -> Result<(), LexiconError> {
        let rows = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
            .filter(|(_, l)| !l.trim().is_empty());
        match name {
            "stopwords.tsv" => {
                self.stopwords = rows.map(|(_, l)| l.trim().to_lowercase()).collect();
            }
            "deictic.tsv" => {
                self.deictic = rows.map(|(_, l)| l.trim().to_lowercase()).collect();
            }
            "connectives.tsv" => {
                let mut table = PhraseTable::new();
                for (_, l) in rows {
                    table.insert(l, ());
                }
                self.connectives = table;
            }
            "subjectivity.tsv" => {
                let mut table = HashMap::new();
                for (line, l) in rows {
                    let cols: Vec<&str> = l.split('\t').map(str::trim).collect();
                    if cols.len() < 3 {
                        return Err(malformed(name, line, "expected word, strength, polarity"));
                    }
                    let strength = match cols[1] {
                        "strong" => Strength::Strong,
                        "weak" => Strength::Weak,
                        other => return Err(malformed(name, line, format!("bad strength {other:?}"))),
                    };
                    let polarity = match cols[2] {
                        "positive" => Some(Polarity::Positive),
                        "negative" => Some(Polarity::Negative),
                        "neutral" | "both" => None,
                        other => return Err(malformed(name, line, format!("bad polarity {other:?}"))),
                    };
                    table.insert(cols[0].to_lowercase(), SubjectivityEntry { strength, polarity });
                }
                self.subjectivity = table;
            }
            "norms.tsv" => {
                let mut table = HashMap::new();
                for (line, l) in rows {
                    let cols: Vec<&str> = l.split('\t').map(str::trim).collect();
                    if cols.len() < 3 {
                        return Err(malformed(name, line, "expected word, familiarity, imageability"));
                    }
                    let num = |s: &str| {
                        s.parse::<f64>()
                            .ok()
                            .filter(|v| v.is_finite())
                            .ok_or_else(|| malformed(name, line, format!("non-numeric norm value {s:?}")))
                    };
                    table.insert(
                        cols[0].to_lowercase(),
                        Norm {
                            familiarity: num(cols[1])?,
                            imageability: num(cols[2])?,
                        },
                    );
                }
                self.norms = table;
            }
            "pronouns.tsv" => {
                let mut table = PhraseTable::new();
                for (line, l) in rows {
                    let cols: Vec<&str> = l.split('\t').map(str::trim).collect();
                    if cols.len() < 4 {
                        return Err(malformed(name, line, "expected phrase, person, number, category+"));
                    }
                    let person = match cols[1] {
                        "1" => 1,
                        "2" => 2,
                        "3" => 3,
                        other => return Err(malformed(name, line, format!("bad person {other:?}"))),
                    };
                    let number = match cols[2] {
                        "sg" => Some(GrammaticalNumber::Singular),
                        "pl" => Some(GrammaticalNumber::Plural),
                        "n/a" | "-" => None,
                        other => return Err(malformed(name, line, format!("bad number {other:?}"))),
                    };
                    let categories = cols[3..]
                        .iter()
                        .filter(|c| !c.is_empty())
                        .map(|c| c.parse().map_err(|e: String| malformed(name, line, e)))
                        .collect::<Result<BTreeSet<_>, _>>()?;
                    if categories.is_empty() {
                        return Err(malformed(name, line, "pronoun needs at least one category"));
                    }
                    table.insert(cols[0], PronounEntry { person, number, categories });
                }
                self.pronouns = table;
            }
            "idf.tsv" => self.idf = parse_idf(text)?,
            "embeddings.tsv" => self.embeddings = parse_embeddings(text)?,
            _ => unreachable!("unknown table {name}"),
        }
        Ok(())
    }

    pub fn is_stopword(&self, lowered: &str) -> bool {
        self.stopwords.contains(lowered)
    }

    /// Writes every table in canonical (sorted) order.
    pub fn write_dir(&self, dir: &Path) -> Result<(), LexiconError> {
        let io_err = |path: &Path| {
            let path = path.to_path_buf();
            move |source| LexiconError::Io { path, source }
        };
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        for name in TABLE_FILES {
            let path = dir.join(name);
            fs::write(&path, self.render_table(name)).map_err(io_err(&path))?;
        }
        Ok(())
    }

    fn render_table(&self, name: &str) -> String {
        let mut out = String::new();
        let sorted_set = |s: &HashSet<String>| s.iter().cloned().collect::<BTreeSet<_>>();
        match name {
            "stopwords.tsv" => sorted_set(&self.stopwords).iter().for_each(|w| {
                let _ = writeln!(out, "{w}");
            }),
            "deictic.tsv" => sorted_set(&self.deictic).iter().for_each(|w| {
                let _ = writeln!(out, "{w}");
            }),
            "connectives.tsv" => self.connectives.sorted().iter().for_each(|(p, _)| {
                let _ = writeln!(out, "{p}");
            }),
            "subjectivity.tsv" => {
                let sorted: BTreeMap<_, _> = self.subjectivity.iter().collect();
                for (w, e) in sorted {
                    let strength = match e.strength {
                        Strength::Strong => "strong",
                        Strength::Weak => "weak",
                    };
                    let polarity = match e.polarity {
                        Some(Polarity::Positive) => "positive",
                        Some(Polarity::Negative) => "negative",
                        None => "neutral",
                    };
                    let _ = writeln!(out, "{w}\t{strength}\t{polarity}");
                }
            }
            "norms.tsv" => {
                let sorted: BTreeMap<_, _> = self.norms.iter().collect();
                for (w, n) in sorted {
                    let _ = writeln!(out, "{w}\t{}\t{}", n.familiarity, n.imageability);
                }
            }
            "pronouns.tsv" => {
                for (p, e) in self.pronouns.sorted() {
                    let number = match e.number {
                        Some(GrammaticalNumber::Singular) => "sg",
                        Some(GrammaticalNumber::Plural) => "pl",
                        None => "n/a",
                    };
                    let cats: Vec<&str> = e.categories.iter().map(|c| c.as_str()).collect();
                    let _ = writeln!(out, "{p}\t{}\t{number}\t{}", e.person, cats.join("\t"));
                }
            }
            "idf.tsv" => {
                let _ = writeln!(out, "#N={}", self.idf.n_docs);
                let sorted: BTreeMap<_, _> = self.idf.values.iter().collect();
                for (w, v) in sorted {
                    let _ = writeln!(out, "{w}\t{v}");
                }
            }
            "embeddings.tsv" => {
                let sorted: BTreeMap<_, _> = self.embeddings.vectors.iter().collect();
                for (w, v) in sorted {
                    out.push_str(w);
                    for x in v {
                        let _ = write!(out, "\t{x}");
                    }
                    out.push('\n');
                }
            }
            _ => unreachable!(),
        }
        out
    }
}

fn parse_idf(text: &str) -> Result<IdfTable, LexiconError> {
    const FILE: &str = "idf.tsv";
    let mut n_docs = None;
    let mut values = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(n) = line.strip_prefix("#N=") {
            let n = n
                .trim()
                .parse::<usize>()
                .map_err(|_| malformed(FILE, i + 1, format!("bad corpus size {n:?}")))?;
            n_docs = Some(n);
            continue;
        }
        let (w, v) = line
            .split_once('\t')
            .ok_or_else(|| malformed(FILE, i + 1, "expected word<TAB>idf"))?;
        let v: f64 = v
            .trim()
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite() && *v >= 0.0)
            .ok_or_else(|| malformed(FILE, i + 1, format!("idf must be a number >= 0, found {v:?}")))?;
        values.insert(w.trim().to_lowercase(), v);
    }
    let n_docs = match n_docs {
        Some(n) => n,
        None if values.is_empty() => 0,
        None => return Err(malformed(FILE, 1, "missing #N=<corpus size> header")),
    };
    Ok(IdfTable::new(values, n_docs))
}

fn parse_embeddings(text: &str) -> Result<Embeddings, LexiconError> {
    let mut dim = None;
    let mut vectors = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let mut cols = line.split_whitespace();
        let Some(word) = cols.next() else { continue };
        let v = cols
            .map(|c| c.parse::<f64>().ok().filter(|x| x.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| malformed("embeddings.tsv", i + 1, "non-numeric vector component"))?;
        match dim {
            None => dim = Some(v.len()),
            Some(d) if d != v.len() => {
                return Err(LexiconError::InconsistentDimension {
                    line: i + 1,
                    expected: d,
                    found: v.len(),
                })
            }
            _ => {}
        }
        vectors.insert(word.to_string(), v);
    }
    Embeddings::new(dim.unwrap_or(DEFAULT_EMBEDDING_DIM), vectors)
}
