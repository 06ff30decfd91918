//! Emotion lexicons: loading via sidecar descriptors, per-word lookup, and
//! tweet-level mean vectors.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LexiconKind {
    #[serde(rename = "VAD")]
    Vad,
    #[serde(rename = "EMOLEX")]
    Emolex,
    #[serde(rename = "AI")]
    Ai,
    #[serde(rename = "ANEW")]
    Anew,
    Warriner,
    Combined,
}

impl LexiconKind {
    /// The five base lexicons in concatenation order.
    pub const BASE: [LexiconKind; 5] = [
        LexiconKind::Vad,
        LexiconKind::Emolex,
        LexiconKind::Ai,
        LexiconKind::Anew,
        LexiconKind::Warriner,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LexiconKind::Vad => "VAD",
            LexiconKind::Emolex => "EMOLEX",
            LexiconKind::Ai => "AI",
            LexiconKind::Anew => "ANEW",
            LexiconKind::Warriner => "Warriner",
            LexiconKind::Combined => "Combined",
        }
    }

    pub fn width(self) -> usize {
        match self {
            LexiconKind::Vad => 3,
            LexiconKind::Emolex => 10,
            LexiconKind::Ai => 4,
            LexiconKind::Anew => 6,
            LexiconKind::Warriner => 63,
            LexiconKind::Combined => LexiconKind::BASE.iter().map(|k| k.width()).sum(),
        }
    }

    fn base_range(self) -> (f64, f64) {
        match self {
            LexiconKind::Vad | LexiconKind::Emolex | LexiconKind::Ai => (0.0, 1.0),
            LexiconKind::Anew => (0.0, 10.0),
            LexiconKind::Warriner => (0.0, 1000.0),
            LexiconKind::Combined => unreachable!("combined range is per column"),
        }
    }
}

impl fmt::Display for LexiconKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LexiconKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "vad" => Ok(LexiconKind::Vad),
            "emolex" => Ok(LexiconKind::Emolex),
            "ai" => Ok(LexiconKind::Ai),
            "anew" => Ok(LexiconKind::Anew),
            "warriner" => Ok(LexiconKind::Warriner),
            "combined" => Ok(LexiconKind::Combined),
            _ => Err(Error::Validation(format!("unknown lexicon {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LexiconSchema {
    pub kind: LexiconKind,
    pub width: usize,
    /// Inclusive (min, max) per column.
    pub score_range: Vec<(f64, f64)>,
}

impl LexiconSchema {
    pub fn of(kind: LexiconKind) -> Self {
        let score_range = match kind {
            LexiconKind::Combined => LexiconKind::BASE
                .iter()
                .flat_map(|k| std::iter::repeat_n(k.base_range(), k.width()))
                .collect(),
            k => vec![k.base_range(); k.width()],
        };
        LexiconSchema {
            kind,
            width: kind.width(),
            score_range,
        }
    }
}

/// Column layout of a published lexicon file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "layout", rename_all = "lowercase")]
pub enum LexiconLayout {
    /// One row per word, scores in fixed columns.
    Wide { score_columns: Vec<usize> },
    /// One row per (word, category) pair; `categories` fixes vector order
    /// and categories a word lacks score zero.
    Long {
        category_column: usize,
        value_column: usize,
        categories: Vec<String>,
    },
}

/// Sidecar file describing how to read one lexicon distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconDescriptor {
    pub lexicon: LexiconKind,
    /// Data file, relative to the descriptor.
    pub file: PathBuf,
    #[serde(default = "default_delimiter")]
    pub delimiter: String,
    #[serde(default)]
    pub header_lines: usize,
    #[serde(default)]
    pub word_column: usize,
    #[serde(flatten)]
    pub layout: LexiconLayout,
}

fn default_delimiter() -> String {
    "\t".into()
}

impl LexiconDescriptor {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut d: LexiconDescriptor =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if d.file.is_relative() {
            if let Some(parent) = path.parent() {
                d.file = parent.join(&d.file);
            }
        }
        Ok(d)
    }

    fn declared_width(&self) -> usize {
        match &self.layout {
            LexiconLayout::Wide { score_columns } => score_columns.len(),
            LexiconLayout::Long { categories, .. } => categories.len(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Lexicon {
    schema: LexiconSchema,
    entries: HashMap<String, Vec<f64>>,
}

impl Lexicon {
    /// Builds a lexicon from in-memory rows; the first occurrence of a
    /// (lowercased) word wins.
    pub fn from_entries<S: AsRef<str>>(
        kind: LexiconKind,
        rows: impl IntoIterator<Item = (S, Vec<f64>)>,
    ) -> Result<Self> {
        let schema = LexiconSchema::of(kind);
        let mut entries = HashMap::new();
        for (word, scores) in rows {
            check_scores(&schema, &scores).map_err(Error::Validation)?;
            entries
                .entry(word.as_ref().to_lowercase())
                .or_insert(scores);
        }
        if entries.is_empty() {
            return Err(Error::Validation(format!("lexicon {kind} has no entries")));
        }
        Ok(Lexicon { schema, entries })
    }

    pub fn schema(&self) -> &LexiconSchema {
        &self.schema
    }

    pub fn kind(&self) -> LexiconKind {
        self.schema.kind
    }

    pub fn width(&self) -> usize {
        self.schema.width
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Stored vector for the lowercased word, or zeros.
    pub fn word_scores(&self, word: &str) -> Vec<f64> {
        self.lookup(word)
            .map(<[f64]>::to_vec)
            .unwrap_or_else(|| vec![0.0; self.width()])
    }

    fn lookup(&self, word: &str) -> Option<&[f64]> {
        match self.entries.get(word) {
            Some(v) => Some(v),
            None => self.entries.get(&word.to_lowercase()).map(Vec::as_slice),
        }
    }

    /// Mean of [`word_scores`](Self::word_scores) over all tokens; words not
    /// in the lexicon count as zeros. Empty input gives the zero vector.
    pub fn tweet_vector<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<f64> {
        let mut sum = vec![0.0; self.width()];
        if tokens.is_empty() {
            return sum;
        }
        for tok in tokens {
            if let Some(v) = self.lookup(tok.as_ref()) {
                for (s, x) in sum.iter_mut().zip(v) {
                    *s += x;
                }
            }
        }
        let n = tokens.len() as f64;
        sum.iter_mut().for_each(|s| *s /= n);
        sum
    }
}

fn check_scores(schema: &LexiconSchema, scores: &[f64]) -> std::result::Result<(), String> {
    if scores.len() != schema.width {
        return Err(format!(
            "{} expects {} scores, got {}",
            schema.kind,
            schema.width,
            scores.len()
        ));
    }
    for (i, (&x, &(lo, hi))) in scores.iter().zip(&schema.score_range).enumerate() {
        if !(lo..=hi).contains(&x) {
            return Err(format!(
                "{} score {x} in column {i} outside [{lo}, {hi}]",
                schema.kind
            ));
        }
    }
    Ok(())
}

/// Reads a lexicon file according to its descriptor.
pub fn load_lexicon(path: impl AsRef<Path>, descriptor: &LexiconDescriptor) -> Result<Lexicon> {
    let path = path.as_ref();
    let origin = path.display().to_string();
    let kind = descriptor.lexicon;
    if kind == LexiconKind::Combined {
        return Err(Error::Config(
            "the combined lexicon is built from the five base lexicons, not loaded".into(),
        ));
    }
    let schema = LexiconSchema::of(kind);
    if descriptor.declared_width() != schema.width {
        return Err(Error::Validation(format!(
            "{origin}: descriptor declares {} columns but {kind} has width {}",
            descriptor.declared_width(),
            schema.width
        )));
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let content = String::from_utf8_lossy(&bytes);
    let delim = descriptor.delimiter.as_str();

    let mut entries: HashMap<String, Vec<f64>> = HashMap::new();
    // long layout: per word, which categories were already filled
    let mut filled: HashMap<String, Vec<bool>> = HashMap::new();

    for (idx, raw) in content.lines().enumerate().skip(descriptor.header_lines) {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = if delim == " " {
            line.split_whitespace().collect()
        } else {
            line.split(delim).collect()
        };
        let field = |i: usize| -> Result<&str> {
            cols.get(i).map(|s| s.trim()).ok_or_else(|| {
                Error::parse(
                    &origin,
                    line_no,
                    format!("missing column {i} ({} present)", cols.len()),
                )
            })
        };
        let number = |i: usize| -> Result<f64> {
            let s = field(i)?;
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(&origin, line_no, format!("non-numeric score {s:?}")))
        };
        let word = field(descriptor.word_column)?.to_lowercase();
        if word.is_empty() {
            return Err(Error::parse(&origin, line_no, "empty word"));
        }
        match &descriptor.layout {
            LexiconLayout::Wide { score_columns } => {
                let scores = score_columns
                    .iter()
                    .map(|&c| number(c))
                    .collect::<Result<Vec<_>>>()?;
                check_scores(&schema, &scores).map_err(|m| Error::parse(&origin, line_no, m))?;
                entries.entry(word).or_insert(scores);
            }
            LexiconLayout::Long {
                category_column,
                value_column,
                categories,
            } => {
                let cat = field(*category_column)?;
                let pos = categories
                    .iter()
                    .position(|c| c.eq_ignore_ascii_case(cat))
                    .ok_or_else(|| {
                        Error::parse(&origin, line_no, format!("unknown category {cat:?}"))
                    })?;
                let value = number(*value_column)?;
                let (lo, hi) = schema.score_range[pos];
                if !(lo..=hi).contains(&value) {
                    return Err(Error::parse(
                        &origin,
                        line_no,
                        format!("score {value} outside [{lo}, {hi}]"),
                    ));
                }
                let flags = filled
                    .entry(word.clone())
                    .or_insert_with(|| vec![false; schema.width]);
                if !flags[pos] {
                    flags[pos] = true;
                    entries
                        .entry(word)
                        .or_insert_with(|| vec![0.0; schema.width])[pos] = value;
                }
            }
        }
    }
    if entries.is_empty() {
        return Err(Error::parse(
            &origin,
            descriptor.header_lines + 1,
            "lexicon has no entries",
        ));
    }
    Ok(Lexicon { schema, entries })
}

/// Loads the descriptor at `path` and the data file it names.
pub fn load_described(path: impl AsRef<Path>) -> Result<Lexicon> {
    let d = LexiconDescriptor::load(path)?;
    load_lexicon(&d.file, &d)
}

/// Concatenates the five base lexicons' tweet vectors in canonical order.
pub fn combined_vector<S: AsRef<str>>(lexicons: &[&Lexicon], tokens: &[S]) -> Result<Vec<f64>> {
    let kinds: Vec<LexiconKind> = lexicons.iter().map(|l| l.kind()).collect();
    if kinds != LexiconKind::BASE {
        return Err(Error::Validation(format!(
            "combined vector needs VAD, EMOLEX, AI, ANEW, Warriner in that order, got {kinds:?}"
        )));
    }
    let mut out = Vec::with_capacity(LexiconKind::Combined.width());
    for lex in lexicons {
        out.extend(lex.tweet_vector(tokens));
    }
    Ok(out)
}

/// The lexicons available to an experiment, keyed by kind.
#[derive(Debug, Clone, Default)]
pub struct LexiconSet {
    lexicons: HashMap<LexiconKind, Lexicon>,
}

impl LexiconSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, lexicon: Lexicon) {
        self.lexicons.insert(lexicon.kind(), lexicon);
    }

    pub fn get(&self, kind: LexiconKind) -> Option<&Lexicon> {
        self.lexicons.get(&kind)
    }

    pub fn contains(&self, kind: LexiconKind) -> bool {
        match kind {
            LexiconKind::Combined => LexiconKind::BASE
                .iter()
                .all(|k| self.lexicons.contains_key(k)),
            k => self.lexicons.contains_key(&k),
        }
    }

    /// Tweet vector for any lexicon name, including the combined one.
    pub fn tweet_vector<S: AsRef<str>>(&self, kind: LexiconKind, tokens: &[S]) -> Result<Vec<f64>> {
        match kind {
            LexiconKind::Combined => {
                let parts = LexiconKind::BASE
                    .iter()
                    .map(|k| {
                        self.lexicons.get(k).ok_or_else(|| {
                            Error::Lookup(format!("combined vector needs lexicon {k}"))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                combined_vector(&parts, tokens)
            }
            k => self
                .lexicons
                .get(&k)
                .map(|l| l.tweet_vector(tokens))
                .ok_or_else(|| Error::Lookup(format!("lexicon {k} not loaded"))),
        }
    }
}
