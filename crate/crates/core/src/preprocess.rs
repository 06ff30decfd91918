//! Tweet cleaning: general preprocessing, optional stop-word removal, and
//! whitespace tokenization.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CleaningConfig {
    general: bool,
    remove_stopwords: bool,
    lowercase: bool,
}

impl CleaningConfig {
    pub fn new(general: bool, remove_stopwords: bool, lowercase: bool) -> Result<Self> {
        if remove_stopwords && !general {
            return Err(Error::Validation(
                "stop-word removal requires general preprocessing".into(),
            ));
        }
        Ok(CleaningConfig {
            general,
            remove_stopwords,
            lowercase,
        })
    }

    pub fn raw() -> Self {
        CleaningConfig::default()
    }

    pub fn general(&self) -> bool {
        self.general
    }

    pub fn remove_stopwords(&self) -> bool {
        self.remove_stopwords
    }

    pub fn lowercase(&self) -> bool {
        self.lowercase
    }
}

/// The three text versions compared in the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CleaningVariant {
    #[serde(rename = "raw")]
    Raw,
    #[serde(rename = "general")]
    General,
    #[serde(rename = "general+stopwords")]
    GeneralStopwords,
}

impl CleaningVariant {
    pub const ALL: [CleaningVariant; 3] = [
        CleaningVariant::Raw,
        CleaningVariant::General,
        CleaningVariant::GeneralStopwords,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CleaningVariant::Raw => "raw",
            CleaningVariant::General => "general",
            CleaningVariant::GeneralStopwords => "general+stopwords",
        }
    }

    pub fn config(self, lowercase: bool) -> CleaningConfig {
        match self {
            CleaningVariant::Raw => CleaningConfig::raw(),
            CleaningVariant::General => CleaningConfig {
                general: true,
                remove_stopwords: false,
                lowercase,
            },
            CleaningVariant::GeneralStopwords => CleaningConfig {
                general: true,
                remove_stopwords: true,
                lowercase,
            },
        }
    }
}

impl fmt::Display for CleaningVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CleaningVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(CleaningVariant::Raw),
            "general" => Ok(CleaningVariant::General),
            "general+stopwords" => Ok(CleaningVariant::GeneralStopwords),
            other => Err(Error::Validation(format!(
                "unknown cleaning variant {other:?}"
            ))),
        }
    }
}

/// Longest-first string replacement table shared by emoticons and emojis.
#[derive(Debug, Clone, Default)]
struct ReplacementTable {
    // first char -> (key chars, description), longest key first
    by_first: HashMap<char, Vec<(Vec<char>, String)>>,
    len: usize,
}

impl ReplacementTable {
    fn insert(&mut self, key: &str, description: &str) -> bool {
        let chars: Vec<char> = key.chars().collect();
        let Some(&first) = chars.first() else {
            return false;
        };
        let bucket = self.by_first.entry(first).or_default();
        if bucket.iter().any(|(k, _)| *k == chars) {
            return false;
        }
        bucket.push((chars, description.to_string()));
        bucket.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
        self.len += 1;
        true
    }

    /// Replaces every match with ` description `. When `word_boundaries` is
    /// set, a key whose edge character is alphanumeric only matches if the
    /// neighbouring character on that side is not alphanumeric.
    fn replace(&self, text: &str, word_boundaries: bool) -> String {
        if self.len == 0 {
            return text.to_string();
        }
        let chars: Vec<char> = text.chars().collect();
        let mut out = String::with_capacity(text.len());
        let mut i = 0;
        'outer: while i < chars.len() {
            if let Some(candidates) = self.by_first.get(&chars[i]) {
                for (key, desc) in candidates {
                    let end = i + key.len();
                    if end > chars.len() || chars[i..end] != key[..] {
                        continue;
                    }
                    if word_boundaries {
                        let left_ok =
                            !key[0].is_alphanumeric() || i == 0 || !chars[i - 1].is_alphanumeric();
                        let right_ok = !key[key.len() - 1].is_alphanumeric()
                            || end == chars.len()
                            || !chars[end].is_alphanumeric();
                        if !(left_ok && right_ok) {
                            continue;
                        }
                    }
                    out.push(' ');
                    out.push_str(desc);
                    out.push(' ');
                    i = end;
                    continue 'outer;
                }
            }
            out.push(chars[i]);
            i += 1;
        }
        out
    }
}

/// A key survives cleaning only if it has a character that cleaning deletes;
/// otherwise a second pass could match text produced by the first.
fn key_is_replaceable(key: &str) -> bool {
    key.chars()
        .any(|c| !c.is_alphabetic() && !c.is_whitespace())
}

fn read_tsv_pairs(path: &Path) -> Result<Vec<(usize, String, String)>> {
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let Some((key, desc)) = line.split_once('\t') else {
            return Err(Error::parse(
                path.display(),
                idx + 1,
                "expected `key<TAB>description`",
            ));
        };
        rows.push((idx + 1, key.to_string(), desc.trim().to_string()));
    }
    Ok(rows)
}

/// Punctuation/letter emoticons such as `:)` or `:-D`, mapped to descriptions.
#[derive(Debug, Clone, Default)]
pub struct EmoticonTable(ReplacementTable);

impl EmoticonTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds an entry. Letter-only keys (e.g. `XD`) are refused since they are
    /// indistinguishable from words once punctuation is gone; returns whether
    /// the entry was added. The first occurrence of a key wins.
    pub fn insert(&mut self, emoticon: &str, description: &str) -> bool {
        if emoticon.trim().is_empty() || !key_is_replaceable(emoticon) {
            return false;
        }
        self.0.insert(emoticon, description)
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        let mut t = Self::new();
        for (k, v) in pairs {
            t.insert(k, v);
        }
        t
    }

    /// Loads `emoticon<TAB>description` rows.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut t = Self::new();
        for (line, key, desc) in read_tsv_pairs(path)? {
            if !t.insert(&key, &desc) {
                log::warn!("{}:{line}: emoticon {key:?} skipped", path.display());
            }
        }
        Ok(t)
    }

    pub fn len(&self) -> usize {
        self.0.len
    }

    pub fn is_empty(&self) -> bool {
        self.0.len == 0
    }
}

/// Unicode emoji sequences mapped to plain-word descriptions.
#[derive(Debug, Clone, Default)]
pub struct EmojiTable(ReplacementTable);

impl EmojiTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Descriptions are normalized from the `:face_with_tears_of_joy:` style
    /// to `face with tears of joy` and must then hold only letters and spaces.
    pub fn insert(&mut self, emoji: &str, description: &str) -> Result<bool> {
        if emoji.is_empty() || !key_is_replaceable(emoji) {
            return Err(Error::Validation(format!(
                "emoji key {emoji:?} must contain a non-letter symbol"
            )));
        }
        let desc = description
            .trim()
            .trim_matches(':')
            .replace(['_', '-'], " ");
        let desc = desc.split_whitespace().collect::<Vec<_>>().join(" ");
        if desc.is_empty() || !desc.chars().all(|c| c.is_alphabetic() || c == ' ') {
            return Err(Error::Validation(format!(
                "emoji description {description:?} must contain only letters and spaces"
            )));
        }
        Ok(self.0.insert(emoji, &desc))
    }

    /// Loads `emoji<TAB>description` rows.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut t = Self::new();
        for (line, key, desc) in read_tsv_pairs(path)? {
            t.insert(&key, &desc)
                .map_err(|e| Error::parse(path.display(), line, e.to_string()))?;
        }
        Ok(t)
    }

    pub fn len(&self) -> usize {
        self.0.len
    }

    pub fn is_empty(&self) -> bool {
        self.0.len == 0
    }
}

/// Lowercase stop words, stored in their cleaned form (`don't` becomes `dont`).
#[derive(Debug, Clone, Default)]
pub struct StopwordList(HashSet<String>);

impl StopwordList {
    pub fn new<S: AsRef<str>>(words: impl IntoIterator<Item = S>) -> Self {
        StopwordList(
            words
                .into_iter()
                .map(|w| normalize_word(w.as_ref()))
                .filter(|w| !w.is_empty())
                .collect(),
        )
    }

    /// One word per line.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(StopwordList::new(content.lines()))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(&word.to_lowercase())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn normalize_word(w: &str) -> String {
    w.trim()
        .chars()
        .filter(|c| c.is_alphabetic())
        .flat_map(char::to_lowercase)
        .filter(|c| c.is_alphabetic())
        .collect()
}

/// Bundles the lookup tables needed by [`clean`].
#[derive(Debug, Clone, Default)]
pub struct Cleaner {
    pub emoticons: EmoticonTable,
    pub emojis: EmojiTable,
    pub stopwords: StopwordList,
}

impl Cleaner {
    pub fn clean(&self, text: &str, config: &CleaningConfig) -> String {
        clean(text, config, &self.emoticons, &self.emojis, &self.stopwords)
    }

    pub fn tokens(&self, text: &str, config: &CleaningConfig) -> Vec<String> {
        tokenize(&self.clean(text, config))
    }
}

/// Cleans one tweet.
///
/// General preprocessing runs in a fixed order: emoji descriptions,
/// emoticon descriptions, `@`-tag deletion, `&` to "and", `#` deletion,
/// newline removal, deletion of every remaining non-letter, optional
/// lowercasing, whitespace collapse. Stop-word removal runs last.
pub fn clean(
    text: &str,
    config: &CleaningConfig,
    emoticons: &EmoticonTable,
    emojis: &EmojiTable,
    stopwords: &StopwordList,
) -> String {
    if !config.general {
        return text.to_string();
    }
    let s = emojis.0.replace(text, false);
    let s = emoticons.0.replace(&s, true);
    let s = delete_tags(&s);
    let s = s.replace("&amp;", " and ").replace('&', " and ");
    let s = s.replace('#', "");
    let s = s.replace("\\n", " ").replace(['\n', '\r'], " ");
    let s: String = s
        .chars()
        .filter(|c| c.is_alphabetic() || c.is_whitespace())
        .collect();
    let s: String = if config.lowercase {
        s.chars()
            .flat_map(char::to_lowercase)
            .filter(|c| c.is_alphabetic() || c.is_whitespace())
            .collect()
    } else {
        s
    };
    let words = s.split_whitespace();
    if config.remove_stopwords {
        words
            .filter(|w| !stopwords.contains(w))
            .collect::<Vec<_>>()
            .join(" ")
    } else {
        words.collect::<Vec<_>>().join(" ")
    }
}

/// Deletes account tags: an `@` not preceded by an alphanumeric character,
/// together with everything up to the next whitespace.
fn delete_tags(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut in_tag = false;
    let mut prev: Option<char> = None;
    for c in text.chars() {
        if in_tag {
            if c.is_whitespace() {
                in_tag = false;
                out.push(c);
            }
        } else if c == '@' && !prev.is_some_and(char::is_alphanumeric) {
            in_tag = true;
        } else {
            out.push(c);
        }
        prev = Some(c);
    }
    out
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_string).collect()
}
