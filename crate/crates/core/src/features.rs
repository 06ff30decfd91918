//! Tweet feature vectors: embedding stores in the interchange format, token
//! mean pooling, min-max scaling, and embedding/lexicon composition.
//!
//! Interchange format (UTF-8):
//!
//! ```text
//! #model=<name> level=<sentence|token> dim=<d>
//! # optional comment lines
//! <id>\t<token_index>\t<f1> <f2> ... <fd>
//! ```
//!
//! Sentence-level files carry token index 0 and one row per id. Token-level
//! files carry the rows of one id contiguously with indices 0, 1, 2, ...

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexicon::{LexiconKind, LexiconSet};

pub type FeatureVector = Vec<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingLevel {
    Sentence,
    Token,
}

impl fmt::Display for EmbeddingLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EmbeddingLevel::Sentence => "sentence",
            EmbeddingLevel::Token => "token",
        })
    }
}

impl FromStr for EmbeddingLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sentence" => Ok(EmbeddingLevel::Sentence),
            "token" => Ok(EmbeddingLevel::Token),
            _ => Err(Error::Validation(format!("unknown embedding level {s:?}"))),
        }
    }
}

/// Precomputed embeddings for a set of instances, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    model_name: String,
    level: EmbeddingLevel,
    dim: usize,
    ids: Vec<String>,
    vectors: HashMap<String, Vec<Vec<f64>>>,
}

impl EmbeddingStore {
    pub fn new(model_name: impl Into<String>, level: EmbeddingLevel, dim: usize) -> Result<Self> {
        let model_name = model_name.into();
        if dim == 0 {
            return Err(Error::Validation("embedding dim must be positive".into()));
        }
        if model_name.is_empty() || model_name.contains(char::is_whitespace) {
            return Err(Error::Validation(format!(
                "invalid model name {model_name:?}"
            )));
        }
        Ok(EmbeddingStore {
            model_name,
            level,
            dim,
            ids: Vec::new(),
            vectors: HashMap::new(),
        })
    }

    /// Adds the vectors of one instance (exactly one for sentence level).
    pub fn insert(&mut self, id: impl Into<String>, vectors: Vec<Vec<f64>>) -> Result<()> {
        let id = id.into();
        if vectors.is_empty() {
            return Err(Error::Validation(format!("no vectors for {id}")));
        }
        if self.level == EmbeddingLevel::Sentence && vectors.len() != 1 {
            return Err(Error::Validation(format!(
                "sentence-level store takes one vector per id, {id} has {}",
                vectors.len()
            )));
        }
        if let Some(v) = vectors.iter().find(|v| v.len() != self.dim) {
            return Err(Error::Validation(format!(
                "{id}: vector of length {} in a dim-{} store",
                v.len(),
                self.dim
            )));
        }
        if self.vectors.contains_key(&id) {
            return Err(Error::Validation(format!("duplicate id {id}")));
        }
        self.ids.push(id.clone());
        self.vectors.insert(id, vectors);
        Ok(())
    }

    /// Moves every instance of `other` into this store.
    pub fn extend(&mut self, other: EmbeddingStore) -> Result<()> {
        if other.model_name != self.model_name || other.level != self.level || other.dim != self.dim
        {
            return Err(Error::Validation(format!(
                "cannot merge store {}/{}/{} into {}/{}/{}",
                other.model_name, other.level, other.dim, self.model_name, self.level, self.dim
            )));
        }
        let EmbeddingStore {
            ids, mut vectors, ..
        } = other;
        for id in ids {
            let v = vectors.remove(&id).expect("id list and map agree");
            self.insert(id, v)?;
        }
        Ok(())
    }

    pub fn model_name(&self) -> &str {
        &self.model_name
    }

    pub fn level(&self) -> EmbeddingLevel {
        self.level
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn contains(&self, id: &str) -> bool {
        self.vectors.contains_key(id)
    }

    pub fn raw(&self, id: &str) -> Option<&[Vec<f64>]> {
        self.vectors.get(id).map(Vec::as_slice)
    }

    /// The tweet vector: the stored vector, or the mean of token vectors.
    pub fn vector(&self, id: &str) -> Result<Vec<f64>> {
        let vs = self.vectors.get(id).ok_or_else(|| {
            Error::Lookup(format!(
                "id {id} not in embedding store {}",
                self.model_name
            ))
        })?;
        match self.level {
            EmbeddingLevel::Sentence => Ok(vs[0].clone()),
            EmbeddingLevel::Token => pool_tokens(vs),
        }
    }

    pub fn to_interchange(&self) -> String {
        let mut out = format!(
            "#model={} level={} dim={}\n",
            self.model_name, self.level, self.dim
        );
        for id in &self.ids {
            for (t, v) in self.vectors[id].iter().enumerate() {
                let floats: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
                out.push_str(&format!("{id}\t{t}\t{}\n", floats.join(" ")));
            }
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_interchange().as_bytes())
            .map_err(|e| Error::io(path, e))
    }
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingStore> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_embeddings(&content, &path.display().to_string())
}

pub fn parse_embeddings(content: &str, origin: &str) -> Result<EmbeddingStore> {
    let mut lines = content.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(origin, 1, "missing header"))?;
    let mut store = parse_header(header).map_err(|m| Error::parse(origin, 1, m))?;

    let mut current: Option<(String, Vec<Vec<f64>>)> = None;
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.trim_end_matches('\r');
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.splitn(3, '\t');
        let (Some(id), Some(tok), Some(floats)) = (cols.next(), cols.next(), cols.next()) else {
            return Err(Error::parse(
                origin,
                line_no,
                "expected id<TAB>token_index<TAB>floats",
            ));
        };
        if id.is_empty() {
            return Err(Error::parse(origin, line_no, "empty id"));
        }
        let tok: usize = tok
            .parse()
            .map_err(|_| Error::parse(origin, line_no, format!("bad token index {tok:?}")))?;
        let v = floats
            .split_whitespace()
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::parse(origin, line_no, format!("bad float {f:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if v.len() != store.dim {
            return Err(Error::parse(
                origin,
                line_no,
                format!("{} floats under dim={}", v.len(), store.dim),
            ));
        }

        let continues = matches!(&current, Some((cur, _)) if cur == id);
        if continues && store.level == EmbeddingLevel::Token {
            let (_, vs) = current.as_mut().expect("checked above");
            if tok != vs.len() {
                return Err(Error::parse(
                    origin,
                    line_no,
                    format!("token index {tok}, expected {}", vs.len()),
                ));
            }
            vs.push(v);
            continue;
        }
        if continues || store.contains(id) {
            return Err(Error::parse(origin, line_no, format!("duplicate id {id}")));
        }
        if tok != 0 {
            return Err(Error::parse(
                origin,
                line_no,
                format!("first row of {id} has token index {tok}, expected 0"),
            ));
        }
        if let Some((prev, vs)) = current.take() {
            store.insert(prev, vs)?;
        }
        current = Some((id.to_string(), vec![v]));
    }
    if let Some((prev, vs)) = current {
        store.insert(prev, vs)?;
    }
    Ok(store)
}

fn parse_header(header: &str) -> std::result::Result<EmbeddingStore, String> {
    let body = header
        .strip_prefix('#')
        .ok_or("header must start with `#model=`")?;
    let mut model = None;
    let mut level = None;
    let mut dim = None;
    for kv in body.split_whitespace() {
        let (k, v) = kv
            .split_once('=')
            .ok_or(format!("bad header field {kv:?}"))?;
        match k {
            "model" => model = Some(v.to_string()),
            "level" => level = Some(v.parse::<EmbeddingLevel>().map_err(|e| e.to_string())?),
            "dim" => dim = Some(v.parse::<usize>().map_err(|_| format!("bad dim {v:?}"))?),
            _ => {}
        }
    }
    let (Some(model), Some(level), Some(dim)) = (model, level, dim) else {
        return Err("header needs model, level and dim".into());
    };
    EmbeddingStore::new(model, level, dim).map_err(|e| e.to_string())
}

/// Component-wise mean of equally long vectors.
pub fn pool_tokens(vectors: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = vectors
        .first()
        .ok_or_else(|| Error::DegenerateInput("no token vectors to pool".into()))?;
    let mut sum = vec![0.0; first.len()];
    for v in vectors {
        if v.len() != sum.len() {
            return Err(Error::Validation(format!(
                "token vectors of lengths {} and {}",
                sum.len(),
                v.len()
            )));
        }
        for (s, x) in sum.iter_mut().zip(v) {
            *s += x;
        }
    }
    let n = vectors.len() as f64;
    sum.iter_mut().for_each(|s| *s /= n);
    Ok(sum)
}

/// Per-dimension bounds fitted on training vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxParams {
    mins: Vec<f64>,
    maxs: Vec<f64>,
}

impl MinMaxParams {
    pub fn width(&self) -> usize {
        self.mins.len()
    }

    pub fn bounds(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.mins.iter().copied().zip(self.maxs.iter().copied())
    }
}

pub fn fit_minmax(train_vectors: &[Vec<f64>]) -> Result<MinMaxParams> {
    let first = train_vectors
        .first()
        .ok_or_else(|| Error::DegenerateInput("cannot fit min-max on no vectors".into()))?;
    let mut mins = first.clone();
    let mut maxs = first.clone();
    for v in &train_vectors[1..] {
        if v.len() != mins.len() {
            return Err(Error::Validation(format!(
                "training vectors of widths {} and {}",
                mins.len(),
                v.len()
            )));
        }
        for (i, &x) in v.iter().enumerate() {
            mins[i] = mins[i].min(x);
            maxs[i] = maxs[i].max(x);
        }
    }
    Ok(MinMaxParams { mins, maxs })
}

/// Scales into `[0, 1]`, clamping values outside the fitted range. Constant
/// dimensions map to 0.
pub fn apply_minmax(v: &[f64], p: &MinMaxParams) -> Result<Vec<f64>> {
    if v.len() != p.width() {
        return Err(Error::Validation(format!(
            "vector width {} does not match min-max width {}",
            v.len(),
            p.width()
        )));
    }
    Ok(v.iter()
        .zip(p.bounds())
        .map(|(&x, (lo, hi))| {
            if hi > lo {
                ((x - lo) / (hi - lo)).clamp(0.0, 1.0)
            } else {
                0.0
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    EmbeddingOnly,
    LexiconOnly,
    Appended,
}

/// Which sources make up a member's feature vector.
///
/// Written as `emb:<model>`, `lex:<lexicon>` or `emb:<model>+lex:<lexicon>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeatureSpec {
    embedding: Option<String>,
    lexicon: Option<LexiconKind>,
}

impl FeatureSpec {
    pub fn embedding(model: impl Into<String>) -> Self {
        FeatureSpec {
            embedding: Some(model.into()),
            lexicon: None,
        }
    }

    pub fn lexicon(kind: LexiconKind) -> Self {
        FeatureSpec {
            embedding: None,
            lexicon: Some(kind),
        }
    }

    pub fn appended(model: impl Into<String>, kind: LexiconKind) -> Self {
        FeatureSpec {
            embedding: Some(model.into()),
            lexicon: Some(kind),
        }
    }

    pub fn new(
        embedding: Option<String>,
        lexicon: Option<LexiconKind>,
        mode: FeatureMode,
    ) -> Result<Self> {
        let ok = match mode {
            FeatureMode::EmbeddingOnly => embedding.is_some() && lexicon.is_none(),
            FeatureMode::LexiconOnly => embedding.is_none() && lexicon.is_some(),
            FeatureMode::Appended => embedding.is_some() && lexicon.is_some(),
        };
        if !ok {
            return Err(Error::Validation(format!(
                "feature mode {mode:?} inconsistent with embedding={embedding:?} lexicon={lexicon:?}"
            )));
        }
        Ok(FeatureSpec { embedding, lexicon })
    }

    pub fn mode(&self) -> FeatureMode {
        match (&self.embedding, &self.lexicon) {
            (Some(_), Some(_)) => FeatureMode::Appended,
            (Some(_), None) => FeatureMode::EmbeddingOnly,
            _ => FeatureMode::LexiconOnly,
        }
    }

    pub fn embedding_model(&self) -> Option<&str> {
        self.embedding.as_deref()
    }

    pub fn lexicon_kind(&self) -> Option<LexiconKind> {
        self.lexicon
    }
}

impl fmt::Display for FeatureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.embedding, self.lexicon) {
            (Some(e), Some(l)) => write!(f, "emb:{e}+lex:{l}"),
            (Some(e), None) => write!(f, "emb:{e}"),
            (None, Some(l)) => write!(f, "lex:{l}"),
            (None, None) => unreachable!("FeatureSpec always has a source"),
        }
    }
}

impl FromStr for FeatureSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut embedding = None;
        let mut lexicon = None;
        for part in s.split('+') {
            match part.trim().split_once(':') {
                Some(("emb", m)) if !m.is_empty() && embedding.is_none() => {
                    embedding = Some(m.to_string())
                }
                Some(("lex", l)) if lexicon.is_none() => lexicon = Some(l.parse()?),
                _ => {
                    return Err(Error::Validation(format!(
                        "bad feature spec {s:?}; expected emb:<model>, lex:<lexicon> or both joined by '+'"
                    )))
                }
            }
        }
        if embedding.is_none() && lexicon.is_none() {
            return Err(Error::Validation(format!("empty feature spec {s:?}")));
        }
        Ok(FeatureSpec { embedding, lexicon })
    }
}

impl Serialize for FeatureSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FeatureSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Where feature parts come from for one emotion and cleaning variant.
#[derive(Debug, Clone, Copy)]
pub struct FeatureSources<'a> {
    pub embeddings: Option<&'a EmbeddingStore>,
    pub lexicons: &'a LexiconSet,
}

/// Un-normalized feature parts of one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct RawFeatures {
    pub embedding: Option<Vec<f64>>,
    pub lexicon: Option<Vec<f64>>,
}

pub fn raw_features<S: AsRef<str>>(
    id: &str,
    spec: &FeatureSpec,
    sources: FeatureSources<'_>,
    tokens: &[S],
) -> Result<RawFeatures> {
    let embedding = match spec.embedding_model() {
        Some(model) => {
            let store = sources
                .embeddings
                .ok_or_else(|| Error::Lookup(format!("no embedding store for model {model}")))?;
            if store.model_name() != model {
                return Err(Error::Lookup(format!(
                    "feature spec wants model {model}, store holds {}",
                    store.model_name()
                )));
            }
            Some(store.vector(id)?)
        }
        None => None,
    };
    let lexicon = match spec.lexicon_kind() {
        Some(kind) => Some(sources.lexicons.tweet_vector(kind, tokens)?),
        None => None,
    };
    Ok(RawFeatures { embedding, lexicon })
}

/// Per-block min-max parameters for appended features.
#[derive(Debug, Clone, PartialEq)]
pub struct AppendNormalizer {
    pub embedding: MinMaxParams,
    pub lexicon: MinMaxParams,
}

impl AppendNormalizer {
    pub fn fit<'a>(train: impl IntoIterator<Item = &'a RawFeatures>) -> Result<Self> {
        let mut emb = Vec::new();
        let mut lex = Vec::new();
        for r in train {
            match (&r.embedding, &r.lexicon) {
                (Some(e), Some(l)) => {
                    emb.push(e.clone());
                    lex.push(l.clone());
                }
                _ => {
                    return Err(Error::Validation(
                        "append normalizer needs both embedding and lexicon parts".into(),
                    ))
                }
            }
        }
        Ok(AppendNormalizer {
            embedding: fit_minmax(&emb)?,
            lexicon: fit_minmax(&lex)?,
        })
    }
}

/// Turns raw parts into the final vector. Appended mode needs a normalizer
/// fitted on training data; the other modes pass the raw vector through.
pub fn assemble(
    raw: &RawFeatures,
    spec: &FeatureSpec,
    norm: Option<&AppendNormalizer>,
) -> Result<FeatureVector> {
    let missing = || Error::Validation(format!("raw features incomplete for {spec}"));
    match spec.mode() {
        FeatureMode::EmbeddingOnly => raw.embedding.clone().ok_or_else(missing),
        FeatureMode::LexiconOnly => raw.lexicon.clone().ok_or_else(missing),
        FeatureMode::Appended => {
            let norm = norm.ok_or_else(|| {
                Error::Validation(format!(
                    "appended features {spec} need fitted min-max params"
                ))
            })?;
            let e = raw.embedding.as_ref().ok_or_else(missing)?;
            let l = raw.lexicon.as_ref().ok_or_else(missing)?;
            let mut out = apply_minmax(e, &norm.embedding)?;
            out.extend(apply_minmax(l, &norm.lexicon)?);
            Ok(out)
        }
    }
}

/// Builds the feature vector of one instance.
pub fn compose<S: AsRef<str>>(
    id: &str,
    spec: &FeatureSpec,
    sources: FeatureSources<'_>,
    tokens: &[S],
    norm: Option<&AppendNormalizer>,
) -> Result<FeatureVector> {
    let raw = raw_features(id, spec, sources, tokens)?;
    assemble(&raw, spec, norm)
}
