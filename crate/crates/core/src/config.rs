//! Experiment configuration (TOML).
//!
//! Relative paths are resolved against the directory of the config file.
//! The README documents the full schema.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::Emotion;
use crate::ensemble::{EnsembleConfig, KChoice, MemberSpec};
use crate::error::{Error, Result};
use crate::eval::{DEFAULT_FOLDS, DEFAULT_SEED};
use crate::features::FeatureSpec;
use crate::knn::Aggregation;
use crate::lexicon::LexiconKind;
use crate::preprocess::CleaningVariant;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    /// Emotions to run; defaults to every emotion with a `[data]` entry.
    #[serde(default)]
    pub emotions: Vec<Emotion>,
    /// Lowercase during general preprocessing.
    #[serde(default)]
    pub lowercase: bool,
    pub data: BTreeMap<Emotion, DataPaths>,
    #[serde(default)]
    pub resources: Resources,
    /// Lexicon name -> descriptor path.
    #[serde(default)]
    pub lexicons: BTreeMap<LexiconKind, PathBuf>,
    #[serde(default)]
    pub embeddings: Vec<EmbeddingSource>,
    #[serde(default)]
    pub sweep: Option<SweepGrid>,
    #[serde(default)]
    pub ensemble: Option<EnsembleSection>,
    #[serde(default)]
    pub explain: ExplainSection,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_folds() -> usize {
    DEFAULT_FOLDS
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub train: PathBuf,
    #[serde(default)]
    pub dev: Option<PathBuf>,
    #[serde(default)]
    pub test: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Resources {
    pub emoticons: Option<PathBuf>,
    pub emojis: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
}

/// Embedding files for one (model, cleaning variant), optionally restricted
/// to one emotion. Several files are merged into one store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingSource {
    pub model: String,
    #[serde(default = "raw_variant")]
    pub cleaning: CleaningVariant,
    #[serde(default)]
    pub emotion: Option<Emotion>,
    pub files: Vec<PathBuf>,
}

fn raw_variant() -> CleaningVariant {
    CleaningVariant::Raw
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub features: Vec<FeatureSpec>,
    #[serde(default = "all_variants")]
    pub cleaning: Vec<CleaningVariant>,
    #[serde(default = "default_k_grid")]
    pub k: Vec<KChoice>,
    #[serde(default = "default_aggregation")]
    pub aggregation: Vec<Aggregation>,
}

fn all_variants() -> Vec<CleaningVariant> {
    CleaningVariant::ALL.to_vec()
}

/// 5, 7, ..., 23.
pub fn default_k_grid() -> Vec<KChoice> {
    (5..=23).step_by(2).map(KChoice::Fixed).collect()
}

fn default_aggregation() -> Vec<Aggregation> {
    vec![Aggregation::WeightedMean]
}

impl SweepGrid {
    /// Cartesian product in a fixed order: features, cleaning, k, aggregation.
    pub fn points(&self) -> Vec<MemberSpec> {
        let mut out = Vec::new();
        for f in &self.features {
            for &c in &self.cleaning {
                for &k in &self.k {
                    for &a in &self.aggregation {
                        out.push(MemberSpec {
                            features: f.clone(),
                            cleaning: c,
                            k,
                            aggregation: a,
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    /// Named preset, expanded per emotion (see [`preset_members`]).
    #[serde(default)]
    pub preset: Option<String>,
    /// Members shared by all emotions.
    #[serde(default)]
    pub members: Vec<MemberSpec>,
    /// Per-emotion member lists, taking precedence over `members`.
    #[serde(default)]
    pub per_emotion: BTreeMap<Emotion, Vec<MemberSpec>>,
}

impl EnsembleSection {
    pub fn resolve(&self, emotion: Emotion) -> Result<EnsembleConfig> {
        if let Some(m) = self.per_emotion.get(&emotion) {
            return EnsembleConfig::new(m.clone());
        }
        if !self.members.is_empty() {
            return EnsembleConfig::new(self.members.clone());
        }
        match &self.preset {
            Some(name) => EnsembleConfig::new(preset_members(name, emotion)?),
            None => Err(Error::Config(format!(
                "ensemble has no members for {emotion}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplainSection {
    #[serde(default)]
    pub ids: Vec<String>,
}

/// Expands a named ensemble preset.
///
/// `best` is the seven-member ensemble: five sentence/token embeddings with
/// their tuned cleaning and k, the best lexicon on its own, and roBERTa with
/// that lexicon appended. Embedding model names expected in the config are
/// `roberta`, `deepmoji`, `use`, `sbert` and `word2vec`.
pub fn preset_members(name: &str, emotion: Emotion) -> Result<Vec<MemberSpec>> {
    use CleaningVariant::{General as G, GeneralStopwords as GS, Raw as R};
    use Emotion::*;
    if name != "best" {
        return Err(Error::Config(format!("unknown ensemble preset {name:?}")));
    }
    let embeddings: [(&str, [(CleaningVariant, usize); 4]); 5] = [
        // anger, joy, sadness, fear
        ("roberta", [(R, 19), (R, 13), (R, 9), (G, 11)]),
        ("deepmoji", [(GS, 11), (G, 21), (G, 13), (G, 13)]),
        ("use", [(G, 19), (G, 21), (G, 19), (R, 11)]),
        ("sbert", [(G, 21), (G, 9), (G, 21), (G, 13)]),
        ("word2vec", [(GS, 5), (GS, 23), (GS, 21), (GS, 13)]),
    ];
    let col = match emotion {
        Anger => 0,
        Joy => 1,
        Sadness => 2,
        Fear => 3,
    };
    let (best_lex, lex_k) = match emotion {
        Anger => (LexiconKind::Ai, 11),
        Joy => (LexiconKind::Combined, 19),
        Sadness => (LexiconKind::Ai, 23),
        Fear => (LexiconKind::Anew, 17),
    };
    let member = |features: FeatureSpec, cleaning, k| MemberSpec {
        features,
        cleaning,
        k: KChoice::Fixed(k),
        aggregation: Aggregation::WeightedMean,
    };
    let mut out: Vec<MemberSpec> = embeddings
        .iter()
        .map(|(model, per)| {
            let (c, k) = per[col];
            member(FeatureSpec::embedding(*model), c, k)
        })
        .collect();
    out.push(member(FeatureSpec::lexicon(best_lex), G, lex_k));
    let roberta_cleaning = embeddings[0].1[col].0;
    out.push(member(
        FeatureSpec::appended("roberta", best_lex),
        roberta_cleaning,
        lex_k,
    ));
    Ok(out)
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.folds < 2 {
            return Err(Error::Config(format!(
                "folds must be at least 2, got {}",
                cfg.folds
            )));
        }
        Ok(cfg)
    }

    /// Makes every relative path absolute with respect to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.out_dir);
        for d in self.data.values_mut() {
            fix(&mut d.train);
            d.dev.iter_mut().for_each(fix);
            d.test.iter_mut().for_each(fix);
        }
        self.resources.emoticons.iter_mut().for_each(fix);
        self.resources.emojis.iter_mut().for_each(fix);
        self.resources.stopwords.iter_mut().for_each(fix);
        self.lexicons.values_mut().for_each(fix);
        for e in &mut self.embeddings {
            e.files.iter_mut().for_each(fix);
        }
    }

    /// Emotions selected by the config, optionally narrowed by a CLI filter.
    pub fn selected_emotions(&self, filter: Option<Emotion>) -> Result<Vec<Emotion>> {
        let base: Vec<Emotion> = if self.emotions.is_empty() {
            self.data.keys().copied().collect()
        } else {
            self.emotions.clone()
        };
        for e in &base {
            if !self.data.contains_key(e) {
                return Err(Error::Config(format!("no [data.{e}] section")));
            }
        }
        match filter {
            None => Ok(base),
            Some(f) if base.contains(&f) => Ok(vec![f]),
            Some(f) => Err(Error::Config(format!("emotion {f} is not configured"))),
        }
    }

    /// Finds the embedding source for a model/variant, preferring one bound
    /// to `emotion` over a shared one.
    pub fn embedding_source(
        &self,
        model: &str,
        cleaning: CleaningVariant,
        emotion: Emotion,
    ) -> Option<&EmbeddingSource> {
        let matches = |e: &&EmbeddingSource| e.model == model && e.cleaning == cleaning;
        self.embeddings
            .iter()
            .filter(matches)
            .find(|e| e.emotion == Some(emotion))
            .or_else(|| {
                self.embeddings
                    .iter()
                    .filter(matches)
                    .find(|e| e.emotion.is_none())
            })
    }
}
