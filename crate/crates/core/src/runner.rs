//! The experiment protocol behind the CLI: cross-validated sweeps, final
//! predictions, explanation reports and artifact validation.
//!
//! Every output table is written in grid order with full-precision floats,
//! so results do not depend on the number of worker threads.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::data::{
    merge, parse_dataset, write_predictions, Dataset, Emotion, EmotionClass, LabeledInstance,
    PredictionRecord, Split,
};
use crate::ensemble::{mean_vote, EnsembleConfig, EnsemblePrediction, KChoice, MemberSpec};
use crate::error::{Error, Result};
use crate::eval::{
    average_emotions, class_imbalance, cross_validate, pcc, ttest_two_sided, EvalReport,
    FoldAssignment,
};
use crate::explain::{explain_prediction, ExplanationReport};
use crate::features::{
    assemble, load_embeddings, raw_features, AppendNormalizer, EmbeddingStore, FeatureMode,
    FeatureSources, RawFeatures,
};
use crate::knn::{Neighbor, WknnModel};
use crate::lexicon::{load_described, LexiconKind, LexiconSet};
use crate::preprocess::{Cleaner, CleaningVariant, EmojiTable, EmoticonTable, StopwordList};

/// Command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub emotion: Option<Emotion>,
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub ids: Vec<String>,
}

/// Train+dev and test data of one emotion.
#[derive(Debug, Clone)]
pub struct EmotionData {
    pub emotion: Emotion,
    pub merged: Dataset,
    pub test: Option<Dataset>,
}

/// Lexicon lookups never see raw text; raw members use the general cleaning
/// for their lexicon part.
pub fn lexicon_variant(cleaning: CleaningVariant) -> CleaningVariant {
    match cleaning {
        CleaningVariant::Raw => CleaningVariant::General,
        other => other,
    }
}

/// One member trained on a fixed training set.
#[derive(Debug, Clone)]
pub struct FittedMember {
    pub spec: MemberSpec,
    model: WknnModel,
    norm: Option<AppendNormalizer>,
}

impl FittedMember {
    pub fn fit(
        spec: &MemberSpec,
        k: usize,
        train: &[&RawFeatures],
        ids: Vec<String>,
        labels: Vec<EmotionClass>,
    ) -> Result<Self> {
        let norm = match spec.features.mode() {
            FeatureMode::Appended => Some(AppendNormalizer::fit(train.iter().copied())?),
            _ => None,
        };
        let matrix = train
            .iter()
            .map(|r| assemble(r, &spec.features, norm.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        let model = WknnModel::new(matrix, ids, labels, k, spec.aggregation)?;
        Ok(FittedMember {
            spec: spec.clone(),
            model,
            norm,
        })
    }

    pub fn k(&self) -> usize {
        self.model.k()
    }

    pub fn predict(&self, raw: &RawFeatures) -> Result<(f64, Vec<Neighbor>)> {
        let v = assemble(raw, &self.spec.features, self.norm.as_ref())?;
        self.model.predict(&v)
    }
}

/// Predicts `test` rows with an ensemble trained on `train` rows. Each member
/// comes with raw features for every row of `data`.
pub fn ensemble_fold(
    members: &[(MemberSpec, Vec<RawFeatures>)],
    k_basis: usize,
    data: &Dataset,
    labels: &[EmotionClass],
    train: &[usize],
    test: &[usize],
) -> Result<Vec<f64>> {
    let ids: Vec<String> = train
        .iter()
        .map(|&i| data.instances()[i].id.clone())
        .collect();
    let train_labels: Vec<EmotionClass> = train.iter().map(|&i| labels[i]).collect();
    let mut per_member = Vec::with_capacity(members.len());
    for (spec, raw) in members {
        let rows: Vec<&RawFeatures> = train.iter().map(|&i| &raw[i]).collect();
        let fitted = FittedMember::fit(
            spec,
            spec.k.resolve(k_basis),
            &rows,
            ids.clone(),
            train_labels.clone(),
        )?;
        let scores = test
            .iter()
            .map(|&i| fitted.predict(&raw[i]).map(|(s, _)| s))
            .collect::<Result<Vec<f64>>>()?;
        per_member.push(scores);
    }
    Ok((0..test.len())
        .map(|j| mean_vote(&per_member.iter().map(|m| m[j]).collect::<Vec<_>>()))
        .collect())
}

/// Embedding stores of one emotion, keyed by model and cleaning variant.
/// Stores that failed to load keep their error message.
#[derive(Debug, Default)]
pub struct Stores(HashMap<(String, CleaningVariant), std::result::Result<EmbeddingStore, String>>);

impl Stores {
    pub fn get(&self, model: &str, cleaning: CleaningVariant) -> Result<&EmbeddingStore> {
        match self.0.get(&(model.to_string(), cleaning)) {
            Some(Ok(s)) => Ok(s),
            Some(Err(m)) => Err(Error::Lookup(m.clone())),
            None => Err(Error::Lookup(format!(
                "no embeddings configured for model {model} ({cleaning})"
            ))),
        }
    }
}

/// One grid point of a sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub emotion: Emotion,
    pub member: MemberSpec,
    pub k: usize,
    pub report: EvalReport,
}

#[derive(Debug, Clone)]
pub struct DatasetSummary {
    pub emotion: Emotion,
    pub size: usize,
    pub counts: [usize; 4],
    pub imbalance: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct EnsembleRow {
    pub emotion: Emotion,
    pub config: EnsembleConfig,
    pub report: EvalReport,
}

#[derive(Debug, Clone, Default)]
pub struct SweepOutcome {
    pub datasets: Vec<DatasetSummary>,
    pub rows: Vec<SweepRow>,
    pub ensembles: Vec<EnsembleRow>,
}

impl SweepOutcome {
    /// Best successful grid point of `emotion`: highest mean PCC, then
    /// smaller k, then less cleaning, then grid order.
    pub fn best(&self, emotion: Emotion) -> Option<&SweepRow> {
        let mut best: Option<&SweepRow> = None;
        for row in self.rows.iter().filter(|r| r.emotion == emotion) {
            let Some(m) = row.report.mean_pcc else {
                continue;
            };
            let better = match best {
                None => true,
                Some(b) => {
                    let bm = b.report.mean_pcc.expect("best rows succeeded");
                    m > bm
                        || (m == bm
                            && (row.k < b.k
                                || (row.k == b.k && row.member.cleaning < b.member.cleaning)))
                }
            };
            if better {
                best = Some(row);
            }
        }
        best
    }
}

/// Predictions of one emotion's test set.
#[derive(Debug, Clone)]
pub struct EmotionPrediction {
    pub emotion: Emotion,
    pub ensemble: EnsembleConfig,
    pub merged: Dataset,
    pub test: Dataset,
    pub predictions: Vec<EnsemblePrediction>,
}

impl EmotionPrediction {
    pub fn member_names(&self) -> Vec<String> {
        self.ensemble
            .members()
            .iter()
            .map(MemberSpec::label)
            .collect()
    }

    pub fn explain(&self, id: &str) -> Result<ExplanationReport> {
        let idx = self
            .predictions
            .iter()
            .position(|p| p.instance_id == id)
            .ok_or_else(|| Error::Lookup(format!("no prediction for {id}")))?;
        let inst = self
            .test
            .instances()
            .iter()
            .find(|i| i.id == id)
            .ok_or_else(|| Error::Lookup(format!("{id} not in test set")))?;
        let mut report = explain_prediction(
            &self.predictions[idx],
            &self.member_names(),
            Some(&self.merged),
        )?;
        report.text = Some(inst.text.clone());
        report.gold = inst.label;
        Ok(report)
    }
}

/// A loaded experiment: config plus shared resources.
#[derive(Debug)]
pub struct Experiment {
    config: ExperimentConfig,
    cleaner: Cleaner,
    lexicons: LexiconSet,
    emotions: Vec<Emotion>,
    seed: u64,
    out_dir: PathBuf,
    jobs: Option<usize>,
    ids: Vec<String>,
}

impl Experiment {
    pub fn new(config: ExperimentConfig, opts: &RunOptions) -> Result<Self> {
        let emotions = config.selected_emotions(opts.emotion)?;
        let cleaner = load_cleaner(&config)?;
        let mut lexicons = LexiconSet::new();
        for (kind, path) in &config.lexicons {
            let lex = load_described(path)?;
            if lex.kind() != *kind {
                return Err(Error::Config(format!(
                    "{} describes lexicon {}, configured as {kind}",
                    path.display(),
                    lex.kind()
                )));
            }
            lexicons.insert(lex);
        }
        Ok(Experiment {
            seed: opts.seed.unwrap_or(config.seed),
            out_dir: opts
                .out_dir
                .clone()
                .unwrap_or_else(|| config.out_dir.clone()),
            jobs: opts.jobs,
            ids: opts.ids.clone(),
            emotions,
            cleaner,
            lexicons,
            config,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    pub fn emotions(&self) -> &[Emotion] {
        &self.emotions
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs.unwrap_or(0))
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
    }

    pub fn load_emotion(&self, emotion: Emotion) -> Result<EmotionData> {
        load_emotion_data(&self.config, emotion)
    }

    /// Loads the stores `members` need for `emotion`.
    pub fn load_stores<'a>(
        &self,
        emotion: Emotion,
        members: impl IntoIterator<Item = &'a MemberSpec>,
    ) -> Stores {
        let keys: BTreeSet<(String, CleaningVariant)> = members
            .into_iter()
            .filter_map(|m| {
                m.features
                    .embedding_model()
                    .map(|e| (e.to_string(), m.cleaning))
            })
            .collect();
        Stores(
            keys.into_iter()
                .map(|(model, cleaning)| {
                    let store = load_store(&self.config, &model, cleaning, emotion)
                        .map_err(|e| e.to_string());
                    ((model, cleaning), store)
                })
                .collect(),
        )
    }

    /// Raw features of `spec` for every instance.
    pub fn member_raw(
        &self,
        spec: &MemberSpec,
        instances: &[LabeledInstance],
        stores: &Stores,
    ) -> Result<Vec<RawFeatures>> {
        let store = match spec.features.embedding_model() {
            Some(m) => Some(stores.get(m, spec.cleaning)?),
            None => None,
        };
        let sources = FeatureSources {
            embeddings: store,
            lexicons: &self.lexicons,
        };
        let lex_cfg = lexicon_variant(spec.cleaning).config(self.config.lowercase);
        let wants_tokens = spec.features.lexicon_kind().is_some();
        instances
            .iter()
            .map(|inst| {
                let tokens = if wants_tokens {
                    self.cleaner.tokens(&inst.text, &lex_cfg)
                } else {
                    Vec::new()
                };
                raw_features(&inst.id, &spec.features, sources, &tokens)
            })
            .collect()
    }

    /// Cross-validates every grid point (and the configured ensemble) for
    /// each selected emotion.
    pub fn sweep(&self) -> Result<SweepOutcome> {
        let pool = self.pool()?;
        let points = self
            .config
            .sweep
            .as_ref()
            .map(|g| g.points())
            .unwrap_or_default();
        if points.is_empty() && self.config.ensemble.is_none() {
            return Err(Error::Config(
                "nothing to run: no [sweep] grid and no [ensemble]".into(),
            ));
        }
        let mut outcome = SweepOutcome::default();
        for &emotion in &self.emotions {
            let data = self.load_emotion(emotion)?;
            let merged = &data.merged;
            let labels = merged.labels()?;
            let counts = merged.class_counts();
            outcome.datasets.push(DatasetSummary {
                emotion,
                size: merged.len(),
                counts,
                imbalance: class_imbalance(&counts).ok(),
            });
            let folds = FoldAssignment::stratified(&labels, self.config.folds, self.seed)?;
            let ensemble = match &self.config.ensemble {
                Some(section) => Some(section.resolve(emotion)?),
                None => None,
            };
            let ens_members = ensemble.as_ref().map(|e| e.members()).unwrap_or(&[]);
            let stores = self.load_stores(emotion, points.iter().chain(ens_members));
            let n = merged.len();
            log::info!("{emotion}: {} grid points over {n} instances", points.len());

            let evaluate = |members: &[MemberSpec], setup: String| -> EvalReport {
                let raws = members
                    .iter()
                    .map(|m| Ok((m.clone(), self.member_raw(m, merged.instances(), &stores)?)))
                    .collect::<Result<Vec<_>>>();
                match raws {
                    Ok(raws) => {
                        let predictor = |train: &[usize], test: &[usize]| {
                            ensemble_fold(&raws, n, merged, &labels, train, test)
                        };
                        cross_validate(setup, &labels, &predictor, &folds)
                    }
                    Err(e) => EvalReport::failure(setup, folds.n_folds(), &e),
                }
            };

            let reports: Vec<EvalReport> = pool.install(|| {
                points
                    .par_iter()
                    .map(|p| evaluate(std::slice::from_ref(p), format!("{emotion} {}", p.label())))
                    .collect()
            });
            for (p, report) in points.iter().zip(reports) {
                if let Some(err) = report.first_error() {
                    log::warn!("{emotion} {}: {err}", p.label());
                }
                outcome.rows.push(SweepRow {
                    emotion,
                    member: p.clone(),
                    k: p.k.resolve(n),
                    report,
                });
            }
            if let Some(cfg) = ensemble {
                let report =
                    pool.install(|| evaluate(cfg.members(), format!("{emotion} ensemble")));
                outcome.ensembles.push(EnsembleRow {
                    emotion,
                    config: cfg,
                    report,
                });
            }
        }
        Ok(outcome)
    }

    /// Writes `datasets.tsv`, `sweep.tsv`, `best.tsv`, `ttest.tsv` and, with an
    /// ensemble, `ensemble.tsv`.
    pub fn write_sweep(&self, outcome: &SweepOutcome) -> Result<()> {
        fs::create_dir_all(&self.out_dir).map_err(|e| Error::io(&self.out_dir, e))?;
        let n_folds = self.config.folds;
        write_file(
            &self.out_dir.join("datasets.tsv"),
            &render_datasets(&outcome.datasets),
        )?;
        write_file(
            &self.out_dir.join("sweep.tsv"),
            &render_sweep(&outcome.rows, n_folds),
        )?;
        write_file(
            &self.out_dir.join("best.tsv"),
            &render_best(outcome, &self.emotions),
        )?;
        write_file(
            &self.out_dir.join("ttest.tsv"),
            &render_ttests(&outcome.rows),
        )?;
        if !outcome.ensembles.is_empty() {
            write_file(
                &self.out_dir.join("ensemble.tsv"),
                &render_ensembles(&outcome.ensembles, n_folds),
            )?;
        }
        Ok(())
    }

    /// The ensemble used for final predictions: the configured one, or else
    /// the best single setup recorded by a previous sweep.
    pub fn ensemble_for(&self, emotion: Emotion) -> Result<EnsembleConfig> {
        if let Some(section) = &self.config.ensemble {
            return section.resolve(emotion);
        }
        let path = self.out_dir.join("best.tsv");
        let text = fs::read_to_string(&path).map_err(|e| {
            Error::Config(format!(
                "no [ensemble] configured and {} unreadable ({e}); run a sweep first",
                path.display()
            ))
        })?;
        let member = parse_best(&text, emotion, &path)?;
        EnsembleConfig::new(vec![member])
    }

    /// Trains on train+dev and predicts the test set of `emotion`, optionally
    /// restricted to `only`. Returns `None` when no test file is configured.
    pub fn predict_emotion(
        &self,
        emotion: Emotion,
        only: Option<&HashSet<String>>,
    ) -> Result<Option<EmotionPrediction>> {
        let data = self.load_emotion(emotion)?;
        let Some(test) = data.test else {
            log::warn!("{emotion}: no test file configured, skipping");
            return Ok(None);
        };
        let merged = data.merged;
        let ensemble = self.ensemble_for(emotion)?;
        let stores = self.load_stores(emotion, ensemble.members());
        let labels = merged.labels()?;
        let ids: Vec<String> = merged.ids().map(str::to_string).collect();
        let targets: Vec<LabeledInstance> = test
            .instances()
            .iter()
            .filter(|i| only.is_none_or(|s| s.contains(&i.id)))
            .cloned()
            .collect();
        let pool = self.pool()?;

        let mut fitted = Vec::with_capacity(ensemble.len());
        let mut test_raw = Vec::with_capacity(ensemble.len());
        for spec in ensemble.members() {
            let train_raw = self.member_raw(spec, merged.instances(), &stores)?;
            let rows: Vec<&RawFeatures> = train_raw.iter().collect();
            let k = spec.k.resolve(merged.len());
            fitted.push(FittedMember::fit(
                spec,
                k,
                &rows,
                ids.clone(),
                labels.clone(),
            )?);
            test_raw.push(self.member_raw(spec, &targets, &stores)?);
        }
        let predictions = pool.install(|| {
            (0..targets.len())
                .into_par_iter()
                .map(|j| {
                    let members = fitted
                        .iter()
                        .zip(&test_raw)
                        .map(|(f, raw)| f.predict(&raw[j]))
                        .collect::<Result<Vec<_>>>()?;
                    EnsemblePrediction::from_members(targets[j].id.clone(), members)
                })
                .collect::<Result<Vec<_>>>()
        })?;
        Ok(Some(EmotionPrediction {
            emotion,
            ensemble,
            merged,
            test,
            predictions,
        }))
    }

    /// Final predictions for every selected emotion: submission files, score
    /// tables, test PCC when gold labels exist, and explanation reports for
    /// the requested ids.
    pub fn predict(&self) -> Result<Vec<EmotionPrediction>> {
        let sub_dir = self.out_dir.join("submission");
        fs::create_dir_all(&sub_dir).map_err(|e| Error::io(&sub_dir, e))?;
        let wanted = self.explain_ids();
        let mut results = Vec::new();
        let mut summary = String::from("emotion\tsize\tpcc_score\tpcc_label\n");
        let mut scores = BTreeMap::new();
        for &emotion in &self.emotions {
            let Some(pred) = self.predict_emotion(emotion, None)? else {
                continue;
            };
            let records = pred
                .predictions
                .iter()
                .map(|p| PredictionRecord::new(p.instance_id.clone(), p.final_score))
                .collect::<Result<Vec<_>>>()?;
            write_predictions(
                &records,
                &pred.test,
                sub_dir.join(format!("EI-oc_en_{emotion}_pred.txt")),
            )?;
            write_file(
                &sub_dir.join(format!("{emotion}-scores.tsv")),
                &render_scores(&pred),
            )?;
            let (by_score, by_label) = test_pcc(&pred);
            if let Some(p) = by_score {
                scores.insert(emotion, p);
            }
            let _ = writeln!(
                summary,
                "{emotion}\t{}\t{}\t{}",
                pred.predictions.len(),
                fmt_opt(by_score),
                fmt_opt(by_label)
            );
            for id in &wanted {
                if pred.test.ids().any(|t| t == id) {
                    self.write_explanation(&pred.explain(id)?)?;
                }
            }
            results.push(pred);
        }
        if let Ok(avg) = average_emotions(&scores) {
            let _ = writeln!(summary, "average\t\t{avg}\t");
        }
        write_file(&self.out_dir.join("predict.tsv"), &summary)?;
        Ok(results)
    }

    /// Explanation reports for the requested ids (from the command line, else
    /// from the config), written under `explanations/`.
    pub fn explain(&self) -> Result<Vec<ExplanationReport>> {
        let wanted = self.explain_ids();
        if wanted.is_empty() {
            return Err(Error::Config("no instance ids to explain".into()));
        }
        let set: HashSet<String> = wanted.iter().cloned().collect();
        let mut found: HashMap<String, ExplanationReport> = HashMap::new();
        for &emotion in &self.emotions {
            let Some(pred) = self.predict_emotion(emotion, Some(&set))? else {
                continue;
            };
            for p in &pred.predictions {
                found.insert(p.instance_id.clone(), pred.explain(&p.instance_id)?);
            }
        }
        let missing: Vec<&str> = wanted
            .iter()
            .filter(|id| !found.contains_key(*id))
            .map(String::as_str)
            .collect();
        if !missing.is_empty() {
            return Err(Error::Lookup(format!(
                "ids not found in any test set: {}",
                missing.join(", ")
            )));
        }
        let reports: Vec<ExplanationReport> = wanted
            .iter()
            .map(|id| found.remove(id).expect("checked"))
            .collect();
        for r in &reports {
            self.write_explanation(r)?;
        }
        Ok(reports)
    }

    fn explain_ids(&self) -> Vec<String> {
        let source = if self.ids.is_empty() {
            &self.config.explain.ids
        } else {
            &self.ids
        };
        let mut seen = HashSet::new();
        source
            .iter()
            .filter(|id| seen.insert(*id))
            .cloned()
            .collect()
    }

    fn write_explanation(&self, report: &ExplanationReport) -> Result<()> {
        let dir = self.out_dir.join("explanations");
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let stem = sanitize_file_name(&report.instance_id);
        write_file(&dir.join(format!("{stem}.json")), &report.to_json())?;
        write_file(&dir.join(format!("{stem}.txt")), &report.render_text())
    }
}

fn load_cleaner(config: &ExperimentConfig) -> Result<Cleaner> {
    let r = &config.resources;
    Ok(Cleaner {
        emoticons: match &r.emoticons {
            Some(p) => EmoticonTable::load(p)?,
            None => EmoticonTable::new(),
        },
        emojis: match &r.emojis {
            Some(p) => EmojiTable::load(p)?,
            None => EmojiTable::new(),
        },
        stopwords: match &r.stopwords {
            Some(p) => StopwordList::load(p)?,
            None => StopwordList::default(),
        },
    })
}

/// Loads train (+dev) and test files of one emotion.
pub fn load_emotion_data(config: &ExperimentConfig, emotion: Emotion) -> Result<EmotionData> {
    let paths = config
        .data
        .get(&emotion)
        .ok_or_else(|| Error::Config(format!("no [data.{emotion}] section")))?;
    let mut train = parse_dataset(&paths.train, Split::Train)?;
    train.expect_emotion(emotion)?;
    let mut merged = match &paths.dev {
        Some(dev) => {
            let mut dev = parse_dataset(dev, Split::Dev)?;
            dev.expect_emotion(emotion)?;
            merge(&train, &dev)?
        }
        None => train,
    };
    merged.split = Split::Merged;
    let test = match &paths.test {
        Some(p) => {
            let mut t = parse_dataset(p, Split::Test)?;
            t.expect_emotion(emotion)?;
            Some(t)
        }
        None => None,
    };
    Ok(EmotionData {
        emotion,
        merged,
        test,
    })
}

/// Loads and merges every file of the configured source for a model/variant.
pub fn load_store(
    config: &ExperimentConfig,
    model: &str,
    cleaning: CleaningVariant,
    emotion: Emotion,
) -> Result<EmbeddingStore> {
    let source = config
        .embedding_source(model, cleaning, emotion)
        .ok_or_else(|| {
            Error::Lookup(format!(
                "no [[embeddings]] entry for model {model} ({cleaning}, {emotion})"
            ))
        })?;
    let mut files = source.files.iter();
    let first = files
        .next()
        .ok_or_else(|| Error::Config(format!("embedding entry for {model} lists no files")))?;
    let mut store = load_embeddings(first)?;
    for f in files {
        store.extend(load_embeddings(f)?)?;
    }
    if store.model_name() != model {
        return Err(Error::Config(format!(
            "{} holds model {}, configured as {model}",
            first.display(),
            store.model_name()
        )));
    }
    Ok(store)
}

fn parse_best(text: &str, emotion: Emotion, path: &Path) -> Result<MemberSpec> {
    let bad = |m: String| Error::Config(format!("{}: {m}", path.display()));
    for line in text.lines().skip(1) {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.first() != Some(&emotion.as_str()) {
            continue;
        }
        if cols.len() < 7 {
            return Err(bad(format!("short row for {emotion}")));
        }
        let k = match cols[3] {
            "auto" => KChoice::RuleOfThumb,
            s => KChoice::Fixed(s.parse().map_err(|_| bad(format!("bad k {s:?}")))?),
        };
        return Ok(MemberSpec {
            features: cols[1].parse()?,
            cleaning: cols[2].parse()?,
            k,
            aggregation: cols[5].parse()?,
        });
    }
    Err(bad(format!(
        "no best setup for {emotion}; run a sweep first"
    )))
}

fn test_pcc(pred: &EmotionPrediction) -> (Option<f64>, Option<f64>) {
    let Ok(gold) = pred.test.labels() else {
        return (None, None);
    };
    let gold: Vec<f64> = gold.iter().map(|g| g.as_f64()).collect();
    let scores: Vec<f64> = pred.predictions.iter().map(|p| p.final_score).collect();
    let rounded: Vec<f64> = pred
        .predictions
        .iter()
        .map(|p| p.rounded.as_f64())
        .collect();
    (pcc(&scores, &gold).ok(), pcc(&rounded, &gold).ok())
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

fn status(report: &EvalReport) -> String {
    match report.first_error() {
        None => "ok".into(),
        Some(e) => format!("error: {}", e.replace(['\t', '\n', '\r'], " ")),
    }
}

fn sanitize_file_name(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_alphanumeric() || c == '-' || c == '_' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn fold_header(n_folds: usize) -> String {
    (1..=n_folds).map(|i| format!("\tfold_{i}")).collect()
}

fn fold_cells(report: &EvalReport, n_folds: usize) -> String {
    (0..n_folds)
        .map(|i| format!("\t{}", fmt_opt(report.folds.get(i).and_then(|f| f.pcc))))
        .collect()
}

fn render_datasets(rows: &[DatasetSummary]) -> String {
    let mut out =
        String::from("emotion\tsize\tclass_0\tclass_1\tclass_2\tclass_3\timbalance_ratio\n");
    for d in rows {
        let c = d.counts;
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            d.emotion,
            d.size,
            c[0],
            c[1],
            c[2],
            c[3],
            fmt_opt(d.imbalance)
        );
    }
    out
}

fn render_sweep(rows: &[SweepRow], n_folds: usize) -> String {
    let mut out = format!(
        "emotion\tfeatures\tcleaning\tk_choice\tk\taggregation{}\tmean_pcc\tstatus\n",
        fold_header(n_folds)
    );
    for r in rows {
        let m = &r.member;
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}{}\t{}\t{}",
            r.emotion,
            m.features,
            m.cleaning,
            m.k,
            r.k,
            m.aggregation,
            fold_cells(&r.report, n_folds),
            fmt_opt(r.report.mean_pcc),
            status(&r.report)
        );
    }
    out
}

fn render_best(outcome: &SweepOutcome, emotions: &[Emotion]) -> String {
    let mut out = String::from("emotion\tfeatures\tcleaning\tk_choice\tk\taggregation\tmean_pcc\n");
    let mut means = BTreeMap::new();
    for &e in emotions {
        if let Some(r) = outcome.best(e) {
            let m = &r.member;
            let mean = r.report.mean_pcc.expect("best rows succeeded");
            means.insert(e, mean);
            let _ = writeln!(
                out,
                "{e}\t{}\t{}\t{}\t{}\t{}\t{mean}",
                m.features, m.cleaning, m.k, r.k, m.aggregation
            );
        }
    }
    if let Ok(avg) = average_emotions(&means) {
        let _ = writeln!(out, "average\t\t\t\t\t\t{avg}");
    }
    out
}

/// Welch tests between cleaning variants of otherwise identical setups.
fn render_ttests(rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "emotion\tfeatures\tk_choice\taggregation\tcleaning_a\tcleaning_b\tmean_a\tmean_b\tt\tdf\tp\tstatus\n",
    );
    let mut groups: Vec<(String, Vec<&SweepRow>)> = Vec::new();
    for r in rows {
        let key = format!(
            "{}\t{}\t{}\t{}",
            r.emotion, r.member.features, r.member.k, r.member.aggregation
        );
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, g)) => g.push(r),
            None => groups.push((key, vec![r])),
        }
    }
    for (key, group) in &groups {
        for (i, a) in group.iter().enumerate() {
            for b in &group[i + 1..] {
                let (Some(ma), Some(mb)) = (a.report.mean_pcc, b.report.mean_pcc) else {
                    continue;
                };
                let cells =
                    match ttest_two_sided(&a.report.per_fold_pcc(), &b.report.per_fold_pcc()) {
                        Ok(t) => format!("{}\t{}\t{}\tok", t.t, t.df, t.p),
                        Err(e) => {
                            format!("NA\tNA\tNA\t{}", e.to_string().replace(['\t', '\n'], " "))
                        }
                    };
                let _ = writeln!(
                    out,
                    "{key}\t{}\t{}\t{ma}\t{mb}\t{cells}",
                    a.member.cleaning, b.member.cleaning
                );
            }
        }
    }
    out
}

fn render_ensembles(rows: &[EnsembleRow], n_folds: usize) -> String {
    let mut out = format!(
        "emotion\tmembers{}\tmean_pcc\tstatus\n",
        fold_header(n_folds)
    );
    for r in rows {
        let members: Vec<String> = r.config.members().iter().map(MemberSpec::label).collect();
        let _ = writeln!(
            out,
            "{}\t{}{}\t{}\t{}",
            r.emotion,
            members.join(" | "),
            fold_cells(&r.report, n_folds),
            fmt_opt(r.report.mean_pcc),
            status(&r.report)
        );
    }
    out
}

fn render_scores(pred: &EmotionPrediction) -> String {
    let mut out = String::from("id\tfinal_score\tlabel");
    for name in pred.member_names() {
        out.push('\t');
        out.push_str(&name);
    }
    out.push('\n');
    for p in &pred.predictions {
        let _ = write!(out, "{}\t{}\t{}", p.instance_id, p.final_score, p.rounded);
        for s in &p.member_scores {
            let _ = write!(out, "\t{s}");
        }
        out.push('\n');
    }
    out
}

/// One validation check and its failure message, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    fn record<T>(&mut self, name: impl Into<String>, result: Result<T>) -> Option<T> {
        let name = name.into();
        match result {
            Ok(v) => {
                self.checks.push(Check {
                    name,
                    failure: None,
                });
                Some(v)
            }
            Err(e) => {
                self.checks.push(Check {
                    name,
                    failure: Some(e.to_string()),
                });
                None
            }
        }
    }

    fn fail(&mut self, name: impl Into<String>, message: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            failure: Some(message.into()),
        });
    }

    pub fn ok(&self) -> bool {
        self.checks.iter().all(|c| c.failure.is_none())
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.failure.is_some())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            match &c.failure {
                None => {
                    let _ = writeln!(out, "ok    {}", c.name);
                }
                Some(m) => {
                    let _ = writeln!(out, "FAIL  {}: {m}", c.name);
                }
            }
        }
        let failed = self.failures().count();
        let _ = writeln!(out, "{} checks, {failed} failed", self.checks.len());
        out
    }
}

/// Checks that every artifact an experiment needs exists and is consistent:
/// data files, resources, lexicon widths, grid sanity and embedding id
/// coverage.
pub fn validate(config: &ExperimentConfig, emotion: Option<Emotion>) -> ValidationReport {
    let mut report = ValidationReport::default();
    let Some(emotions) = report.record("emotions", config.selected_emotions(emotion)) else {
        return report;
    };
    report.record("resources", load_cleaner(config));

    let mut lexicons = LexiconSet::new();
    for (kind, path) in &config.lexicons {
        let name = format!("lexicon {kind} ({})", path.display());
        let loaded = load_described(path).and_then(|l| {
            if l.kind() == *kind {
                Ok(l)
            } else {
                Err(Error::Config(format!("descriptor declares {}", l.kind())))
            }
        });
        if let Some(l) = report.record(name, loaded) {
            lexicons.insert(l);
        }
    }

    let points = config
        .sweep
        .as_ref()
        .map(|g| g.points())
        .unwrap_or_default();
    if let Some(grid) = &config.sweep {
        if grid.features.is_empty()
            || grid.cleaning.is_empty()
            || grid.k.is_empty()
            || grid.aggregation.is_empty()
        {
            report.fail("sweep grid", "every grid axis needs at least one value");
        } else {
            report.checks.push(Check {
                name: format!("sweep grid ({} points)", points.len()),
                failure: None,
            });
        }
    }

    for &e in &emotions {
        let Some(data) = report.record(format!("{e} data"), load_emotion_data(config, e)) else {
            continue;
        };
        if report
            .record(format!("{e} labels"), data.merged.labels())
            .is_none()
        {
            continue;
        }
        let ensemble = match &config.ensemble {
            Some(section) => report.record(format!("{e} ensemble"), section.resolve(e)),
            None => None,
        };
        let members: Vec<MemberSpec> = points
            .iter()
            .chain(ensemble.as_ref().map(|c| c.members()).unwrap_or(&[]))
            .cloned()
            .collect();

        let n = data.merged.len();
        let min_train = n - n.div_ceil(config.folds.max(1));
        let ks: BTreeSet<usize> = members.iter().map(|m| m.k.resolve(n)).collect();
        match ks.iter().find(|&&k| k > min_train) {
            Some(k) => report.fail(
                format!("{e} k range"),
                format!("k={k} exceeds the smallest training fold ({min_train} instances)"),
            ),
            None if !ks.is_empty() => report.checks.push(Check {
                name: format!("{e} k range"),
                failure: None,
            }),
            None => {}
        }

        let needs_stopwords = members
            .iter()
            .any(|m| m.cleaning == CleaningVariant::GeneralStopwords);
        if needs_stopwords && config.resources.stopwords.is_none() {
            report.fail(
                format!("{e} stop words"),
                "general+stopwords is used but [resources] stopwords is not set",
            );
        }

        let kinds: BTreeSet<LexiconKind> = members
            .iter()
            .filter_map(|m| m.features.lexicon_kind())
            .collect();
        for kind in kinds {
            if !lexicons.contains(kind) {
                report.fail(format!("{e} lexicon {kind}"), "not loaded");
            }
        }

        let keys: BTreeSet<(String, CleaningVariant)> = members
            .iter()
            .filter_map(|m| {
                m.features
                    .embedding_model()
                    .map(|x| (x.to_string(), m.cleaning))
            })
            .collect();
        let mut needed: Vec<&str> = data.merged.ids().collect();
        if let Some(t) = &data.test {
            needed.extend(t.ids());
        }
        for (model, cleaning) in keys {
            let name = format!("{e} embeddings {model} ({cleaning})");
            let Some(store) = report.record(name.clone(), load_store(config, &model, cleaning, e))
            else {
                continue;
            };
            report.checks.pop();
            let missing: Vec<&str> = needed
                .iter()
                .copied()
                .filter(|id| !store.contains(id))
                .collect();
            if missing.is_empty() {
                report.checks.push(Check {
                    name: format!("{name}: {} ids covered", needed.len()),
                    failure: None,
                });
            } else {
                let shown: Vec<&str> = missing.iter().copied().take(5).collect();
                report.fail(
                    name,
                    format!("{} ids missing, e.g. {}", missing.len(), shown.join(", ")),
                );
            }
        }
    }
    report
}
