//! Evaluation: Pearson correlation, stratified k-fold cross-validation,
//! emotion averaging, imbalance ratio and Welch's two-sided t-test.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Emotion, EmotionClass};
use crate::error::{Error, Result};

pub const DEFAULT_FOLDS: usize = 5;
pub const DEFAULT_SEED: u64 = 2018;

/// Pearson correlation coefficient of two equally long samples.
pub fn pcc(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Validation(format!(
            "pcc inputs differ in length: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::UndefinedCorrelation(format!(
            "need at least 2 points, got {}",
            x.len()
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("constant input vector".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Class-stratified assignment of instance indices to folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    n_folds: usize,
    seed: u64,
    fold_of: Vec<usize>,
}

impl FoldAssignment {
    /// Shuffles each class with a seeded generator, lays the classes out one
    /// after another and deals the sequence round-robin. Fold sizes then
    /// differ by at most one, and so does each class's share of every fold.
    pub fn stratified(labels: &[EmotionClass], n_folds: usize, seed: u64) -> Result<Self> {
        if n_folds < 2 {
            return Err(Error::Validation(format!(
                "need at least 2 folds, got {n_folds}"
            )));
        }
        if labels.len() < n_folds {
            return Err(Error::Validation(format!(
                "{} instances cannot fill {n_folds} folds",
                labels.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order = Vec::with_capacity(labels.len());
        for class in EmotionClass::ALL {
            let mut members: Vec<usize> = labels
                .iter()
                .enumerate()
                .filter(|(_, &l)| l == class)
                .map(|(i, _)| i)
                .collect();
            members.shuffle(&mut rng);
            order.extend(members);
        }
        let mut fold_of = vec![0; labels.len()];
        for (pos, &idx) in order.iter().enumerate() {
            fold_of[idx] = pos % n_folds;
        }
        Ok(FoldAssignment {
            n_folds,
            seed,
            fold_of,
        })
    }

    pub fn n_folds(&self) -> usize {
        self.n_folds
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn fold_of(&self, index: usize) -> usize {
        self.fold_of[index]
    }

    pub fn len(&self) -> usize {
        self.fold_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fold_of.is_empty()
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of[i] != fold)
            .collect()
    }
}

/// Something that can be trained on some rows and score others.
pub trait FoldPredictor: Sync {
    /// Returns one float prediction per `test` index, in order.
    fn predict_fold(&self, train: &[usize], test: &[usize]) -> Result<Vec<f64>>;
}

impl<F> FoldPredictor for F
where
    F: Fn(&[usize], &[usize]) -> Result<Vec<f64>> + Sync,
{
    fn predict_fold(&self, train: &[usize], test: &[usize]) -> Result<Vec<f64>> {
        self(train, test)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub fold: usize,
    pub pcc: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub setup: String,
    pub folds: Vec<FoldOutcome>,
    /// Mean over folds; `None` if any fold failed.
    pub mean_pcc: Option<f64>,
}

impl EvalReport {
    pub fn per_fold_pcc(&self) -> Vec<f64> {
        self.folds.iter().filter_map(|f| f.pcc).collect()
    }

    pub fn failed(&self) -> bool {
        self.mean_pcc.is_none()
    }

    pub fn first_error(&self) -> Option<&str> {
        self.folds.iter().find_map(|f| f.error.as_deref())
    }

    /// A report where the setup failed before any fold ran.
    pub fn failure(setup: impl Into<String>, n_folds: usize, error: &Error) -> Self {
        EvalReport {
            setup: setup.into(),
            folds: (0..n_folds)
                .map(|fold| FoldOutcome {
                    fold,
                    pcc: None,
                    error: Some(error.to_string()),
                })
                .collect(),
            mean_pcc: None,
        }
    }
}

/// Runs every fold (in parallel on the current rayon pool) and correlates the
/// unrounded predictions with the gold labels.
pub fn cross_validate<P: FoldPredictor + ?Sized>(
    setup: impl Into<String>,
    gold: &[EmotionClass],
    predictor: &P,
    folds: &FoldAssignment,
) -> EvalReport {
    assert_eq!(
        gold.len(),
        folds.len(),
        "fold assignment covers a different dataset"
    );
    let outcomes: Vec<FoldOutcome> = (0..folds.n_folds())
        .into_par_iter()
        .map(|fold| {
            let train = folds.train_indices(fold);
            let test = folds.test_indices(fold);
            let result = predictor.predict_fold(&train, &test).and_then(|pred| {
                if pred.len() != test.len() {
                    return Err(Error::Validation(format!(
                        "{} predictions for {} test rows",
                        pred.len(),
                        test.len()
                    )));
                }
                let truth: Vec<f64> = test.iter().map(|&i| gold[i].as_f64()).collect();
                pcc(&pred, &truth)
            });
            match result {
                Ok(p) => FoldOutcome {
                    fold,
                    pcc: Some(p),
                    error: None,
                },
                Err(e) => FoldOutcome {
                    fold,
                    pcc: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let mean_pcc = if outcomes.iter().all(|o| o.pcc.is_some()) {
        let s: f64 = outcomes.iter().filter_map(|o| o.pcc).sum();
        Some(s / outcomes.len() as f64)
    } else {
        None
    };
    EvalReport {
        setup: setup.into(),
        folds: outcomes,
        mean_pcc,
    }
}

/// Mean score over the four emotions.
pub fn average_emotions(scores: &BTreeMap<Emotion, f64>) -> Result<f64> {
    let missing: Vec<&str> = Emotion::ALL
        .iter()
        .filter(|e| !scores.contains_key(e))
        .map(|e| e.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Validation(format!(
            "missing emotions: {}",
            missing.join(", ")
        )));
    }
    Ok(Emotion::ALL.iter().map(|e| scores[e]).sum::<f64>() / 4.0)
}

/// Largest class size over smallest class size.
pub fn imbalance_ratio(dataset: &Dataset) -> Result<f64> {
    class_imbalance(&dataset.class_counts())
}

pub fn class_imbalance(counts: &[usize; 4]) -> Result<f64> {
    let min = *counts.iter().min().expect("four classes");
    let max = *counts.iter().max().expect("four classes");
    if min == 0 {
        return Err(Error::Validation(format!(
            "empty class in counts {counts:?}"
        )));
    }
    Ok(max as f64 / min as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub df: f64,
}

/// Welch's unequal-variance t-test, two-sided.
pub fn ttest_two_sided(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::DegenerateTest(format!(
            "need at least 2 values per sample, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (sa, sb) = (va / na, vb / nb);
    let se2 = sa + sb;
    if se2 == 0.0 {
        return Err(Error::DegenerateTest(
            "both samples have zero variance".into(),
        ));
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    let p = student_t_two_sided_p(t, df);
    Ok(TTest { t, p, df })
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// `P(|T| >= |t|)` for Student's t with `df` degrees of freedom, through the
/// regularized incomplete beta function `I_{df/(df+t^2)}(df/2, 1/2)`.
pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    let x = df / (df + t * t);
    statrs::function::beta::beta_reg(df / 2.0, 0.5, x).clamp(0.0, 1.0)
}
