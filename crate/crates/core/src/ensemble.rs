//! Mean-vote ensembles of wkNN members and rounding to submission labels.

use serde::{Deserialize, Serialize};

use crate::data::EmotionClass;
use crate::error::{Error, Result};
use crate::features::{FeatureSpec, FeatureVector};
use crate::knn::{Aggregation, Neighbor, WknnModel};
use crate::preprocess::CleaningVariant;

/// Neighbour count of a member: fixed, or derived from the training size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum KChoice {
    Fixed(usize),
    RuleOfThumb,
}

impl KChoice {
    pub fn resolve(self, n_train: usize) -> usize {
        match self {
            KChoice::Fixed(k) => k,
            KChoice::RuleOfThumb => crate::knn::rule_of_thumb_k(n_train),
        }
    }
}

impl std::fmt::Display for KChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KChoice::Fixed(k) => write!(f, "{k}"),
            KChoice::RuleOfThumb => f.write_str("auto"),
        }
    }
}

impl Serialize for KChoice {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            KChoice::Fixed(k) => s.serialize_u64(*k as u64),
            KChoice::RuleOfThumb => s.serialize_str("auto"),
        }
    }
}

impl<'de> Deserialize<'de> for KChoice {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(u64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(k) if k % 2 == 1 => Ok(KChoice::Fixed(k as usize)),
            Raw::Num(k) => Err(serde::de::Error::custom(format!("k must be odd, got {k}"))),
            Raw::Str(s) if s == "auto" => Ok(KChoice::RuleOfThumb),
            Raw::Str(s) => Err(serde::de::Error::custom(format!(
                "k must be an odd integer or \"auto\", got {s:?}"
            ))),
        }
    }
}

/// One member of an ensemble.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MemberSpec {
    pub features: FeatureSpec,
    pub cleaning: CleaningVariant,
    pub k: KChoice,
    #[serde(default)]
    pub aggregation: Aggregation,
}

impl MemberSpec {
    /// Short label used in tables and reports.
    pub fn label(&self) -> String {
        format!(
            "{} [{}, k={}, {}]",
            self.features, self.cleaning, self.k, self.aggregation
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    members: Vec<MemberSpec>,
}

impl EnsembleConfig {
    pub fn new(members: Vec<MemberSpec>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::Validation(
                "an ensemble needs at least one member".into(),
            ));
        }
        Ok(EnsembleConfig { members })
    }

    pub fn members(&self) -> &[MemberSpec] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsemblePrediction {
    pub instance_id: String,
    pub member_scores: Vec<f64>,
    pub final_score: f64,
    pub rounded: EmotionClass,
    pub traces: Vec<Vec<Neighbor>>,
}

impl EnsemblePrediction {
    /// Combines per-member results with equal weights.
    pub fn from_members(
        instance_id: impl Into<String>,
        members: Vec<(f64, Vec<Neighbor>)>,
    ) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::Validation("no member predictions".into()));
        }
        let (member_scores, traces): (Vec<f64>, Vec<Vec<Neighbor>>) = members.into_iter().unzip();
        let final_score = mean_vote(&member_scores);
        Ok(EnsemblePrediction {
            instance_id: instance_id.into(),
            rounded: round_label(final_score)?,
            member_scores,
            final_score,
            traces,
        })
    }
}

/// Runs every member model on its own feature vector and averages.
pub fn predict_ensemble(
    instance_id: &str,
    config: &EnsembleConfig,
    models: &[WknnModel],
    features: &[FeatureVector],
) -> Result<EnsemblePrediction> {
    if models.len() != config.len() || features.len() != config.len() {
        return Err(Error::Validation(format!(
            "ensemble has {} members but got {} models and {} feature vectors",
            config.len(),
            models.len(),
            features.len()
        )));
    }
    let results = models
        .iter()
        .zip(features)
        .map(|(m, f)| m.predict(f))
        .collect::<Result<Vec<_>>>()?;
    EnsemblePrediction::from_members(instance_id, results)
}

/// Equal-weight mean of member scores.
///
/// The sum is computed exactly and rounded once, so the result does not
/// depend on member order.
pub fn mean_vote(scores: &[f64]) -> f64 {
    exact_sum(scores) / scores.len() as f64
}

/// Correctly rounded floating-point sum (Shewchuk's non-overlapping partials).
pub fn exact_sum(values: &[f64]) -> f64 {
    let mut partials: Vec<f64> = Vec::new();
    for &v in values {
        let mut x = v;
        let mut kept = 0;
        for j in 0..partials.len() {
            let mut y = partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[kept] = lo;
                kept += 1;
            }
            x = hi;
        }
        partials.truncate(kept);
        partials.push(x);
    }
    // Sum partials from the top, correcting the final rounding (as in fsum).
    let Some(mut hi) = partials.pop() else {
        return 0.0;
    };
    let mut lo = 0.0;
    while let Some(y) = partials.pop() {
        let x = hi;
        hi = x + y;
        let yr = hi - x;
        lo = y - yr;
        if lo != 0.0 {
            break;
        }
    }
    if let Some(&next) = partials.last() {
        if (lo < 0.0 && next < 0.0) || (lo > 0.0 && next > 0.0) {
            let y = lo * 2.0;
            let x = hi + y;
            if y == x - hi {
                hi = x;
            }
        }
    }
    hi
}

/// Nearest class; exact halves round up.
pub fn round_label(score: f64) -> Result<EmotionClass> {
    if !(0.0..=3.0).contains(&score) {
        return Err(Error::Validation(format!("score {score} outside [0, 3]")));
    }
    EmotionClass::new((score + 0.5).floor() as i64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knn::Aggregation;

    #[test]
    fn rounding() {
        assert_eq!(round_label(2.4).unwrap().value(), 2);
        assert_eq!(round_label(1.5).unwrap().value(), 2);
        assert_eq!(round_label(0.0).unwrap().value(), 0);
        assert_eq!(round_label(0.5).unwrap().value(), 1);
        assert_eq!(round_label(2.5).unwrap().value(), 3);
        assert_eq!(round_label(3.0).unwrap().value(), 3);
        assert_eq!(round_label(0.49999999).unwrap().value(), 0);
        assert!(round_label(-0.01).is_err());
        assert!(round_label(3.01).is_err());
        assert!(round_label(f64::NAN).is_err());
    }

    #[test]
    fn means() {
        assert_eq!(mean_vote(&[2.4]), 2.4);
        assert_eq!(mean_vote(&[0.0, 3.0]), 1.5);
        let seven = [2.0, 2.6, 2.2, 2.4, 2.8, 2.4, 2.4];
        assert_eq!(mean_vote(&seven), 2.4);
    }

    #[test]
    fn exact_sum_cases() {
        assert_eq!(exact_sum(&[]), 0.0);
        assert_eq!(exact_sum(&[1e100, 1.0, -1e100]), 1.0);
        assert_eq!(exact_sum(&[0.1; 10]), 1.0);
        assert_eq!(exact_sum(&[1.0, 1e-16, 1e-16]), 1.0000000000000002);
    }

    fn tiny_model(rows: Vec<Vec<f64>>, labels: &[i64], k: usize) -> WknnModel {
        let ids = (0..rows.len()).map(|i| format!("r{i}")).collect();
        let labels = labels
            .iter()
            .map(|&l| EmotionClass::new(l).unwrap())
            .collect();
        WknnModel::new(rows, ids, labels, k, Aggregation::WeightedMean).unwrap()
    }

    fn member(k: usize) -> MemberSpec {
        MemberSpec {
            features: "emb:m".parse().unwrap(),
            cleaning: CleaningVariant::Raw,
            k: KChoice::Fixed(k),
            aggregation: Aggregation::WeightedMean,
        }
    }

    #[test]
    fn predict_ensemble_averages_members() {
        let a = tiny_model(vec![vec![1.0, 0.0], vec![0.0, 1.0]], &[0, 3], 1);
        let b = tiny_model(vec![vec![1.0], vec![-1.0]], &[3, 0], 1);
        let cfg = EnsembleConfig::new(vec![member(1), member(1)]).unwrap();
        let p = predict_ensemble(
            "q",
            &cfg,
            &[a.clone(), b.clone()],
            &[vec![1.0, 0.1], vec![2.0]],
        )
        .unwrap();
        assert_eq!(p.member_scores, vec![0.0, 3.0]);
        assert_eq!(p.final_score, 1.5);
        assert_eq!(p.rounded.value(), 2);
        assert_eq!(p.traces.len(), 2);
        assert!(predict_ensemble("q", &cfg, &[a], &[vec![1.0, 0.0]]).is_err());
    }

    #[test]
    fn empty_ensemble_rejected() {
        assert!(EnsembleConfig::new(vec![]).is_err());
    }

    #[test]
    fn k_choice_serde() {
        #[derive(Deserialize)]
        struct W {
            k: KChoice,
        }
        assert_eq!(toml::from_str::<W>("k = 7").unwrap().k, KChoice::Fixed(7));
        assert_eq!(
            toml::from_str::<W>("k = \"auto\"").unwrap().k,
            KChoice::RuleOfThumb
        );
        assert!(toml::from_str::<W>("k = 8").is_err());
        assert_eq!(KChoice::RuleOfThumb.resolve(2000), 23);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn mean_is_order_free_and_bounded(mut s in prop::collection::vec(0.0f64..=3.0, 1..12), r in any::<usize>()) {
                let m = mean_vote(&s);
                let lo = s.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(m >= lo && m <= hi);
                let naive = s.iter().sum::<f64>() / s.len() as f64;
                prop_assert!((m - naive).abs() < 1e-12);
                let n = s.len();
                s.rotate_left(r % n);
                s.reverse();
                prop_assert_eq!(mean_vote(&s), m);
            }

            #[test]
            fn rounding_is_monotone(a in 0.0f64..=3.0, b in 0.0f64..=3.0) {
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                prop_assert!(round_label(lo).unwrap() <= round_label(hi).unwrap());
                prop_assert!((round_label(a).unwrap().as_f64() - a).abs() <= 0.5);
            }
        }
    }
}
