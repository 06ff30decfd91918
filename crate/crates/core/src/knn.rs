//! Cosine similarity and the weighted k-nearest-neighbour predictor.
//!
//! Similarity is the cosine mapped onto `[0, 1]`; the `k` most similar
//! training rows vote with their similarities as weights. Every prediction
//! returns its neighbour trace so it can be explained afterwards.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::EmotionClass;
use crate::error::{Error, Result};
use crate::features::FeatureVector;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn check_widths(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Validation(format!(
            "vector widths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

fn cosine_with_norms(a: &[f64], b: &[f64], na: f64, nb: f64) -> f64 {
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot(a, b) / (na * nb)).clamp(-1.0, 1.0)
}

/// Cosine of the angle between `a` and `b`; zero if either has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    check_widths(a, b)?;
    Ok(cosine_with_norms(a, b, norm(a), norm(b)))
}

/// `(1 + cosine) / 2`, a similarity in `[0, 1]`.
pub fn cos_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    Ok((1.0 + cosine(a, b)?) / 2.0)
}

/// `sqrt(n) / 2` rounded to the nearest odd integer, halves rounding up.
pub fn rule_of_thumb_k(n: usize) -> usize {
    let target = (n as f64).sqrt() / 2.0;
    let m = ((target - 1.0) / 2.0 + 0.5).floor().max(0.0);
    2 * (m as usize) + 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Similarity-weighted mean of neighbour labels (a real score).
    #[default]
    WeightedMean,
    /// Class with the largest similarity mass (plain counts when all
    /// similarities are zero); ties go to the lower class.
    WeightedMajority,
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregation::WeightedMean => "weighted_mean",
            Aggregation::WeightedMajority => "weighted_majority",
        })
    }
}

impl FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weighted_mean" => Ok(Aggregation::WeightedMean),
            "weighted_majority" => Ok(Aggregation::WeightedMajority),
            _ => Err(Error::Validation(format!("unknown aggregation {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub train_index: usize,
    pub train_id: String,
    pub similarity: f64,
    pub label: EmotionClass,
}

/// A frozen training set answering similarity queries.
#[derive(Debug, Clone)]
pub struct WknnModel {
    matrix: Vec<FeatureVector>,
    norms: Vec<f64>,
    ids: Vec<String>,
    labels: Vec<EmotionClass>,
    k: usize,
    aggregation: Aggregation,
}

impl WknnModel {
    /// `ids` name the training rows in traces; `k` must be odd and at most
    /// the number of rows.
    pub fn new(
        matrix: Vec<FeatureVector>,
        ids: Vec<String>,
        labels: Vec<EmotionClass>,
        k: usize,
        aggregation: Aggregation,
    ) -> Result<Self> {
        if matrix.len() != labels.len() || matrix.len() != ids.len() {
            return Err(Error::Validation(format!(
                "{} vectors, {} ids, {} labels",
                matrix.len(),
                ids.len(),
                labels.len()
            )));
        }
        if k == 0 || k.is_multiple_of(2) {
            return Err(Error::Validation(format!(
                "k must be a positive odd number, got {k}"
            )));
        }
        if k > matrix.len() {
            return Err(Error::Validation(format!(
                "k = {k} exceeds the {} training instances",
                matrix.len()
            )));
        }
        let width = matrix[0].len();
        if let Some(pos) = matrix.iter().position(|v| v.len() != width) {
            return Err(Error::Validation(format!(
                "training vector {pos} has width {}, expected {width}",
                matrix[pos].len()
            )));
        }
        let norms = matrix.iter().map(|v| norm(v)).collect();
        Ok(WknnModel {
            matrix,
            norms,
            ids,
            labels,
            k,
            aggregation,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn aggregation(&self) -> Aggregation {
        self.aggregation
    }

    pub fn width(&self) -> usize {
        self.matrix[0].len()
    }

    pub fn len(&self) -> usize {
        self.matrix.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.is_empty()
    }

    /// The `k` most similar training rows, most similar first; equal
    /// similarities keep training order.
    pub fn neighbors(&self, query: &[f64]) -> Result<Vec<Neighbor>> {
        if query.len() != self.width() {
            return Err(Error::Validation(format!(
                "query width {} does not match model width {}",
                query.len(),
                self.width()
            )));
        }
        let qn = norm(query);
        let mut scored: Vec<(f64, usize)> = self
            .matrix
            .iter()
            .zip(&self.norms)
            .enumerate()
            .map(|(i, (row, &rn))| ((1.0 + cosine_with_norms(query, row, qn, rn)) / 2.0, i))
            .collect();
        let by_rank = |a: &(f64, usize), b: &(f64, usize)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
        if self.k < scored.len() {
            scored.select_nth_unstable_by(self.k - 1, by_rank);
            scored.truncate(self.k);
        }
        scored.sort_unstable_by(by_rank);
        Ok(scored
            .into_iter()
            .map(|(similarity, i)| Neighbor {
                train_index: i,
                train_id: self.ids[i].clone(),
                similarity,
                label: self.labels[i],
            })
            .collect())
    }

    /// Score in `[0, 3]` plus the neighbour trace it came from.
    pub fn predict(&self, query: &[f64]) -> Result<(f64, Vec<Neighbor>)> {
        let trace = self.neighbors(query)?;
        Ok((aggregate(&trace, self.aggregation), trace))
    }
}

/// Combines a neighbour trace into a score.
pub fn aggregate(trace: &[Neighbor], aggregation: Aggregation) -> f64 {
    match aggregation {
        Aggregation::WeightedMean => {
            let total: f64 = trace.iter().map(|n| n.similarity).sum();
            let mean = if total > 0.0 {
                trace
                    .iter()
                    .map(|n| n.similarity * n.label.as_f64())
                    .sum::<f64>()
                    / total
            } else {
                trace.iter().map(|n| n.label.as_f64()).sum::<f64>() / trace.len() as f64
            };
            // Rounding can step just outside the label range of the trace.
            let lo = trace
                .iter()
                .map(|n| n.label.as_f64())
                .fold(f64::INFINITY, f64::min);
            let hi = trace
                .iter()
                .map(|n| n.label.as_f64())
                .fold(f64::NEG_INFINITY, f64::max);
            mean.clamp(lo, hi)
        }
        Aggregation::WeightedMajority => {
            let mut mass = [0.0f64; 4];
            for n in trace {
                mass[n.label.index()] += n.similarity;
            }
            if mass.iter().all(|&m| m == 0.0) {
                for n in trace {
                    mass[n.label.index()] += 1.0;
                }
            }
            let mut best = 0;
            for c in 1..4 {
                if mass[c].partial_cmp(&mass[best]) == Some(Ordering::Greater) {
                    best = c;
                }
            }
            best as f64
        }
    }
}
