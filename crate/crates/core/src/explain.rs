//! Explanations built from neighbour traces: per-member class histograms,
//! neighbours shared across members, and rendered reports.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, EmotionClass};
use crate::ensemble::EnsemblePrediction;
use crate::error::{Error, Result};
use crate::knn::Neighbor;

/// How many of a member's neighbours fall in each class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassHistogram {
    pub model: String,
    pub k: usize,
    pub counts: [usize; 4],
}

pub fn class_histogram(model: impl Into<String>, trace: &[Neighbor]) -> ClassHistogram {
    let mut counts = [0usize; 4];
    for n in trace {
        counts[n.label.index()] += 1;
    }
    ClassHistogram {
        model: model.into(),
        k: trace.len(),
        counts,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharedNeighbor {
    pub train_id: String,
    /// Number of members whose top-k contains this instance.
    pub count: usize,
    pub members: Vec<String>,
    pub class: EmotionClass,
    pub text: Option<String>,
}

/// Training instances chosen by the ensemble members, most shared first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntersectionReport {
    pub n_members: usize,
    pub entries: Vec<SharedNeighbor>,
}

impl IntersectionReport {
    /// Fills in training tweet texts from the dataset the models were fit on.
    pub fn attach_texts(&mut self, train: &Dataset) {
        let texts: BTreeMap<&str, &str> = train
            .instances()
            .iter()
            .map(|i| (i.id.as_str(), i.text.as_str()))
            .collect();
        for e in &mut self.entries {
            e.text = texts.get(e.train_id.as_str()).map(|t| t.to_string());
        }
    }

    pub fn shared(&self) -> impl Iterator<Item = &SharedNeighbor> {
        self.entries.iter().filter(|e| e.count > 1)
    }
}

/// Counts, for every training id in any trace, how many distinct members
/// selected it. Sorted by count descending, then id.
pub fn neighbor_intersection(traces: &[(String, Vec<Neighbor>)]) -> IntersectionReport {
    let mut by_id: BTreeMap<&str, (BTreeSet<usize>, EmotionClass)> = BTreeMap::new();
    for (m, (_, trace)) in traces.iter().enumerate() {
        for n in trace {
            by_id
                .entry(n.train_id.as_str())
                .or_insert_with(|| (BTreeSet::new(), n.label))
                .0
                .insert(m);
        }
    }
    let mut entries: Vec<SharedNeighbor> = by_id
        .into_iter()
        .map(|(id, (members, class))| SharedNeighbor {
            train_id: id.to_string(),
            count: members.len(),
            members: members.iter().map(|&m| traces[m].0.clone()).collect(),
            class,
            text: None,
        })
        .collect();
    entries.sort_by(|a, b| {
        b.count
            .cmp(&a.count)
            .then_with(|| a.train_id.cmp(&b.train_id))
    });
    IntersectionReport {
        n_members: traces.len(),
        entries,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberSummary {
    pub model: String,
    pub score: f64,
    pub histogram: ClassHistogram,
}

/// Machine-readable explanation of one ensemble prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationReport {
    pub instance_id: String,
    pub text: Option<String>,
    pub gold: Option<EmotionClass>,
    pub final_score: f64,
    pub rounded: EmotionClass,
    pub members: Vec<MemberSummary>,
    pub intersection: IntersectionReport,
}

impl ExplanationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s)
            .map_err(|e| Error::Validation(format!("bad explanation report: {e}")))
    }

    /// Plain-text rendering for people.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "Instance {}", self.instance_id);
        if let Some(t) = &self.text {
            let _ = writeln!(out, "  text: {t}");
        }
        if let Some(g) = self.gold {
            let _ = writeln!(out, "  gold: {g}");
        }
        let _ = writeln!(
            out,
            "  prediction: {} -> label {}",
            fmt_score(self.final_score),
            self.rounded
        );
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "  {:<40} {:>3} {:>7}   0   1   2   3",
            "member", "k", "score"
        );
        for m in &self.members {
            let c = m.histogram.counts;
            let _ = writeln!(
                out,
                "  {:<40} {:>3} {:>7} {:>3} {:>3} {:>3} {:>3}",
                m.model,
                m.histogram.k,
                fmt_score(m.score),
                c[0],
                c[1],
                c[2],
                c[3]
            );
        }
        let _ = writeln!(out);
        let shared: Vec<&SharedNeighbor> = self.intersection.shared().collect();
        if shared.is_empty() {
            let _ = writeln!(out, "  no shared neighbors");
        } else {
            let _ = writeln!(
                out,
                "  shared neighbors ({} members):",
                self.intersection.n_members
            );
            for e in shared {
                let _ = writeln!(
                    out,
                    "    {} chosen by {}/{}  class {}  {}",
                    e.train_id,
                    e.count,
                    self.intersection.n_members,
                    e.class,
                    e.text.as_deref().unwrap_or("")
                );
            }
        }
        out
    }
}

fn fmt_score(x: f64) -> String {
    let s = format!("{x:.4}");
    let s = s.trim_end_matches('0');
    match s.strip_suffix('.') {
        Some(int) => format!("{int}.0"),
        None => s.to_string(),
    }
}

/// Assembles the report for one prediction. `histograms` must follow the
/// member order of `prediction`.
pub fn render_explanation(
    prediction: &EnsemblePrediction,
    histograms: &[ClassHistogram],
    intersection: &IntersectionReport,
) -> Result<ExplanationReport> {
    if histograms.len() != prediction.member_scores.len() {
        return Err(Error::Validation(format!(
            "{} histograms for {} members",
            histograms.len(),
            prediction.member_scores.len()
        )));
    }
    Ok(ExplanationReport {
        instance_id: prediction.instance_id.clone(),
        text: None,
        gold: None,
        final_score: prediction.final_score,
        rounded: prediction.rounded,
        members: histograms
            .iter()
            .zip(&prediction.member_scores)
            .map(|(h, &score)| MemberSummary {
                model: h.model.clone(),
                score,
                histogram: h.clone(),
            })
            .collect(),
        intersection: intersection.clone(),
    })
}

/// Histograms, intersection and report in one step, naming members by
/// `member_names`.
pub fn explain_prediction(
    prediction: &EnsemblePrediction,
    member_names: &[String],
    train: Option<&Dataset>,
) -> Result<ExplanationReport> {
    if member_names.len() != prediction.traces.len() {
        return Err(Error::Validation("member names do not match traces".into()));
    }
    let histograms: Vec<ClassHistogram> = member_names
        .iter()
        .zip(&prediction.traces)
        .map(|(n, t)| class_histogram(n.clone(), t))
        .collect();
    let named: Vec<(String, Vec<Neighbor>)> = member_names
        .iter()
        .cloned()
        .zip(prediction.traces.iter().cloned())
        .collect();
    let mut inter = neighbor_intersection(&named);
    if let Some(train) = train {
        inter.attach_texts(train);
    }
    render_explanation(prediction, &histograms, &inter)
}
