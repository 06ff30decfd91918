//! Task data: the four-column TSV distribution of the EI-oc task, datasets,
//! merging, and submission output.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Header written to every submission file.
pub const SUBMISSION_HEADER: &str = "ID\tTweet\tAffect Dimension\tIntensity Class";

/// One of the four ordinal intensity levels, 0 (none) to 3 (high).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct EmotionClass(u8);

impl EmotionClass {
    pub const ALL: [EmotionClass; 4] = [
        EmotionClass(0),
        EmotionClass(1),
        EmotionClass(2),
        EmotionClass(3),
    ];

    pub fn new(value: i64) -> Result<Self> {
        if (0..=3).contains(&value) {
            Ok(EmotionClass(value as u8))
        } else {
            Err(Error::Validation(format!(
                "emotion class must be in 0..=3, got {value}"
            )))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.0)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// The canonical intensity description used in the distributed files,
    /// e.g. `2: moderate amount of anger can be inferred`.
    pub fn describe(self, emotion: Emotion) -> String {
        let amount = match self.0 {
            0 => "no",
            1 => "low amount of",
            2 => "moderate amount of",
            _ => "high amount of",
        };
        format!("{}: {} {} can be inferred", self.0, amount, emotion)
    }
}

impl TryFrom<u8> for EmotionClass {
    type Error = Error;

    fn try_from(value: u8) -> Result<Self> {
        EmotionClass::new(i64::from(value))
    }
}

impl From<EmotionClass> for u8 {
    fn from(c: EmotionClass) -> u8 {
        c.0
    }
}

impl fmt::Display for EmotionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emotion {
    Anger,
    Fear,
    Joy,
    Sadness,
}

impl Emotion {
    pub const ALL: [Emotion; 4] = [
        Emotion::Anger,
        Emotion::Fear,
        Emotion::Joy,
        Emotion::Sadness,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Emotion::Anger => "anger",
            Emotion::Fear => "fear",
            Emotion::Joy => "joy",
            Emotion::Sadness => "sadness",
        }
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Emotion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "anger" => Ok(Emotion::Anger),
            "fear" => Ok(Emotion::Fear),
            "joy" => Ok(Emotion::Joy),
            "sadness" => Ok(Emotion::Sadness),
            other => Err(Error::Validation(format!("unknown emotion {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
    Merged,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledInstance {
    pub id: String,
    /// Raw tweet text, stored verbatim.
    pub text: String,
    pub emotion: Emotion,
    /// `None` for unlabeled test rows.
    pub label: Option<EmotionClass>,
}

/// An ordered collection of instances for one emotion.
///
/// Instance order is load order and is never changed; neighbour tie-breaking
/// and fold assignment both depend on it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    /// `None` only while the dataset is empty and no emotion was declared.
    pub emotion: Option<Emotion>,
    pub split: Split,
    instances: Vec<LabeledInstance>,
}

impl Dataset {
    pub fn new(
        emotion: Option<Emotion>,
        split: Split,
        instances: Vec<LabeledInstance>,
    ) -> Result<Self> {
        let mut emotion = emotion;
        let mut seen = HashSet::with_capacity(instances.len());
        for inst in &instances {
            if inst.id.is_empty() {
                return Err(Error::Validation("instance with empty id".into()));
            }
            if inst.text.is_empty() {
                return Err(Error::Validation(format!(
                    "instance {} has empty text",
                    inst.id
                )));
            }
            if !seen.insert(inst.id.as_str()) {
                return Err(Error::Validation(format!("duplicate id {}", inst.id)));
            }
            match emotion {
                None => emotion = Some(inst.emotion),
                Some(e) if e != inst.emotion => {
                    return Err(Error::Validation(format!(
                        "instance {} has emotion {} but dataset is {}",
                        inst.id, inst.emotion, e
                    )))
                }
                Some(_) => {}
            }
        }
        Ok(Dataset {
            emotion,
            split,
            instances,
        })
    }

    pub fn instances(&self) -> &[LabeledInstance] {
        &self.instances
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&LabeledInstance> {
        self.instances.get(index)
    }

    /// Gold labels in dataset order; fails if any instance is unlabeled.
    pub fn labels(&self) -> Result<Vec<EmotionClass>> {
        self.instances
            .iter()
            .map(|i| {
                i.label
                    .ok_or_else(|| Error::Validation(format!("instance {} has no label", i.id)))
            })
            .collect()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.instances.iter().map(|i| i.id.as_str())
    }

    /// Checks the dataset belongs to `expected` (an empty dataset adopts it).
    pub fn expect_emotion(&mut self, expected: Emotion) -> Result<()> {
        match self.emotion {
            Some(e) if e != expected => Err(Error::Validation(format!(
                "dataset holds {e} instances, expected {expected}"
            ))),
            _ => {
                self.emotion = Some(expected);
                Ok(())
            }
        }
    }

    /// Per-class instance counts (classes 0..=3); unlabeled rows are ignored.
    pub fn class_counts(&self) -> [usize; 4] {
        let mut counts = [0usize; 4];
        for inst in &self.instances {
            if let Some(l) = inst.label {
                counts[l.index()] += 1;
            }
        }
        counts
    }
}

/// Parses one task file. Line 1 is always treated as a header.
pub fn parse_dataset(path: impl AsRef<Path>, split: Split) -> Result<Dataset> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset_str(&content, split, &path.display().to_string())
}

/// Parses TSV content; `origin` is only used in error messages.
pub fn parse_dataset_str(content: &str, split: Split, origin: &str) -> Result<Dataset> {
    let mut instances = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();

    for (idx, raw_line) in content.split('\n').enumerate().skip(1) {
        let line_no = idx + 1;
        let line = raw_line.strip_suffix('\r').unwrap_or(raw_line);
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(Error::parse(
                origin,
                line_no,
                format!("expected 4 tab-separated columns, found {}", cols.len()),
            ));
        }
        let id = cols[0];
        if id.is_empty() {
            return Err(Error::parse(origin, line_no, "empty id"));
        }
        if cols[1].is_empty() {
            return Err(Error::parse(origin, line_no, "empty tweet text"));
        }
        let emotion: Emotion = cols[2]
            .parse()
            .map_err(|e: Error| Error::parse(origin, line_no, e.to_string()))?;
        let label = parse_label(cols[3], split).map_err(|m| Error::parse(origin, line_no, m))?;
        if let Some(first) = seen.insert(id.to_string(), line_no) {
            return Err(Error::Validation(format!(
                "{origin}: duplicate id {id} on lines {first} and {line_no}"
            )));
        }
        instances.push(LabeledInstance {
            id: id.to_string(),
            text: cols[1].to_string(),
            emotion,
            label,
        });
    }

    Dataset::new(None, split, instances).map_err(|e| match e {
        Error::Validation(m) => Error::Validation(format!("{origin}: {m}")),
        other => other,
    })
}

fn parse_label(field: &str, split: Split) -> std::result::Result<Option<EmotionClass>, String> {
    let field = field.trim();
    if field == "NONE" {
        return if split == Split::Test {
            Ok(None)
        } else {
            Err("label NONE is only allowed in test files".into())
        };
    }
    let prefix = field.split(':').next().unwrap_or("").trim();
    let value: i64 = prefix
        .parse()
        .map_err(|_| format!("unparsable intensity class {field:?}"))?;
    EmotionClass::new(value)
        .map(Some)
        .map_err(|e| e.to_string())
}

/// Appends `dev` after `train`, preserving both orders.
pub fn merge(train: &Dataset, dev: &Dataset) -> Result<Dataset> {
    let emotion = match (train.emotion, dev.emotion) {
        (Some(a), Some(b)) if a != b => {
            return Err(Error::Validation(format!(
                "cannot merge {a} dataset with {b} dataset"
            )))
        }
        (a, b) => a.or(b),
    };
    let instances = train
        .instances
        .iter()
        .chain(dev.instances.iter())
        .cloned()
        .collect();
    Dataset::new(emotion, Split::Merged, instances)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub raw_score: f64,
    pub rounded_label: EmotionClass,
}

impl PredictionRecord {
    pub fn new(id: impl Into<String>, raw_score: f64) -> Result<Self> {
        let rounded_label = crate::ensemble::round_label(raw_score)?;
        Ok(PredictionRecord {
            id: id.into(),
            raw_score,
            rounded_label,
        })
    }
}

/// Renders a submission file mirroring `template`, with the intensity column
/// replaced by the rounded prediction and its canonical description.
pub fn render_predictions(records: &[PredictionRecord], template: &Dataset) -> Result<String> {
    let by_id: HashMap<&str, &PredictionRecord> =
        records.iter().map(|r| (r.id.as_str(), r)).collect();
    let template_ids: HashSet<&str> = template.ids().collect();

    let missing: Vec<&str> = template
        .ids()
        .filter(|id| !by_id.contains_key(id))
        .collect();
    let mut extra: Vec<&str> = records
        .iter()
        .map(|r| r.id.as_str())
        .filter(|id| !template_ids.contains(id))
        .collect();
    extra.dedup();
    if !missing.is_empty() || !extra.is_empty() || by_id.len() != records.len() {
        let mut msg = String::from("prediction ids do not match template");
        if !missing.is_empty() {
            msg.push_str(&format!("; missing: {}", missing.join(", ")));
        }
        if !extra.is_empty() {
            msg.push_str(&format!("; not in template: {}", extra.join(", ")));
        }
        if by_id.len() != records.len() {
            msg.push_str("; duplicate prediction ids");
        }
        return Err(Error::Validation(msg));
    }

    let mut out = String::from(SUBMISSION_HEADER);
    out.push('\n');
    for inst in template.instances() {
        let rec = by_id[inst.id.as_str()];
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            inst.id,
            inst.text,
            inst.emotion,
            rec.rounded_label.describe(inst.emotion)
        ));
    }
    Ok(out)
}

pub fn write_predictions(
    records: &[PredictionRecord],
    template: &Dataset,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let body = render_predictions(records, template)?;
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(body.as_bytes()).map_err(|e| Error::io(path, e))
}
