//! Topic, emotion and sentiment probabilities produced by the sidecar
//! classifiers, turned into per-text features and per-corpus summaries.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{ArtifactKind, Corpus, SidecarBundle, Variant};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::stats::{argmax, mean, quantile_sorted};

const SOFTMAX_TOLERANCE: f64 = 1e-6;

/// Pinned label sets of the three classifier heads.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelVocabulary {
    pub version: String,
    pub topics: Vec<String>,
    pub emotions: Vec<String>,
    pub sentiments: Vec<String>,
    /// Emotions counted as positive for `argmax_emotion_is_positive`.
    pub positive_emotions: Vec<String>,
}

impl Default for LabelVocabulary {
    fn default() -> Self {
        let owned = |v: &[&str]| v.iter().map(|s| s.to_string()).collect();
        LabelVocabulary {
            version: "tweeteval-2022".into(),
            topics: owned(&[
                "arts_&_culture",
                "business_&_entrepreneurs",
                "celebrity_&_pop_culture",
                "diaries_&_daily_life",
                "family",
                "fashion_&_style",
                "film_tv_&_video",
                "fitness_&_health",
                "food_&_dining",
                "gaming",
                "learning_&_educational",
                "music",
                "news_&_social_concern",
                "other_hobbies",
                "relationships",
                "science_&_technology",
                "sports",
                "travel_&_adventure",
                "youth_&_student_life",
            ]),
            emotions: owned(&["anger", "joy", "optimism", "sadness"]),
            sentiments: owned(&["negative", "neutral", "positive"]),
            positive_emotions: owned(&["joy", "optimism"]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Head {
    Topic,
    Emotion,
    Sentiment,
}

impl Head {
    pub const ALL: [Head; 3] = [Head::Topic, Head::Emotion, Head::Sentiment];

    pub fn key(self) -> &'static str {
        match self {
            Head::Topic => "topic",
            Head::Emotion => "emotion",
            Head::Sentiment => "sentiment",
        }
    }

    fn labels(self, vocab: &LabelVocabulary) -> &[String] {
        match self {
            Head::Topic => &vocab.topics,
            Head::Emotion => &vocab.emotions,
            Head::Sentiment => &vocab.sentiments,
        }
    }

    /// Emotion and sentiment are softmax heads; topics are independent
    /// sigmoid scores.
    fn is_softmax(self) -> bool {
        !matches!(self, Head::Topic)
    }
}

/// Probabilities in vocabulary order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticLabels {
    pub topic_probs: Vec<f64>,
    pub emotion_probs: Vec<f64>,
    pub sentiment_probs: Vec<f64>,
}

impl SemanticLabels {
    pub fn head(&self, head: Head) -> &[f64] {
        match head {
            Head::Topic => &self.topic_probs,
            Head::Emotion => &self.emotion_probs,
            Head::Sentiment => &self.sentiment_probs,
        }
    }

    pub fn to_json(&self, vocab: &LabelVocabulary) -> serde_json::Value {
        let mut obj = serde_json::Map::new();
        for head in Head::ALL {
            let map: serde_json::Map<String, serde_json::Value> = head
                .labels(vocab)
                .iter()
                .zip(self.head(head))
                .map(|(l, p)| (l.clone(), serde_json::json!(p)))
                .collect();
            obj.insert(head.key().into(), map.into());
        }
        obj.into()
    }

    /// Shannon entropy (nats) of the renormalized topic scores; `None` when
    /// every score is zero.
    pub fn topic_entropy(&self) -> Option<f64> {
        let total: f64 = self.topic_probs.iter().sum();
        if total <= 0.0 {
            return None;
        }
        Some(
            -self
                .topic_probs
                .iter()
                .map(|p| p / total)
                .filter(|q| *q > 0.0)
                .map(|q| q * q.ln())
                .sum::<f64>(),
        )
    }
}

pub fn parse_labels(value: &serde_json::Value, vocab: &LabelVocabulary, origin: &Path) -> Result<SemanticLabels> {
    let fail = |message: String| Error::Labels {
        path: origin.to_path_buf(),
        message,
    };
    let obj = value.as_object().ok_or_else(|| fail("expected a JSON object".into()))?;
    let mut heads: BTreeMap<Head, Vec<f64>> = BTreeMap::new();
    for head in Head::ALL {
        let map = obj
            .get(head.key())
            .and_then(|v| v.as_object())
            .ok_or_else(|| fail(format!("missing key `{}`", head.key())))?;
        let labels = head.labels(vocab);
        if let Some(unknown) = map.keys().find(|k| !labels.contains(k)) {
            return Err(fail(format!("unknown {} label `{unknown}`", head.key())));
        }
        let mut probs = Vec::with_capacity(labels.len());
        for label in labels {
            let p = map
                .get(label)
                .ok_or_else(|| fail(format!("missing {} label `{label}`", head.key())))?
                .as_f64()
                .ok_or_else(|| fail(format!("{} label `{label}` is not a number", head.key())))?;
            if !(0.0..=1.0).contains(&p) {
                return Err(fail(format!("{} probability {p} for `{label}` outside [0, 1]", head.key())));
            }
            probs.push(p);
        }
        if head.is_softmax() {
            let sum: f64 = probs.iter().sum();
            if (sum - 1.0).abs() > SOFTMAX_TOLERANCE {
                return Err(fail(format!("{} not normalized (sum {sum})", head.key())));
            }
        }
        heads.insert(head, probs);
    }
    Ok(SemanticLabels {
        topic_probs: heads.remove(&Head::Topic).unwrap(),
        emotion_probs: heads.remove(&Head::Emotion).unwrap(),
        sentiment_probs: heads.remove(&Head::Sentiment).unwrap(),
    })
}

pub fn load_labels(path: impl AsRef<Path>, vocab: &LabelVocabulary) -> Result<SemanticLabels> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&content).map_err(|e| Error::Labels {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    parse_labels(&value, vocab, path)
}

/// Probabilities per head, then `argmax_emotion_is_positive` and
/// `topic_entropy`.
pub fn semantic_columns(vocab: &LabelVocabulary) -> Vec<String> {
    let mut cols = Vec::new();
    for head in Head::ALL {
        cols.extend(head.labels(vocab).iter().map(|l| format!("{}_{l}", head.key())));
    }
    cols.push("argmax_emotion_is_positive".into());
    cols.push("topic_entropy".into());
    cols
}

pub fn semantic_row(labels: &SemanticLabels, vocab: &LabelVocabulary) -> Vec<Option<f64>> {
    let mut row: Vec<Option<f64>> = Head::ALL
        .iter()
        .flat_map(|h| labels.head(*h).iter().copied().map(Some))
        .collect();
    let positive = argmax(&labels.emotion_probs)
        .map(|i| vocab.positive_emotions.contains(&vocab.emotions[i]));
    row.push(positive.map(|p| if p { 1.0 } else { 0.0 }));
    row.push(labels.topic_entropy());
    row
}

pub fn extract_semantic(
    corpus: &Corpus,
    bundle: &SidecarBundle,
    vocab: &LabelVocabulary,
    strict: bool,
) -> Result<FeatureMatrix> {
    let keys = corpus.keys();
    if strict {
        bundle.require(ArtifactKind::Labels, &keys)?;
    }
    let columns = semantic_columns(vocab);
    let width = columns.len();
    let rows: Vec<Vec<Option<f64>>> = keys
        .par_iter()
        .map(|key| match bundle.get(ArtifactKind::Labels, key) {
            Some(path) => Ok(semantic_row(&load_labels(path, vocab)?, vocab)),
            None => {
                warn!("no semantic labels for {key}");
                Ok(vec![None; width])
            }
        })
        .collect::<Result<_>>()?;
    let mut m = FeatureMatrix::new(columns);
    for (key, row) in keys.into_iter().zip(rows) {
        m.push_row(key, row)?;
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelStat {
    pub variant: Variant,
    pub head: Head,
    pub label: String,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    /// Share of texts whose highest-scoring label in this head is `label`.
    pub argmax_share: f64,
}

/// Box-plot statistics per label over texts with defined labels.
pub fn corpus_label_stats(matrix: &FeatureMatrix, variant: Variant, vocab: &LabelVocabulary) -> Result<Vec<LabelStat>> {
    let mut out = Vec::new();
    for head in Head::ALL {
        let labels = head.labels(vocab);
        let idx: Vec<usize> = labels
            .iter()
            .map(|l| {
                let name = format!("{}_{l}", head.key());
                matrix
                    .column_index(&name)
                    .ok_or_else(|| Error::InvalidArgument(format!("matrix lacks column `{name}`")))
            })
            .collect::<Result<_>>()?;
        let rows: Vec<Vec<f64>> = (0..matrix.n_rows())
            .filter_map(|r| idx.iter().map(|&c| matrix.get(r, c)).collect::<Option<Vec<f64>>>())
            .collect();
        let mut argmax_counts = vec![0usize; labels.len()];
        for row in &rows {
            if let Some(i) = argmax(row) {
                argmax_counts[i] += 1;
            }
        }
        for (j, label) in labels.iter().enumerate() {
            let mut values: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            values.sort_by(f64::total_cmp);
            let q = |p| quantile_sorted(&values, p).unwrap_or(f64::NAN);
            out.push(LabelStat {
                variant,
                head,
                label: label.clone(),
                mean: mean(&values).unwrap_or(f64::NAN),
                median: q(0.5),
                q1: q(0.25),
                q3: q(0.75),
                argmax_share: if rows.is_empty() {
                    0.0
                } else {
                    argmax_counts[j] as f64 / rows.len() as f64
                },
            });
        }
    }
    Ok(out)
}

/// CSV `variant,head,label,mean,median,q1,q3,argmax_share`.
pub fn write_label_stats<W: Write>(out: W, stats: &[LabelStat], preamble: &[String]) -> Result<()> {
    let mut out = out;
    for line in preamble {
        writeln!(out, "# {line}").map_err(|e| Error::io("<csv>", e))?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["variant", "head", "label", "mean", "median", "q1", "q3", "argmax_share"])?;
    for s in stats {
        w.write_record([
            s.variant.code().to_string(),
            s.head.key().to_string(),
            s.label.clone(),
            s.mean.to_string(),
            s.median.to_string(),
            s.q1.to_string(),
            s.q3.to_string(),
            s.argmax_share.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
