//! Corpus-level alignment: mean feature profiles per variant compared by
//! cosine similarity.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::corpus::{Lang, Variant};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

/// Mean feature vector of one variant's corpus over the features that are
/// defined for at least one of its texts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusProfile {
    pub variant: Variant,
    pub feature_set: String,
    pub columns: Vec<String>,
    pub values: Vec<f64>,
    /// Number of texts contributing to each mean.
    pub support: Vec<usize>,
    /// Features without a single defined value.
    pub undefined: Vec<String>,
}

impl CorpusProfile {
    fn restrict(&self, keep: &[String]) -> CorpusProfile {
        let mut out = CorpusProfile {
            columns: Vec::with_capacity(keep.len()),
            values: Vec::with_capacity(keep.len()),
            support: Vec::with_capacity(keep.len()),
            ..self.clone()
        };
        for name in keep {
            let i = self.columns.iter().position(|c| c == name).expect("restricted to known column");
            out.columns.push(name.clone());
            out.values.push(self.values[i]);
            out.support.push(self.support[i]);
        }
        out
    }
}

/// Means over the rows of `matrix` belonging to `variant`, skipping
/// undefined cells.
pub fn mean_profile(matrix: &FeatureMatrix, variant: Variant, feature_set: &str) -> CorpusProfile {
    let rows: Vec<usize> = (0..matrix.n_rows())
        .filter(|&r| matrix.keys[r].variant == variant)
        .collect();
    let mut profile = CorpusProfile {
        variant,
        feature_set: feature_set.to_string(),
        columns: Vec::new(),
        values: Vec::new(),
        support: Vec::new(),
        undefined: Vec::new(),
    };
    for (c, name) in matrix.columns.iter().enumerate() {
        let (sum, n) = rows
            .iter()
            .filter_map(|&r| matrix.get(r, c))
            .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
        if n == 0 {
            profile.undefined.push(name.clone());
        } else {
            profile.columns.push(name.clone());
            profile.values.push(sum / n as f64);
            profile.support.push(n);
        }
    }
    profile
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormalizationMode {
    None,
    #[default]
    Minmax,
    Zscore,
}

impl fmt::Display for NormalizationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormalizationMode::None => "none",
            NormalizationMode::Minmax => "minmax",
            NormalizationMode::Zscore => "zscore",
        })
    }
}

/// Rescales each feature across the compared profiles. Min-max maps the
/// range onto [0, 1] (a constant feature becomes 0.5); z-score subtracts
/// the mean and divides by the population deviation (constant becomes 0).
pub fn normalize_profiles(profiles: &[CorpusProfile], mode: NormalizationMode) -> Result<Vec<CorpusProfile>> {
    if let Some(first) = profiles.first() {
        if profiles.iter().any(|p| p.columns != first.columns) {
            return Err(Error::InvalidArgument("profiles do not share a feature set".into()));
        }
    }
    if mode == NormalizationMode::None {
        return Ok(profiles.to_vec());
    }
    if profiles.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "{mode} normalization needs at least 2 profiles, got {}",
            profiles.len()
        )));
    }
    let mut out = profiles.to_vec();
    let width = profiles[0].values.len();
    let n = profiles.len() as f64;
    for f in 0..width {
        let col: Vec<f64> = profiles.iter().map(|p| p.values[f]).collect();
        match mode {
            NormalizationMode::Minmax => {
                let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                for (p, v) in out.iter_mut().zip(&col) {
                    p.values[f] = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
                }
            }
            NormalizationMode::Zscore => {
                let mean = col.iter().sum::<f64>() / n;
                let std = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
                for (p, v) in out.iter_mut().zip(&col) {
                    p.values[f] = if std > 0.0 { (v - mean) / std } else { 0.0 };
                }
            }
            NormalizationMode::None => unreachable!(),
        }
    }
    Ok(out)
}

/// Cosine similarity, clamped to [-1, 1].
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Dimension {
            expected: u.len(),
            found: v.len(),
        });
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let uu: f64 = u.iter().map(|a| a * a).sum();
    let vv: f64 = v.iter().map(|b| b * b).sum();
    if uu == 0.0 || vv == 0.0 {
        return Err(Error::UndefinedSimilarity);
    }
    // sqrt of the product keeps cosine(u, u) at exactly 1
    Ok((dot / (uu * vv).sqrt()).clamp(-1.0, 1.0))
}

/// Unordered pair of variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VariantPair {
    #[serde(rename = "O-P")]
    OriginalPrompted,
    #[serde(rename = "O-F")]
    OriginalFineTuned,
    #[serde(rename = "P-F")]
    PromptedFineTuned,
}

impl VariantPair {
    pub const ALL: [VariantPair; 3] = [
        VariantPair::OriginalPrompted,
        VariantPair::OriginalFineTuned,
        VariantPair::PromptedFineTuned,
    ];

    pub fn of(a: Variant, b: Variant) -> Option<VariantPair> {
        use Variant::*;
        match (a, b) {
            (Original, Prompted) | (Prompted, Original) => Some(VariantPair::OriginalPrompted),
            (Original, FineTuned) | (FineTuned, Original) => Some(VariantPair::OriginalFineTuned),
            (Prompted, FineTuned) | (FineTuned, Prompted) => Some(VariantPair::PromptedFineTuned),
            _ => None,
        }
    }

    pub fn variants(self) -> (Variant, Variant) {
        match self {
            VariantPair::OriginalPrompted => (Variant::Original, Variant::Prompted),
            VariantPair::OriginalFineTuned => (Variant::Original, Variant::FineTuned),
            VariantPair::PromptedFineTuned => (Variant::Prompted, Variant::FineTuned),
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            VariantPair::OriginalPrompted => "O-P",
            VariantPair::OriginalFineTuned => "O-F",
            VariantPair::PromptedFineTuned => "P-F",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    pub feature_set: String,
    pub lang: Lang,
    pub mode: NormalizationMode,
    pub entries: BTreeMap<VariantPair, f64>,
    /// Features left out because some variant had no defined value.
    pub dropped_features: Vec<String>,
}

impl SimilarityReport {
    /// Similarity between two variants; a variant with itself is 1.
    pub fn get(&self, a: Variant, b: Variant) -> Option<f64> {
        if a == b {
            return Some(1.0);
        }
        VariantPair::of(a, b).and_then(|p| self.entries.get(&p).copied())
    }
}

/// Pairwise cosines of profiles (one per variant) over their shared
/// defined features.
pub fn report_from_profiles(
    feature_set: &str,
    lang: Lang,
    profiles: &[CorpusProfile],
    mode: NormalizationMode,
) -> Result<SimilarityReport> {
    for v in Variant::ALL {
        if !profiles.iter().any(|p| p.variant == v) {
            return Err(Error::InvalidArgument(format!("no {v} profile for `{feature_set}`")));
        }
    }
    let shared: Vec<String> = profiles[0]
        .columns
        .iter()
        .filter(|c| profiles.iter().all(|p| p.columns.contains(c)))
        .cloned()
        .collect();
    let mut dropped: Vec<String> = profiles
        .iter()
        .flat_map(|p| p.columns.iter().chain(&p.undefined))
        .filter(|c| !shared.contains(c))
        .cloned()
        .collect();
    dropped.sort();
    dropped.dedup();
    if !dropped.is_empty() {
        warn!("{feature_set}: dropping {} features undefined for some variant", dropped.len());
    }
    let restricted: Vec<CorpusProfile> = profiles.iter().map(|p| p.restrict(&shared)).collect();
    let normalized = normalize_profiles(&restricted, mode)?;
    let by_variant = |v: Variant| normalized.iter().find(|p| p.variant == v).expect("checked above");
    let mut entries = BTreeMap::new();
    for pair in VariantPair::ALL {
        let (a, b) = pair.variants();
        entries.insert(pair, cosine(&by_variant(a).values, &by_variant(b).values)?);
    }
    Ok(SimilarityReport {
        feature_set: feature_set.to_string(),
        lang,
        mode,
        entries,
        dropped_features: dropped,
    })
}

/// Report for one feature set from the per-variant feature matrices.
pub fn similarity_report(
    feature_set: &str,
    lang: Lang,
    matrices: &[(Variant, &FeatureMatrix)],
    mode: NormalizationMode,
) -> Result<SimilarityReport> {
    let profiles: Vec<CorpusProfile> = matrices
        .iter()
        .map(|(v, m)| mean_profile(m, *v, feature_set))
        .collect();
    report_from_profiles(feature_set, lang, &profiles, mode)
}

/// CSV grid `lang,feature_set,O-P,O-F,P-F`.
pub fn write_similarity_grid<W: Write>(mut out: W, reports: &[SimilarityReport], preamble: &[String]) -> Result<()> {
    for line in preamble {
        writeln!(out, "# {line}").map_err(|e| Error::io("<csv>", e))?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["lang", "feature_set", "O-P", "O-F", "P-F"])?;
    for r in reports {
        let mut rec = vec![r.lang.code().to_string(), r.feature_set.clone()];
        rec.extend(VariantPair::ALL.iter().map(|p| format!("{:.4}", r.entries[p])));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
