//! Dataset model: samples with a conversation prompt and three replies,
//! split into per-variant corpora, plus the sidecar artifact manifest.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// Source of a reply text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    /// Authentic human reply.
    #[serde(rename = "O")]
    Original,
    /// Reply generated by prompting the base model.
    #[serde(rename = "P")]
    Prompted,
    /// Reply generated by the fine-tuned model.
    #[serde(rename = "F")]
    FineTuned,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Original, Variant::Prompted, Variant::FineTuned];

    pub fn code(self) -> &'static str {
        match self {
            Variant::Original => "O",
            Variant::Prompted => "P",
            Variant::FineTuned => "F",
        }
    }

    /// Dense class index used by the detector: O=0, P=1, F=2.
    pub fn index(self) -> usize {
        match self {
            Variant::Original => 0,
            Variant::Prompted => 1,
            Variant::FineTuned => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Variant> {
        Variant::ALL.get(i).copied()
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "O" => Ok(Variant::Original),
            "P" => Ok(Variant::Prompted),
            "F" => Ok(Variant::FineTuned),
            other => Err(Error::InvalidArgument(format!("unknown variant code `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lang {
    En,
    De,
}

impl Lang {
    pub fn code(self) -> &'static str {
        match self {
            Lang::En => "en",
            Lang::De => "de",
        }
    }
}

impl fmt::Display for Lang {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Lang {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "en" => Ok(Lang::En),
            "de" => Ok(Lang::De),
            other => Err(Error::InvalidArgument(format!("unknown language `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatTurn {
    pub role: Role,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub lang: Lang,
    pub prompt: Vec<ChatTurn>,
    pub authentic_reply: String,
    pub base_model_reply: String,
    pub ft_model_reply: String,
}

impl Sample {
    pub fn reply(&self, variant: Variant) -> &str {
        match variant {
            Variant::Original => &self.authentic_reply,
            Variant::Prompted => &self.base_model_reply,
            Variant::FineTuned => &self.ft_model_reply,
        }
    }

    /// Variants whose reply is empty after trimming.
    pub fn empty_replies(&self) -> Vec<Variant> {
        Variant::ALL
            .into_iter()
            .filter(|v| self.reply(*v).trim().is_empty())
            .collect()
    }
}

/// (sample id, variant) pair addressing one reply text.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SampleKey {
    pub id: String,
    pub variant: Variant,
}

impl SampleKey {
    pub fn new(id: impl Into<String>, variant: Variant) -> Self {
        SampleKey {
            id: id.into(),
            variant,
        }
    }
}

impl fmt::Display for SampleKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.id, self.variant)
    }
}

impl FromStr for SampleKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (id, variant) = s
            .rsplit_once('/')
            .ok_or_else(|| Error::InvalidArgument(format!("malformed sample key `{s}`")))?;
        Ok(SampleKey::new(id, variant.parse()?))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub lang: Lang,
    pub samples: Vec<Sample>,
    /// Non-fatal findings from loading (empty file, empty replies).
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.samples.iter().map(|s| s.id.as_str())
    }

    /// All (id, variant) keys in dataset order, variants in O, P, F order.
    pub fn keys(&self) -> Vec<SampleKey> {
        self.samples
            .iter()
            .flat_map(|s| Variant::ALL.into_iter().map(|v| SampleKey::new(s.id.clone(), v)))
            .collect()
    }
}

#[derive(Deserialize)]
struct RawTurn {
    role: Role,
    content: String,
}

const REQUIRED_FIELDS: [&str; 6] = [
    "id",
    "lang",
    "prompt",
    "authentic_reply",
    "base_model_reply",
    "ft_model_reply",
];

fn nfc(s: &str) -> String {
    s.nfc().collect()
}

fn parse_sample(path: &Path, line_no: usize, line: &str) -> Result<Sample> {
    let parse_err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        line: line_no,
        message,
    };
    let value: serde_json::Value =
        serde_json::from_str(line).map_err(|e| parse_err(format!("malformed JSON: {e}")))?;
    let obj = value
        .as_object()
        .ok_or_else(|| parse_err("expected a JSON object".into()))?;
    for field in REQUIRED_FIELDS {
        if obj.get(field).map_or(true, |v| v.is_null()) {
            return Err(Error::MissingField {
                path: path.to_path_buf(),
                line: line_no,
                field: field.to_string(),
            });
        }
    }
    let text = |field: &str| -> Result<String> {
        obj[field]
            .as_str()
            .map(nfc)
            .ok_or_else(|| parse_err(format!("field `{field}` must be a string")))
    };
    let lang: Lang = text("lang")?.parse().map_err(|e: Error| parse_err(e.to_string()))?;
    let turns: Vec<RawTurn> = serde_json::from_value(obj["prompt"].clone())
        .map_err(|e| parse_err(format!("field `prompt`: {e}")))?;
    if turns.is_empty() {
        return Err(parse_err("field `prompt` must contain at least one turn".into()));
    }
    let mut prompt = Vec::with_capacity(turns.len());
    for (i, turn) in turns.into_iter().enumerate() {
        if turn.content.trim().is_empty() {
            return Err(parse_err(format!("prompt turn {i} has empty content")));
        }
        prompt.push(ChatTurn {
            role: turn.role,
            content: nfc(&turn.content),
        });
    }
    let id = text("id")?;
    if id.is_empty() {
        return Err(parse_err("field `id` is empty".into()));
    }
    Ok(Sample {
        id,
        lang,
        prompt,
        authentic_reply: text("authentic_reply")?,
        base_model_reply: text("base_model_reply")?,
        ft_model_reply: text("ft_model_reply")?,
    })
}

/// Loads a JSONL dataset file holding the samples of one language.
///
/// Text fields are NFC-normalized. Blank lines are skipped; empty replies
/// are kept and reported in [`Dataset::warnings`].
pub fn load_dataset(path: impl AsRef<Path>, lang: Lang) -> Result<Dataset> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut samples = Vec::new();
    let mut seen = HashSet::new();
    let mut warnings = Vec::new();
    for (i, line) in content.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let sample = parse_sample(path, line_no, line)?;
        if sample.lang != lang {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("sample language `{}` does not match `{lang}`", sample.lang),
            });
        }
        if !seen.insert(sample.id.clone()) {
            return Err(Error::DuplicateId(sample.id));
        }
        for v in sample.empty_replies() {
            warnings.push(format!("line {line_no}: empty {v} reply for sample `{}`", sample.id));
        }
        samples.push(sample);
    }
    if samples.is_empty() {
        warnings.push(format!("{}: dataset is empty", path.display()));
    }
    for w in &warnings {
        warn!("{w}");
    }
    log::info!("loaded {} samples from {}", samples.len(), path.display());
    Ok(Dataset {
        lang,
        samples,
        warnings,
    })
}

/// The reply texts of one variant, in dataset order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub lang: Lang,
    pub variant: Variant,
    pub texts: Vec<(String, String)>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.texts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.texts.is_empty()
    }

    pub fn keys(&self) -> Vec<SampleKey> {
        self.texts
            .iter()
            .map(|(id, _)| SampleKey::new(id.clone(), self.variant))
            .collect()
    }

    pub fn text_iter(&self) -> impl Iterator<Item = &str> {
        self.texts.iter().map(|(_, t)| t.as_str())
    }

    /// Indices of texts that are empty after trimming.
    pub fn empty_flags(&self) -> Vec<usize> {
        self.texts
            .iter()
            .enumerate()
            .filter(|(_, (_, t))| t.trim().is_empty())
            .map(|(i, _)| i)
            .collect()
    }
}

/// Splits the dataset into the O, P and F corpora (returned in that order).
pub fn split_variants(dataset: &Dataset) -> [Corpus; 3] {
    Variant::ALL.map(|variant| Corpus {
        lang: dataset.lang,
        variant,
        texts: dataset
            .samples
            .iter()
            .map(|s| (s.id.clone(), s.reply(variant).to_string()))
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArtifactKind {
    Conllu,
    Labels,
    Embedding,
}

impl ArtifactKind {
    pub const ALL: [ArtifactKind; 3] = [ArtifactKind::Conllu, ArtifactKind::Labels, ArtifactKind::Embedding];

    pub fn name(self) -> &'static str {
        match self {
            ArtifactKind::Conllu => "conllu",
            ArtifactKind::Labels => "labels",
            ArtifactKind::Embedding => "embedding",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    #[serde(default)]
    pub conllu: Option<PathBuf>,
    #[serde(default)]
    pub labels: Option<PathBuf>,
    #[serde(default)]
    pub embedding: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KindCoverage {
    pub present: usize,
    pub missing: usize,
    pub missing_keys: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub expected: usize,
    pub kinds: BTreeMap<String, KindCoverage>,
}

/// Resolved sidecar artifact paths for every (id, variant) of a dataset.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SidecarBundle {
    pub conllu_paths: BTreeMap<SampleKey, PathBuf>,
    pub semantic_label_paths: BTreeMap<SampleKey, PathBuf>,
    pub embedding_paths: BTreeMap<SampleKey, PathBuf>,
    expected: Vec<SampleKey>,
}

impl SidecarBundle {
    /// No artifacts yet for the texts of `dataset`.
    pub fn empty(dataset: &Dataset) -> Self {
        SidecarBundle {
            expected: dataset.keys(),
            ..SidecarBundle::default()
        }
    }

    pub fn paths(&self, kind: ArtifactKind) -> &BTreeMap<SampleKey, PathBuf> {
        match kind {
            ArtifactKind::Conllu => &self.conllu_paths,
            ArtifactKind::Labels => &self.semantic_label_paths,
            ArtifactKind::Embedding => &self.embedding_paths,
        }
    }

    pub fn get(&self, kind: ArtifactKind, key: &SampleKey) -> Option<&Path> {
        self.paths(kind).get(key).map(PathBuf::as_path)
    }

    /// Dataset keys lacking an artifact of `kind`, in dataset order.
    pub fn missing(&self, kind: ArtifactKind) -> Vec<SampleKey> {
        let paths = self.paths(kind);
        self.expected
            .iter()
            .filter(|k| !paths.contains_key(*k))
            .cloned()
            .collect()
    }

    pub fn coverage(&self) -> CoverageReport {
        let kinds = ArtifactKind::ALL
            .into_iter()
            .map(|kind| {
                let missing = self.missing(kind);
                (
                    kind.name().to_string(),
                    KindCoverage {
                        present: self.expected.len() - missing.len(),
                        missing: missing.len(),
                        missing_keys: missing.iter().map(ToString::to_string).collect(),
                    },
                )
            })
            .collect();
        CoverageReport {
            expected: self.expected.len(),
            kinds,
        }
    }

    /// Fails with the list of keys lacking an artifact of `kind`.
    pub fn require(&self, kind: ArtifactKind, keys: &[SampleKey]) -> Result<()> {
        let paths = self.paths(kind);
        let missing: Vec<String> = keys
            .iter()
            .filter(|k| !paths.contains_key(*k))
            .map(ToString::to_string)
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::MissingSidecars {
                kind: kind.name().to_string(),
                keys: missing,
            })
        }
    }
}

/// Reads the sidecar manifest (`"<id>/<variant>"` → artifact paths, relative
/// to the manifest's directory) and checks it against the dataset.
pub fn attach_sidecars(dataset: &Dataset, manifest: impl AsRef<Path>) -> Result<SidecarBundle> {
    let manifest = manifest.as_ref();
    let content = fs::read_to_string(manifest).map_err(|e| Error::io(manifest, e))?;
    let entries: BTreeMap<String, ManifestEntry> = serde_json::from_str(&content)?;
    let base = manifest.parent().unwrap_or_else(|| Path::new("."));
    let ids: HashSet<&str> = dataset.ids().collect();

    let mut bundle = SidecarBundle {
        expected: dataset.keys(),
        ..SidecarBundle::default()
    };
    for (raw_key, entry) in entries {
        let key: SampleKey = raw_key.parse()?;
        if !ids.contains(key.id.as_str()) {
            return Err(Error::UnknownSample(key.id));
        }
        let resolve = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };
        if let Some(p) = entry.conllu {
            bundle.conllu_paths.insert(key.clone(), resolve(p));
        }
        if let Some(p) = entry.labels {
            bundle.semantic_label_paths.insert(key.clone(), resolve(p));
        }
        if let Some(p) = entry.embedding {
            bundle.embedding_paths.insert(key, resolve(p));
        }
    }
    for kind in ArtifactKind::ALL {
        let missing = bundle.missing(kind).len();
        if missing > 0 {
            warn!("sidecar manifest lacks {missing} {} artifacts", kind.name());
        }
    }
    Ok(bundle)
}
