//! Pipeline configuration: one JSON file, paths relative to it.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::alignment::NormalizationMode;
use crate::clustering::ClusterConfig;
use crate::corpus::Lang;
use crate::detector::GbdtParams;
use crate::encoders::{BlockId, TfidfConfig};
use crate::error::{Error, Result};

pub const CONFIG_ENV: &str = "AUTHENTISCOPE_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LexiconPaths {
    pub affect: PathBuf,
    pub bias: PathBuf,
    pub moral: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    #[serde(flatten)]
    pub gbdt: GbdtParams,
    pub test_fraction: f64,
    /// Blocks to sweep over; by default every block whose inputs exist.
    pub blocks: Option<Vec<BlockId>>,
    pub tfidf: TfidfConfig,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            gbdt: GbdtParams::default(),
            test_fraction: 0.2,
            blocks: None,
            tfidf: TfidfConfig::default(),
        }
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub dataset: PathBuf,
    pub lang: Lang,
    #[serde(default)]
    pub manifest: Option<PathBuf>,
    /// Bundled word lists are used when absent.
    #[serde(default)]
    pub lexicons: Option<LexiconPaths>,
    /// Static word-vector table for the dense block.
    #[serde(default)]
    pub vectors: Option<PathBuf>,
    #[serde(default)]
    pub normalization: NormalizationMode,
    #[serde(default = "default_true")]
    pub readability: bool,
    #[serde(default)]
    pub clustering: ClusterConfig,
    #[serde(default)]
    pub detector: DetectorConfig,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub strict: bool,
}

impl PipelineConfig {
    pub fn parse(content: &str, base: &Path) -> Result<Self> {
        let mut c: PipelineConfig = serde_json::from_str(content).map_err(|e| Error::Config(e.to_string()))?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut c.dataset);
        if let Some(p) = &mut c.manifest {
            resolve(p);
        }
        if let Some(p) = &mut c.vectors {
            resolve(p);
        }
        if let Some(p) = &mut c.out {
            resolve(p);
        }
        if let Some(l) = &mut c.lexicons {
            resolve(&mut l.affect);
            resolve(&mut l.bias);
            resolve(&mut l.moral);
        }
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&content, base)
    }

    /// Every referenced input must exist.
    pub fn validate(&self) -> Result<()> {
        let mut paths: Vec<(&str, &Path)> = vec![("dataset", &self.dataset)];
        if let Some(p) = &self.manifest {
            paths.push(("manifest", p));
        }
        if let Some(p) = &self.vectors {
            paths.push(("vectors", p));
        }
        if let Some(l) = &self.lexicons {
            paths.extend([("affect lexicon", &*l.affect), ("bias lexicon", &l.bias), ("moral lexicon", &l.moral)]);
        }
        for (what, p) in paths {
            if !p.is_file() {
                return Err(Error::Config(format!("{what} file {} does not exist", p.display())));
            }
        }
        if !(0.0..1.0).contains(&self.detector.test_fraction) {
            return Err(Error::Config(format!("test_fraction {} outside [0, 1)", self.detector.test_fraction)));
        }
        Ok(())
    }

    /// SHA-256 of the effective settings, output location excluded.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        let json = serde_json::to_vec(&c).expect("config serializes");
        format!("{:x}", Sha256::digest(json))
    }
}
