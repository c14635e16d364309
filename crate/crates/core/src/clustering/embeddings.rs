use std::fs;
use std::path::Path;

use log::warn;

use crate::corpus::{ArtifactKind, SampleKey, SidecarBundle};
use crate::error::{Error, Result};

/// Reads one embedding vector.
///
/// Files ending in `.bin` hold little-endian `f32` values; anything else is
/// text: the dimension, then that many whitespace-separated reals.
pub fn read_embedding(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    if path.extension().is_some_and(|e| e == "bin") {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.len() % 4 != 0 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                message: format!("{} bytes is not a whole number of f32 values", bytes.len()),
            });
        }
        let values: Vec<f64> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        check_finite(path, &values)?;
        return Ok(values);
    }
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_embedding_tsv(&content, path)
}

pub fn parse_embedding_tsv(content: &str, origin: &Path) -> Result<Vec<f64>> {
    let err = |message: String| Error::Parse {
        path: origin.to_path_buf(),
        line: 1,
        message,
    };
    let mut fields = content.split_whitespace();
    let dim: usize = fields
        .next()
        .ok_or_else(|| err("empty embedding file".into()))?
        .parse()
        .map_err(|_| err("first field must be the dimension".into()))?;
    let values: Vec<f64> = fields
        .map(|f| f.parse::<f64>().map_err(|_| err(format!("invalid value `{f}`"))))
        .collect::<Result<_>>()?;
    if values.len() != dim {
        return Err(err(format!("declared dimension {dim}, found {} values", values.len())));
    }
    check_finite(origin, &values)?;
    Ok(values)
}

pub fn format_embedding_tsv(values: &[f64]) -> String {
    let body: Vec<String> = values.iter().map(|v| v.to_string()).collect();
    format!("{}\n{}\n", values.len(), body.join("\t"))
}

fn check_finite(path: &Path, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: "non-finite embedding value".into(),
        })
    }
}

/// Row-major matrix of embeddings keyed by (sample id, variant).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub keys: Vec<SampleKey>,
    pub dim: usize,
    pub values: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn new(keys: Vec<SampleKey>, dim: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != keys.len() * dim {
            return Err(Error::Dimension {
                expected: keys.len() * dim,
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite embedding value".into()));
        }
        Ok(EmbeddingMatrix { keys, dim, values })
    }

    pub fn n_rows(&self) -> usize {
        self.keys.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }
}

/// Loads the embeddings of `keys` in order. Without `strict`, keys lacking
/// a file are skipped.
pub fn load_embeddings(keys: &[SampleKey], bundle: &SidecarBundle, strict: bool) -> Result<EmbeddingMatrix> {
    if strict {
        bundle.require(ArtifactKind::Embedding, keys)?;
    }
    let mut dim = None;
    let mut present = Vec::new();
    let mut values = Vec::new();
    for key in keys {
        let Some(path) = bundle.get(ArtifactKind::Embedding, key) else {
            warn!("no embedding for {key}");
            continue;
        };
        let v = read_embedding(path)?;
        match dim {
            None => dim = Some(v.len()),
            Some(d) if d != v.len() => {
                return Err(Error::Dimension {
                    expected: d,
                    found: v.len(),
                })
            }
            _ => {}
        }
        present.push(key.clone());
        values.extend(v);
    }
    EmbeddingMatrix::new(present, dim.unwrap_or(0), values)
}
