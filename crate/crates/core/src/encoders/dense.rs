use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::textstats::tokenize;

/// Static word vectors read from `word v1 v2 ...` lines. A leading
/// `count dim` header line, as written by common tools, is skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorTable {
    pub dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl VectorTable {
    pub fn new(dim: usize, vectors: HashMap<String, Vec<f64>>) -> Result<Self> {
        if let Some(v) = vectors.values().find(|v| v.len() != dim) {
            return Err(Error::Dimension {
                expected: dim,
                found: v.len(),
            });
        }
        Ok(VectorTable { dim, vectors })
    }

    pub fn parse(content: &str, origin: &Path) -> Result<Self> {
        let mut dim = None;
        let mut vectors = HashMap::new();
        for (n, line) in content.lines().enumerate() {
            let mut fields = line.split_whitespace();
            let Some(word) = fields.next() else { continue };
            let rest: Vec<&str> = fields.collect();
            if n == 0 && rest.len() == 1 && word.parse::<usize>().is_ok() && rest[0].parse::<usize>().is_ok() {
                continue;
            }
            let values = rest
                .iter()
                .map(|f| f.parse::<f64>().ok().filter(|v| v.is_finite()))
                .collect::<Option<Vec<f64>>>()
                .ok_or_else(|| Error::Parse {
                    path: origin.to_path_buf(),
                    line: n + 1,
                    message: "invalid vector component".into(),
                })?;
            match dim {
                None => dim = Some(values.len()),
                Some(d) if d != values.len() => {
                    return Err(Error::Parse {
                        path: origin.to_path_buf(),
                        line: n + 1,
                        message: format!("vector has {} components, expected {d}", values.len()),
                    })
                }
                _ => {}
            }
            vectors.insert(word.to_string(), values);
        }
        let dim = dim.ok_or_else(|| Error::Parse {
            path: origin.to_path_buf(),
            line: 0,
            message: "vector table is empty".into(),
        })?;
        Ok(VectorTable { dim, vectors })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&content, path)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Exact form first, then lowercased.
    pub fn lookup(&self, word: &str) -> Option<&[f64]> {
        self.vectors
            .get(word)
            .or_else(|| self.vectors.get(&word.to_lowercase()))
            .map(Vec::as_slice)
    }

    /// Mean vector of the known tokens; `None` when no token is known.
    pub fn pool_tokens<'a, I>(&self, tokens: I) -> Option<Vec<f64>>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut sum = vec![0.0; self.dim];
        let mut found = 0usize;
        for t in tokens {
            if let Some(v) = self.lookup(t) {
                found += 1;
                for (s, x) in sum.iter_mut().zip(v) {
                    *s += x;
                }
            }
        }
        if found == 0 {
            return None;
        }
        for s in &mut sum {
            *s /= found as f64;
        }
        Some(sum)
    }

    /// Pooled vector of a text's word tokens, and whether it fell back to
    /// the zero vector.
    pub fn pool_text(&self, text: &str) -> (Vec<f64>, bool) {
        let t = tokenize(text);
        match self.pool_tokens(t.words()) {
            Some(v) => (v, false),
            None => (vec![0.0; self.dim], true),
        }
    }
}
