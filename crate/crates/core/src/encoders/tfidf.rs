use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::SparseRow;
use crate::error::{Error, Result};
use crate::textstats::tokenize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TfidfConfig {
    /// Terms seen in fewer training documents are dropped.
    pub min_df: usize,
    /// Keep only the most frequent terms (by document frequency).
    pub max_features: Option<usize>,
}

impl Default for TfidfConfig {
    fn default() -> Self {
        TfidfConfig {
            min_df: 1,
            max_features: None,
        }
    }
}

/// Lowercased word tokens; punctuation is dropped.
pub fn unigrams(text: &str) -> Vec<String> {
    tokenize(text).words().map(str::to_lowercase).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfModel {
    /// Terms in column order (sorted).
    pub terms: Vec<String>,
    pub vocabulary: BTreeMap<String, usize>,
    pub idf: Vec<f64>,
    pub doc_count: usize,
}

impl TfidfModel {
    /// Smoothed `idf = ln((1+N)/(1+df)) + 1`.
    pub fn fit<'a, I>(texts: I, config: &TfidfConfig) -> Result<Self>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        let mut n = 0usize;
        for text in texts {
            n += 1;
            let mut terms = unigrams(text);
            terms.sort_unstable();
            terms.dedup();
            for t in terms {
                *df.entry(t).or_default() += 1;
            }
        }
        if df.is_empty() {
            return Err(Error::InvalidArgument("cannot fit TF-IDF on an empty corpus".into()));
        }
        let mut kept: Vec<(String, usize)> = df.into_iter().filter(|(_, d)| *d >= config.min_df).collect();
        if let Some(cap) = config.max_features {
            if kept.len() > cap {
                // stable: ties stay in lexical order
                kept.sort_by(|a, b| b.1.cmp(&a.1));
                kept.truncate(cap);
                kept.sort_by(|a, b| a.0.cmp(&b.0));
            }
        }
        let idf = kept
            .iter()
            .map(|(_, d)| ((1.0 + n as f64) / (1.0 + *d as f64)).ln() + 1.0)
            .collect();
        let terms: Vec<String> = kept.into_iter().map(|(t, _)| t).collect();
        let vocabulary = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(TfidfModel {
            terms,
            vocabulary,
            idf,
            doc_count: n,
        })
    }

    pub fn width(&self) -> usize {
        self.terms.len()
    }

    /// L2-normalized `tf · idf` weights by column; `None` when no term is in
    /// the vocabulary.
    pub fn transform_one(&self, text: &str) -> Option<SparseRow> {
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for t in unigrams(text) {
            if let Some(&col) = self.vocabulary.get(&t) {
                *counts.entry(col).or_default() += 1.0;
            }
        }
        if counts.is_empty() {
            return None;
        }
        let mut row: SparseRow = counts
            .into_iter()
            .map(|(c, tf)| (c as u32, tf * self.idf[c]))
            .collect();
        let norm = row.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
        for (_, w) in &mut row {
            *w /= norm;
        }
        Some(row)
    }

    /// Rows plus the indices of texts that had no in-vocabulary term.
    pub fn transform<'a, I>(&self, texts: I) -> (Vec<SparseRow>, Vec<usize>)
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut rows = Vec::new();
        let mut empty = Vec::new();
        for (i, text) in texts.into_iter().enumerate() {
            match self.transform_one(text) {
                Some(r) => rows.push(r),
                None => {
                    empty.push(i);
                    rows.push(Vec::new());
                }
            }
        }
        (rows, empty)
    }

    /// SHA-256 over terms and idf bits.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.doc_count as u64).to_le_bytes());
        for (t, idf) in self.terms.iter().zip(&self.idf) {
            h.update(t.as_bytes());
            h.update([0]);
            h.update(idf.to_bits().to_le_bytes());
        }
        format!("{:x}", h.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn idf_hand_values() {
        let m = TfidfModel::fit(["cat sat", "Cat ran."], &TfidfConfig::default()).unwrap();
        assert_eq!(m.terms, vec!["cat", "ran", "sat"]);
        assert_eq!(m.idf[0], 1.0);
        assert!((m.idf[2] - 1.405465).abs() < 1e-6);
        let row = m.transform_one("cat sat").unwrap();
        assert!((row[0].1 - 0.5797).abs() < 1e-4);
        assert!((row[1].1 - 0.8148).abs() < 1e-4);
        assert_eq!(row[1].0, 2);
    }

    #[test]
    fn oov_rows_are_flagged() {
        let m = TfidfModel::fit(["a b"], &TfidfConfig::default()).unwrap();
        let (rows, empty) = m.transform(["zzz", "a"]);
        assert!(rows[0].is_empty());
        assert_eq!(empty, vec![0]);
        assert_eq!(rows[1], vec![(0, 1.0)]);
    }

    #[test]
    fn cutoffs() {
        let docs = ["a b c", "a b", "a"];
        let m = TfidfModel::fit(docs, &TfidfConfig { min_df: 2, max_features: None }).unwrap();
        assert_eq!(m.terms, vec!["a", "b"]);
        let m = TfidfModel::fit(docs, &TfidfConfig { min_df: 1, max_features: Some(1) }).unwrap();
        assert_eq!(m.terms, vec!["a"]);
        assert!(TfidfModel::fit(["", "..."], &TfidfConfig::default()).is_err());
    }

    proptest! {
        #[test]
        fn rows_are_unit_norm(docs in prop::collection::vec("[a-d ]{0,12}", 1..8)) {
            let Ok(m) = TfidfModel::fit(docs.iter().map(String::as_str), &TfidfConfig::default()) else {
                return Ok(());
            };
            prop_assert!(m.idf.iter().all(|&v| v >= 1.0));
            for d in &docs {
                if let Some(r) = m.transform_one(d) {
                    let n: f64 = r.iter().map(|(_, w)| w * w).sum();
                    prop_assert!((n - 1.0).abs() < 1e-9);
                }
            }
        }
    }
}
