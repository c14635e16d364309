//! Text representations for detection and their concatenation.

pub mod dense;
pub mod tfidf;

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};

pub use dense::VectorTable;
pub use tfidf::{TfidfConfig, TfidfModel};

use crate::clustering::{read_embedding, EmbeddingMatrix};
use crate::corpus::{ArtifactKind, SampleKey, SidecarBundle};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::stats::mean_std;

/// Non-zero `(column, value)` entries in ascending column order.
pub type SparseRow = Vec<(u32, f64)>;

fn sparsify(values: impl IntoIterator<Item = f64>) -> SparseRow {
    values
        .into_iter()
        .enumerate()
        .filter(|(_, v)| *v != 0.0)
        .map(|(c, v)| (c as u32, v))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockId {
    Tfidf,
    Dense,
    Instr,
    Nela,
    Spacy,
    Tweeteval,
}

impl BlockId {
    pub const ALL: [BlockId; 6] = [
        BlockId::Tfidf,
        BlockId::Dense,
        BlockId::Instr,
        BlockId::Nela,
        BlockId::Spacy,
        BlockId::Tweeteval,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BlockId::Tfidf => "tfidf",
            BlockId::Dense => "dense",
            BlockId::Instr => "instr",
            BlockId::Nela => "nela",
            BlockId::Spacy => "spacy",
            BlockId::Tweeteval => "tweeteval",
        }
    }

    /// Extracted-feature blocks are z-scored before use.
    pub fn is_extracted(self) -> bool {
        matches!(self, BlockId::Nela | BlockId::Spacy | BlockId::Tweeteval)
    }
}

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BlockId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BlockId::ALL
            .into_iter()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown block `{s}`")))
    }
}

/// One representation block: a sparse matrix whose rows follow `keys`.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub id: BlockId,
    pub keys: Vec<SampleKey>,
    pub width: usize,
    pub rows: Vec<SparseRow>,
    /// Rows that fell back to all zeros (no known token, no file).
    pub flagged: Vec<usize>,
}

impl Block {
    pub fn new(id: BlockId, keys: Vec<SampleKey>, width: usize, rows: Vec<SparseRow>) -> Result<Self> {
        if rows.len() != keys.len() {
            return Err(Error::Dimension {
                expected: keys.len(),
                found: rows.len(),
            });
        }
        if let Some(&(c, _)) = rows.iter().flatten().find(|(c, v)| *c as usize >= width || !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("block {id}: bad entry in column {c}")));
        }
        Ok(Block {
            id,
            keys,
            width,
            rows,
            flagged: vec![],
        })
    }

    pub fn n_rows(&self) -> usize {
        self.keys.len()
    }

    /// Keeps the given rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> Block {
        Block {
            id: self.id,
            keys: rows.iter().map(|&r| self.keys[r].clone()).collect(),
            width: self.width,
            rows: rows.iter().map(|&r| self.rows[r].clone()).collect(),
            flagged: vec![],
        }
    }
}

/// Static-vector means of each text.
pub fn dense_block(keys: Vec<SampleKey>, texts: &[&str], table: &VectorTable) -> Result<Block> {
    let mut rows = Vec::with_capacity(texts.len());
    let mut flagged = Vec::new();
    for (i, t) in texts.iter().enumerate() {
        let (v, zero) = table.pool_text(t);
        if zero {
            flagged.push(i);
        }
        rows.push(sparsify(v));
    }
    let mut block = Block::new(BlockId::Dense, keys, table.dim, rows)?;
    block.flagged = flagged;
    Ok(block)
}

pub fn embedding_block(embeddings: &EmbeddingMatrix) -> Result<Block> {
    let rows = (0..embeddings.n_rows()).map(|i| sparsify(embeddings.row(i).iter().copied())).collect();
    Block::new(BlockId::Instr, embeddings.keys.clone(), embeddings.dim, rows)
}

/// Instruction-model embeddings in `keys` order. Without `strict`, keys
/// lacking a file get a zero row and are flagged.
pub fn load_instruction_embeddings(keys: &[SampleKey], bundle: &SidecarBundle, strict: bool) -> Result<Block> {
    if strict {
        bundle.require(ArtifactKind::Embedding, keys)?;
    }
    let mut dim = None;
    let mut rows = Vec::with_capacity(keys.len());
    let mut flagged = Vec::new();
    for (i, key) in keys.iter().enumerate() {
        let Some(path) = bundle.get(ArtifactKind::Embedding, key) else {
            flagged.push(i);
            rows.push(Vec::new());
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
        rows.push(sparsify(v));
    }
    if !flagged.is_empty() {
        warn!("{} texts have no instruction embedding", flagged.len());
    }
    let mut block = Block::new(BlockId::Instr, keys.to_vec(), dim.unwrap_or(0), rows)?;
    block.flagged = flagged;
    Ok(block)
}

/// Dense extracted features before standardization.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBlock {
    pub id: BlockId,
    pub keys: Vec<SampleKey>,
    pub columns: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

impl FeatureBlock {
    /// Stacks matrices sharing one column layout and reorders rows to `keys`.
    pub fn from_matrices(id: BlockId, keys: &[SampleKey], matrices: &[&FeatureMatrix]) -> Result<Self> {
        let columns = matrices.first().map(|m| m.columns.clone()).unwrap_or_default();
        let mut index = std::collections::HashMap::new();
        for m in matrices {
            if m.columns != columns {
                return Err(Error::Misaligned(format!("block {id}: column layouts differ")));
            }
            for (r, k) in m.keys.iter().enumerate() {
                index.insert(k.clone(), m.row(r));
            }
        }
        let values = keys
            .iter()
            .map(|k| {
                index
                    .get(k)
                    .map(|r| r.to_vec())
                    .ok_or_else(|| Error::Misaligned(format!("block {id}: no row for {k}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FeatureBlock {
            id,
            keys: keys.to_vec(),
            columns,
            values,
        })
    }

    /// Z-scores every column with the mean and population deviation of the
    /// `train` rows. Undefined cells and zero-variance columns map to 0.
    pub fn standardize(&self, train: &[usize]) -> Result<Block> {
        let width = self.columns.len();
        let mut stats = Vec::with_capacity(width);
        for c in 0..width {
            let seen: Vec<f64> = train.iter().filter_map(|&r| self.values[r][c]).collect();
            stats.push(mean_std(&seen).unwrap_or((0.0, 0.0)));
        }
        let rows = self
            .values
            .iter()
            .map(|row| {
                sparsify(row.iter().zip(&stats).map(|(v, &(mu, sd))| match v {
                    Some(x) if sd > 0.0 => (x - mu) / sd,
                    _ => 0.0,
                }))
            })
            .collect();
        Block::new(self.id, self.keys.clone(), width, rows)
    }

    /// Values as-is, undefined cells as 0.
    pub fn raw(&self) -> Result<Block> {
        let rows = self
            .values
            .iter()
            .map(|row| sparsify(row.iter().map(|v| v.unwrap_or(0.0))))
            .collect();
        Block::new(self.id, self.keys.clone(), self.columns.len(), rows)
    }
}

/// Horizontally concatenated blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Representation {
    pub name: String,
    pub keys: Vec<SampleKey>,
    pub width: usize,
    pub blocks: Vec<(BlockId, Range<usize>)>,
    pub rows: Vec<SparseRow>,
}

impl Representation {
    pub fn n_rows(&self) -> usize {
        self.keys.len()
    }

    pub fn dense_row(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.width];
        for &(c, v) in &self.rows[i] {
            out[c as usize] = v;
        }
        out
    }

    /// Values of one block in row `i`, densified.
    pub fn block_slice(&self, i: usize, id: BlockId) -> Option<Vec<f64>> {
        let (_, range) = self.blocks.iter().find(|(b, _)| *b == id)?;
        Some(self.dense_row(i)[range.clone()].to_vec())
    }
}

pub fn combination_name(ids: &[BlockId]) -> String {
    ids.iter().map(|b| b.as_str()).collect::<Vec<_>>().join("+")
}

pub fn combine(blocks: &[&Block]) -> Result<Representation> {
    let first = blocks
        .first()
        .ok_or_else(|| Error::InvalidArgument("nothing to combine".into()))?;
    let mut rows: Vec<SparseRow> = vec![Vec::new(); first.n_rows()];
    let mut ranges = Vec::with_capacity(blocks.len());
    let mut offset = 0usize;
    for b in blocks {
        if b.keys != first.keys {
            return Err(Error::Misaligned(format!("block {} rows differ from block {}", b.id, first.id)));
        }
        for (out, row) in rows.iter_mut().zip(&b.rows) {
            out.extend(row.iter().map(|&(c, v)| (c + offset as u32, v)));
        }
        ranges.push((b.id, offset..offset + b.width));
        offset += b.width;
    }
    Ok(Representation {
        name: combination_name(&blocks.iter().map(|b| b.id).collect::<Vec<_>>()),
        keys: first.keys.clone(),
        width: offset,
        blocks: ranges,
        rows,
    })
}

/// All non-empty subsets, by size and then by position in `available`.
pub fn enumerate_combinations(available: &[BlockId]) -> Vec<Vec<BlockId>> {
    let n = available.len();
    let mut subsets: Vec<Vec<usize>> = (1u64..1 << n)
        .map(|mask| (0..n).filter(|i| mask & (1 << i) != 0).collect())
        .collect();
    subsets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    subsets
        .into_iter()
        .map(|s| s.into_iter().map(|i| available[i]).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Variant;
    use proptest::prelude::*;

    fn keys(n: usize) -> Vec<SampleKey> {
        (0..n).map(|i| SampleKey::new(i.to_string(), Variant::Original)).collect()
    }

    fn dense(id: BlockId, rows: &[Vec<f64>]) -> Block {
        let width = rows[0].len();
        Block::new(id, keys(rows.len()), width, rows.iter().map(|r| sparsify(r.iter().copied())).collect()).unwrap()
    }

    #[test]
    fn combination_counts_and_order() {
        assert_eq!(enumerate_combinations(&BlockId::ALL[..3]).len(), 7);
        let all = enumerate_combinations(&BlockId::ALL);
        assert_eq!(all.len(), 63);
        assert_eq!(combination_name(&all[0]), "tfidf");
        assert_eq!(combination_name(&all[6]), "tfidf+dense");
        assert_eq!(combination_name(&all[62]), "tfidf+dense+instr+nela+spacy+tweeteval");
        assert_eq!(all, enumerate_combinations(&BlockId::ALL));
    }

    #[test]
    fn widths_add_up() {
        let a = dense(BlockId::Tfidf, &[vec![1.0; 10], vec![0.0; 10]]);
        let b = dense(BlockId::Dense, &[vec![2.0; 300], vec![3.0; 300]]);
        let c = dense(BlockId::Nela, &[vec![0.5; 14], vec![4.0; 14]]);
        let r = combine(&[&a, &b, &c]).unwrap();
        assert_eq!(r.width, 324);
        assert_eq!(r.name, "tfidf+dense+nela");
        assert_eq!(r.block_slice(1, BlockId::Dense).unwrap(), vec![3.0; 300]);
        let single = combine(&[&b]).unwrap();
        assert_eq!(single.rows, b.rows);
        assert_eq!(single.width, b.width);
    }

    #[test]
    fn misaligned_keys_rejected() {
        let a = dense(BlockId::Tfidf, &[vec![1.0], vec![2.0]]);
        let mut b = a.clone();
        b.id = BlockId::Dense;
        b.keys.reverse();
        assert!(matches!(combine(&[&a, &b]), Err(Error::Misaligned(_))));
    }

    #[test]
    fn standardize_uses_train_rows_only() {
        let fb = FeatureBlock {
            id: BlockId::Nela,
            keys: keys(4),
            columns: vec!["a".into(), "b".into()],
            values: vec![
                vec![Some(1.0), Some(5.0)],
                vec![Some(3.0), None],
                vec![Some(100.0), Some(5.0)],
                vec![None, Some(5.0)],
            ],
        };
        let b = fb.standardize(&[0, 1]).unwrap();
        let r = combine(&[&b]).unwrap();
        assert_eq!(r.dense_row(0), vec![-1.0, 0.0]);
        assert_eq!(r.dense_row(1), vec![1.0, 0.0]);
        assert_eq!(r.dense_row(2), vec![98.0, 0.0]);
        assert_eq!(r.dense_row(3), vec![0.0, 0.0]);
    }

    proptest! {
        #[test]
        fn slice_back_equality(a in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 3), 1..6), seed in 0u64..100) {
            let b: Vec<Vec<f64>> = a.iter().map(|r| r.iter().map(|x| x * seed as f64).collect()).collect();
            let ba = dense(BlockId::Dense, &a);
            let bb = dense(BlockId::Instr, &b);
            let r = combine(&[&ba, &bb]).unwrap();
            for i in 0..a.len() {
                prop_assert_eq!(r.block_slice(i, BlockId::Dense).unwrap(), a[i].clone());
                prop_assert_eq!(r.block_slice(i, BlockId::Instr).unwrap(), b[i].clone());
            }
        }

        #[test]
        fn train_columns_have_zero_mean(vals in prop::collection::vec(prop::option::of(-10.0f64..10.0), 4..30)) {
            let n = vals.len();
            let fb = FeatureBlock {
                id: BlockId::Spacy,
                keys: keys(n),
                columns: vec!["x".into()],
                values: vals.iter().map(|v| vec![*v]).collect(),
            };
            let train: Vec<usize> = (0..n).filter(|i| i % 4 != 0).collect();
            let block = fb.standardize(&train).unwrap();
            let r = combine(&[&block]).unwrap();
            let defined: Vec<f64> = train.iter().filter(|&&i| vals[i].is_some()).map(|&i| r.dense_row(i)[0]).collect();
            if !defined.is_empty() {
                let m = defined.iter().sum::<f64>() / defined.len() as f64;
                prop_assert!(m.abs() < 1e-9);
            }
        }
    }
}
