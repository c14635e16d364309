//! O/P/F classification: boosted trees over every block combination.

pub mod gbdt;
pub mod metrics;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;
use std::sync::Mutex;

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use gbdt::{train, BoostedForest, GbdtParams, Node, Tree};
pub use metrics::{macro_f1, EvalResult};

use crate::corpus::{Lang, SampleKey, Variant};
use crate::encoders::{combine, enumerate_combinations, Block, BlockId, FeatureBlock, Representation, TfidfConfig, TfidfModel};
use crate::error::{Error, Result};

/// Train/test row indices. All variants of one sample share a fold.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSplit {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub test_ids: BTreeSet<String>,
    /// SHA-256 of the sorted test sample ids.
    pub digest: String,
}

/// Seeded split by sample id, drawing `test_fraction` of each language's
/// samples for the test fold.
pub fn split_by_sample(keys: &[SampleKey], samples: &[(String, Lang)], test_fraction: f64, seed: u64) -> Result<DataSplit> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::InvalidArgument(format!("test fraction {test_fraction} outside [0, 1)")));
    }
    let mut by_lang: BTreeMap<Lang, Vec<&str>> = BTreeMap::new();
    for (id, lang) in samples {
        by_lang.entry(*lang).or_default().push(id);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test_ids = BTreeSet::new();
    for ids in by_lang.values_mut() {
        ids.sort_unstable();
        ids.dedup();
        ids.shuffle(&mut rng);
        let n = ids.len();
        let mut k = (n as f64 * test_fraction).round() as usize;
        if n >= 2 && test_fraction > 0.0 {
            k = k.clamp(1, n - 1);
        }
        test_ids.extend(ids[..k].iter().map(|s| s.to_string()));
    }
    let (test, train): (Vec<usize>, Vec<usize>) = (0..keys.len()).partition(|&i| test_ids.contains(&keys[i].id));
    let mut h = Sha256::new();
    for id in &test_ids {
        h.update(id.as_bytes());
        h.update([0]);
    }
    Ok(DataSplit {
        train,
        test,
        test_ids,
        digest: format!("{:x}", h.finalize()),
    })
}

/// A block as handed to the sweep. Blocks that learn from data are fitted
/// on the training rows of each split.
#[derive(Debug, Clone)]
pub enum BlockSource {
    Fixed(Block),
    Features(FeatureBlock),
    Tfidf {
        keys: Vec<SampleKey>,
        texts: Vec<String>,
        config: TfidfConfig,
    },
}

impl BlockSource {
    pub fn id(&self) -> BlockId {
        match self {
            BlockSource::Fixed(b) => b.id,
            BlockSource::Features(f) => f.id,
            BlockSource::Tfidf { .. } => BlockId::Tfidf,
        }
    }

    pub fn keys(&self) -> &[SampleKey] {
        match self {
            BlockSource::Fixed(b) => &b.keys,
            BlockSource::Features(f) => &f.keys,
            BlockSource::Tfidf { keys, .. } => keys,
        }
    }

    /// The block over all rows, with the fingerprint of any fitted model.
    pub fn materialize(&self, train: &[usize]) -> Result<(Block, Option<String>)> {
        match self {
            BlockSource::Fixed(b) => Ok((b.clone(), None)),
            BlockSource::Features(f) => Ok((f.standardize(train)?, None)),
            BlockSource::Tfidf { keys, texts, config } => {
                let model = TfidfModel::fit(train.iter().map(|&i| texts[i].as_str()), config)?;
                let (rows, empty) = model.transform(texts.iter().map(String::as_str));
                let mut block = Block::new(BlockId::Tfidf, keys.clone(), model.width(), rows)?;
                block.flagged = empty;
                Ok((block, Some(model.fingerprint())))
            }
        }
    }
}

impl Representation {
    pub fn select(&self, rows: &[usize]) -> (Vec<SampleKey>, Vec<crate::encoders::SparseRow>) {
        (
            rows.iter().map(|&r| self.keys[r].clone()).collect(),
            rows.iter().map(|&r| self.rows[r].clone()).collect(),
        )
    }
}

pub const MODEL_FORMAT: &str = "authentiscope-gbdt";
pub const MODEL_VERSION: u32 = 1;

/// Saved classifier together with what is needed to rebuild its inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format: String,
    pub version: u32,
    pub combination: String,
    /// Class order of the forest's outputs.
    pub classes: Vec<Variant>,
    pub blocks: Vec<(BlockId, usize, usize)>,
    /// Fingerprints of fitted encoders, by block id.
    pub fingerprints: BTreeMap<String, String>,
    pub forest: BoostedForest,
}

impl ModelArtifact {
    pub fn new(representation: &Representation, fingerprints: BTreeMap<String, String>, forest: BoostedForest) -> Self {
        ModelArtifact {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            combination: representation.name.clone(),
            classes: Variant::ALL.to_vec(),
            blocks: representation.blocks.iter().map(|(b, r)| (*b, r.start, r.end)).collect(),
            fingerprints,
            forest,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string(self)?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let a: ModelArtifact = serde_json::from_str(&content)?;
        if a.format != MODEL_FORMAT || a.version != MODEL_VERSION {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                message: format!("unsupported model artifact {} v{}", a.format, a.version),
            });
        }
        Ok(a)
    }
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    /// Sorted by macro F1, best first; equal scores keep enumeration order.
    pub results: Vec<EvalResult>,
    pub best: ModelArtifact,
}

fn train_and_evaluate(
    blocks: &[&Block],
    labels: &[usize],
    split: &DataSplit,
    params: &GbdtParams,
) -> Result<(Representation, EvalResult, BoostedForest)> {
    let rep = combine(blocks)?;
    let (_, train_rows) = rep.select(&split.train);
    let train_labels: Vec<usize> = split.train.iter().map(|&i| labels[i]).collect();
    let forest = train(&train_rows, rep.width, &train_labels, params)?;
    let (_, test_rows) = rep.select(&split.test);
    let predicted = forest.predict(&test_rows, rep.width)?;
    let to_variant = |c: usize| Variant::from_index(c).expect("class index");
    let truth: Vec<Variant> = split.test.iter().map(|&i| to_variant(labels[i])).collect();
    let pred: Vec<Variant> = predicted.into_iter().map(to_variant).collect();
    let mut result = macro_f1(&truth, &pred)?;
    result.combination = rep.name.clone();
    Ok((rep, result, forest))
}

/// Trains and tests one forest per non-empty block combination.
pub fn run_sweep(sources: &[BlockSource], split: &DataSplit, params: &GbdtParams) -> Result<SweepOutcome> {
    let first = sources
        .first()
        .ok_or_else(|| Error::InvalidArgument("sweep needs at least one block".into()))?;
    let keys = first.keys();
    if let Some(s) = sources.iter().find(|s| s.keys() != keys) {
        return Err(Error::Misaligned(format!("block {} rows differ from block {}", s.id(), first.id())));
    }
    let labels: Vec<usize> = keys.iter().map(|k| k.variant.index()).collect();
    let mut blocks = Vec::with_capacity(sources.len());
    let mut fingerprints = BTreeMap::new();
    for s in sources {
        let (b, fp) = s.materialize(&split.train)?;
        if let Some(fp) = fp {
            fingerprints.insert(b.id.to_string(), fp);
        }
        blocks.push(b);
    }
    let ids: Vec<BlockId> = blocks.iter().map(|b| b.id).collect();
    let combos = enumerate_combinations(&ids);
    info!("sweeping {} combinations", combos.len());

    let best: Mutex<Option<(usize, f64, Representation, BoostedForest)>> = Mutex::new(None);
    let results: Vec<EvalResult> = combos
        .par_iter()
        .enumerate()
        .map(|(idx, combo)| {
            let chosen: Vec<&Block> = combo
                .iter()
                .map(|id| blocks.iter().find(|b| b.id == *id).expect("enumerated from blocks"))
                .collect();
            let (rep, result, forest) = train_and_evaluate(&chosen, &labels, split, params)?;
            info!("{}: macro F1 {:.4}", result.combination, result.macro_f1);
            let mut guard = best.lock().expect("lock");
            let better = match &*guard {
                None => true,
                Some((i, m, _, _)) => result.macro_f1 > *m || (result.macro_f1 == *m && idx < *i),
            };
            if better {
                *guard = Some((idx, result.macro_f1, rep, forest));
            }
            Ok(result)
        })
        .collect::<Result<_>>()?;
    let mut results = results;
    results.sort_by(|a, b| b.macro_f1.total_cmp(&a.macro_f1));
    let (_, _, rep, forest) = best.into_inner().expect("lock").expect("at least one combination");
    let used: BTreeMap<String, String> = fingerprints
        .into_iter()
        .filter(|(id, _)| rep.blocks.iter().any(|(b, _)| b.as_str() == id))
        .collect();
    Ok(SweepOutcome {
        results,
        best: ModelArtifact::new(&rep, used, forest),
    })
}

/// CSV `combination,f1_O,f1_F,f1_P,macro_f1`.
pub fn write_results_grid<W: Write>(mut out: W, results: &[EvalResult], preamble: &[String]) -> Result<()> {
    for line in preamble {
        writeln!(out, "# {line}").map_err(|e| Error::io("<csv>", e))?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["combination", "f1_O", "f1_F", "f1_P", "macro_f1"])?;
    for r in results {
        w.write_record([
            r.combination.clone(),
            format!("{:.4}", r.f1_of(Variant::Original)),
            format!("{:.4}", r.f1_of(Variant::FineTuned)),
            format!("{:.4}", r.f1_of(Variant::Prompted)),
            format!("{:.4}", r.macro_f1),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::SparseRow;

    fn toy() -> (Vec<SampleKey>, Vec<(String, Lang)>, Vec<BlockSource>) {
        let mut keys = Vec::new();
        let mut texts = Vec::new();
        let mut feat = Vec::new();
        let mut dense: Vec<SparseRow> = Vec::new();
        let words = ["alpha", "beta", "gamma"];
        for i in 0..30 {
            for v in Variant::ALL {
                keys.push(SampleKey::new(format!("s{i:02}"), v));
                texts.push(format!("{} common w{}", words[v.index()], i % 5));
                feat.push(vec![Some(v.index() as f64 + (i % 3) as f64 * 0.1), None]);
                dense.push(vec![(0, 1.0 + (i % 4) as f64)]);
            }
        }
        let samples = (0..30).map(|i| (format!("s{i:02}"), Lang::En)).collect();
        let sources = vec![
            BlockSource::Tfidf {
                keys: keys.clone(),
                texts,
                config: TfidfConfig::default(),
            },
            BlockSource::Fixed(Block::new(BlockId::Dense, keys.clone(), 1, dense).unwrap()),
            BlockSource::Features(FeatureBlock {
                id: BlockId::Nela,
                keys: keys.clone(),
                columns: vec!["a".into(), "b".into()],
                values: feat,
            }),
        ];
        (keys, samples, sources)
    }

    fn params() -> GbdtParams {
        GbdtParams {
            n_rounds: 10,
            max_depth: 2,
            learning_rate: 0.3,
            ..GbdtParams::default()
        }
    }

    #[test]
    fn split_keeps_samples_whole() {
        let (keys, samples, _) = toy();
        let s = split_by_sample(&keys, &samples, 0.2, 7).unwrap();
        assert_eq!(s.test_ids.len(), 6);
        assert_eq!(s.test.len(), 18);
        for &i in &s.train {
            assert!(!s.test_ids.contains(&keys[i].id));
        }
        assert_eq!(s, split_by_sample(&keys, &samples, 0.2, 7).unwrap());
        assert_ne!(s.digest, split_by_sample(&keys, &samples, 0.2, 8).unwrap().digest);
    }

    #[test]
    fn sweep_is_complete_sorted_and_deterministic() {
        let (keys, samples, sources) = toy();
        let split = split_by_sample(&keys, &samples, 0.2, 1).unwrap();
        let a = run_sweep(&sources, &split, &params()).unwrap();
        assert_eq!(a.results.len(), 7);
        assert!(a.results.windows(2).all(|w| w[0].macro_f1 >= w[1].macro_f1));
        assert_eq!(a.best.combination, a.results[0].combination);
        let b = run_sweep(&sources, &split, &params()).unwrap();
        assert_eq!(a.results, b.results);
        assert_eq!(a.best, b.best);
        for r in &a.results {
            assert!((r.macro_f1 - r.f1.iter().sum::<f64>() / 3.0).abs() < 1e-12);
            let total: usize = Variant::ALL.iter().map(|&v| r.support(v)).sum();
            assert_eq!(total, split.test.len());
        }
    }

    #[test]
    fn tfidf_fit_on_train_only() {
        let (keys, samples, sources) = toy();
        let split = split_by_sample(&keys, &samples, 0.2, 1).unwrap();
        let BlockSource::Tfidf { texts, .. } = &sources[0] else { unreachable!() };
        let (_, fp) = sources[0].materialize(&split.train).unwrap();
        let train_model = TfidfModel::fit(split.train.iter().map(|&i| texts[i].as_str()), &TfidfConfig::default()).unwrap();
        assert_eq!(fp.unwrap(), train_model.fingerprint());
        let all_model = TfidfModel::fit(texts.iter().map(String::as_str), &TfidfConfig::default()).unwrap();
        assert_ne!(train_model.fingerprint(), all_model.fingerprint());
    }

    #[test]
    fn artifact_round_trip() {
        let (keys, samples, sources) = toy();
        let split = split_by_sample(&keys, &samples, 0.2, 1).unwrap();
        let out = run_sweep(&sources, &split, &params()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        out.best.save(&path).unwrap();
        let back = ModelArtifact::load(&path).unwrap();
        assert_eq!(back, out.best);
        std::fs::write(&path, serde_json::to_string(&ModelArtifact { version: 99, ..back }).unwrap()).unwrap();
        assert!(ModelArtifact::load(&path).is_err());
    }

    #[test]
    fn grid_csv_columns() {
        let r = EvalResult {
            combination: "tfidf".into(),
            f1: [0.8, 0.6, 0.9],
            macro_f1: (0.8 + 0.6 + 0.9) / 3.0,
            confusion: [[0; 3]; 3],
            absent: vec![],
        };
        let mut buf = Vec::new();
        write_results_grid(&mut buf, &[r], &["seed=1".into()]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "# seed=1\ncombination,f1_O,f1_F,f1_P,macro_f1\ntfidf,0.8000,0.9000,0.6000,0.7667\n"
        );
    }
}
