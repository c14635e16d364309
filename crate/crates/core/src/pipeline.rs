//! Stage orchestration behind the command-line subcommands. Every stage
//! recomputes what it needs from the configured inputs.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::Serialize;

use crate::alignment::{similarity_report, SimilarityReport, write_similarity_grid};
use crate::clustering::{load_embeddings, run_clustering, write_assignments, ClusteringOutcome};
use crate::config::PipelineConfig;
use crate::corpus::{attach_sidecars, load_dataset, split_variants, CoverageReport, Dataset, SampleKey, SidecarBundle, Variant};
use crate::detector::{run_sweep, split_by_sample, write_results_grid, BlockSource, SweepOutcome};
use crate::encoders::{dense_block, load_instruction_embeddings, BlockId, FeatureBlock, VectorTable};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::morphosyntax::extract_morpho;
use crate::semantics::{corpus_label_stats, extract_semantic, write_label_stats, LabelVocabulary};
use crate::textstats::{extract_quant, Lexicons, QuantConfig};

pub const FEATURE_LEVELS: [&str; 3] = ["quant", "morpho", "semantic"];
pub const ROW_NAMES: [&str; 3] = ["NeLa", "Morphosyntactic", "Semantic"];

/// Per-level feature matrices indexed by [`Variant::index`].
#[derive(Debug, Clone)]
pub struct FeatureSet {
    pub quant: [FeatureMatrix; 3],
    pub morpho: [FeatureMatrix; 3],
    pub semantic: [FeatureMatrix; 3],
}

impl FeatureSet {
    pub fn level(&self, i: usize) -> &[FeatureMatrix; 3] {
        match i {
            0 => &self.quant,
            1 => &self.morpho,
            _ => &self.semantic,
        }
    }
}

#[derive(Debug, Serialize)]
struct IngestSummary<'a> {
    config_digest: &'a str,
    seed: u64,
    dataset: &'a Path,
    lang: &'a str,
    samples: usize,
    texts: usize,
    warnings: &'a [String],
    coverage: CoverageReport,
}

#[derive(Debug, Serialize)]
struct ClusterSummary<'a> {
    config_digest: &'a str,
    seed: u64,
    rows: usize,
    clusters: usize,
    iterations: usize,
    converged: bool,
    explained_variance_ratio: &'a [f64],
    compositions: BTreeMap<String, &'a Vec<f64>>,
}

#[derive(Debug, Serialize)]
struct SimilaritySummary<'a> {
    config_digest: &'a str,
    seed: u64,
    self_check: bool,
    reports: &'a [SimilarityReport],
}

#[derive(Debug, Serialize)]
struct RunMetadata<'a> {
    config_digest: &'a str,
    seed: u64,
    split_digest: &'a str,
    train_rows: usize,
    test_rows: usize,
    blocks: Vec<BlockId>,
    combinations: usize,
    best_combination: &'a str,
    best_macro_f1: f64,
    params: &'a crate::detector::GbdtParams,
    test_fraction: f64,
    fingerprints: &'a BTreeMap<String, String>,
}

pub struct Pipeline {
    pub config: PipelineConfig,
    pub out: PathBuf,
    pub digest: String,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w).map_err(|e| Error::io(path, e))?;
    finish(w, path)
}

/// Copy of `m` whose rows all claim to come from `v`.
fn relabel(m: &FeatureMatrix, v: Variant) -> FeatureMatrix {
    let mut out = m.clone();
    for k in &mut out.keys {
        k.variant = v;
    }
    out
}

impl Pipeline {
    /// `out` defaults to the config's output directory, then `./out`.
    pub fn new(config: PipelineConfig, out: Option<PathBuf>) -> Result<Self> {
        config.validate()?;
        let out = out.or_else(|| config.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
        let digest = config.digest();
        Ok(Pipeline { config, out, digest })
    }

    pub fn preamble(&self) -> Vec<String> {
        vec![format!("config_digest={} seed={}", self.digest, self.config.seed)]
    }

    fn path(&self, name: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.out).map_err(|e| Error::io(&self.out, e))?;
        Ok(self.out.join(name))
    }

    pub fn load(&self) -> Result<(Dataset, SidecarBundle)> {
        let dataset = load_dataset(&self.config.dataset, self.config.lang)?;
        for w in &dataset.warnings {
            warn!("{w}");
        }
        let bundle = match &self.config.manifest {
            Some(m) => attach_sidecars(&dataset, m)?,
            None => SidecarBundle::empty(&dataset),
        };
        Ok((dataset, bundle))
    }

    pub fn ingest(&self) -> Result<(Dataset, SidecarBundle)> {
        let (dataset, bundle) = self.load()?;
        let path = self.path("coverage.json")?;
        write_json(
            &path,
            &IngestSummary {
                config_digest: &self.digest,
                seed: self.config.seed,
                dataset: &self.config.dataset,
                lang: self.config.lang.code(),
                samples: dataset.len(),
                texts: dataset.len() * 3,
                warnings: &dataset.warnings,
                coverage: bundle.coverage(),
            },
        )?;
        info!("ingested {} samples", dataset.len());
        Ok((dataset, bundle))
    }

    fn lexicons(&self) -> Result<Lexicons> {
        match &self.config.lexicons {
            Some(l) => Lexicons::load(&l.affect, &l.bias, &l.moral),
            None => Ok(Lexicons::bundled()),
        }
    }

    pub fn compute_features(&self, dataset: &Dataset, bundle: &SidecarBundle) -> Result<FeatureSet> {
        let corpora = split_variants(dataset);
        let lexicons = self.lexicons()?;
        let quant_config = QuantConfig {
            readability: self.config.readability,
        };
        let strict = self.config.strict;
        let vocab = LabelVocabulary::default();
        let quant = corpora.each_ref().map(|c| extract_quant(c, &lexicons, quant_config));
        let [mo, mp, mf] = corpora.each_ref().map(|c| extract_morpho(c, bundle, strict));
        let [so, sp, sf] = corpora.each_ref().map(|c| extract_semantic(c, bundle, &vocab, strict));
        Ok(FeatureSet {
            quant,
            morpho: [mo?, mp?, mf?],
            semantic: [so?, sp?, sf?],
        })
    }

    pub fn write_features(&self, features: &FeatureSet) -> Result<()> {
        let preamble = self.preamble();
        let dir = self.path("features")?;
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for (i, level) in FEATURE_LEVELS.iter().enumerate() {
            for v in Variant::ALL {
                let path = dir.join(format!("{level}_{}.csv", v.code()));
                let mut w = create(&path)?;
                features.level(i)[v.index()].write_csv(&mut w, &preamble)?;
                finish(w, &path)?;
            }
        }
        let vocab = LabelVocabulary::default();
        let mut stats = Vec::new();
        for v in Variant::ALL {
            stats.extend(corpus_label_stats(&features.semantic[v.index()], v, &vocab)?);
        }
        let path = dir.join("label_stats.csv");
        let mut w = create(&path)?;
        write_label_stats(&mut w, &stats, &preamble)?;
        finish(w, &path)
    }

    pub fn features(&self) -> Result<FeatureSet> {
        let (dataset, bundle) = self.load()?;
        let features = self.compute_features(&dataset, &bundle)?;
        self.write_features(&features)?;
        Ok(features)
    }

    pub fn compute_clustering(&self, dataset: &Dataset, bundle: &SidecarBundle) -> Result<ClusteringOutcome> {
        let embeddings = load_embeddings(&dataset.keys(), bundle, self.config.strict)?;
        run_clustering(self.config.lang, &embeddings, &self.config.clustering)
    }

    pub fn write_clustering(&self, outcome: &ClusteringOutcome) -> Result<()> {
        let path = self.path("assignments.csv")?;
        let mut w = create(&path)?;
        write_assignments(&mut w, &outcome.keys, &outcome.assignment, &self.preamble())?;
        finish(w, &path)?;
        write_json(
            &self.path("clusters.json")?,
            &ClusterSummary {
                config_digest: &self.digest,
                seed: self.config.seed,
                rows: outcome.keys.len(),
                clusters: outcome.assignment.n_clusters(),
                iterations: outcome.assignment.iterations,
                converged: outcome.assignment.converged,
                explained_variance_ratio: &outcome.explained_variance_ratio,
                compositions: outcome.compositions.iter().map(|(v, c)| (v.code().to_string(), c)).collect(),
            },
        )
    }

    pub fn cluster(&self) -> Result<ClusteringOutcome> {
        let (dataset, bundle) = self.load()?;
        let outcome = self.compute_clustering(&dataset, &bundle)?;
        self.write_clustering(&outcome)?;
        Ok(outcome)
    }

    /// The NeLa, morphosyntactic and semantic rows plus the cluster row.
    /// With `self_check`, every variant is replaced by the original texts.
    pub fn compute_similarity(
        &self,
        features: &FeatureSet,
        clustering: &ClusteringOutcome,
        self_check: bool,
    ) -> Result<Vec<SimilarityReport>> {
        let lang = self.config.lang;
        let mut reports = Vec::new();
        for (i, name) in ROW_NAMES.iter().enumerate() {
            let level = features.level(i);
            let matrices: Vec<FeatureMatrix> = Variant::ALL
                .iter()
                .map(|&v| {
                    if self_check {
                        relabel(&level[Variant::Original.index()], v)
                    } else {
                        level[v.index()].clone()
                    }
                })
                .collect();
            let pairs: Vec<(Variant, &FeatureMatrix)> = Variant::ALL.iter().copied().zip(&matrices).collect();
            reports.push(similarity_report(name, lang, &pairs, self.config.normalization)?);
        }
        let mut compositions = clustering.compositions.clone();
        if self_check {
            let o = compositions
                .get(&Variant::Original)
                .cloned()
                .ok_or_else(|| Error::InvalidArgument("no original rows were clustered".into()))?;
            compositions = Variant::ALL.iter().map(|&v| (v, o.clone())).collect();
        }
        reports.push(crate::clustering::cluster_similarity_report(lang, &compositions)?);
        Ok(reports)
    }

    pub fn write_similarity(&self, reports: &[SimilarityReport], self_check: bool) -> Result<()> {
        let path = self.path("similarity.csv")?;
        let mut w = create(&path)?;
        write_similarity_grid(&mut w, reports, &self.preamble())?;
        finish(w, &path)?;
        write_json(
            &self.path("similarity.json")?,
            &SimilaritySummary {
                config_digest: &self.digest,
                seed: self.config.seed,
                self_check,
                reports,
            },
        )
    }

    pub fn align(&self, self_check: bool) -> Result<Vec<SimilarityReport>> {
        let (dataset, bundle) = self.load()?;
        let features = self.compute_features(&dataset, &bundle)?;
        let clustering = self.compute_clustering(&dataset, &bundle)?;
        let reports = self.compute_similarity(&features, &clustering, self_check)?;
        self.write_similarity(&reports, self_check)?;
        Ok(reports)
    }

    /// Blocks whose inputs are available, restricted to the configured list.
    pub fn block_sources(&self, dataset: &Dataset, bundle: &SidecarBundle, features: &FeatureSet) -> Result<Vec<BlockSource>> {
        let keys: Vec<SampleKey> = dataset.keys();
        let wanted = |id: BlockId| self.config.detector.blocks.as_ref().is_none_or(|b| b.contains(&id));
        let texts: Vec<String> = dataset
            .samples
            .iter()
            .flat_map(|s| Variant::ALL.map(|v| s.reply(v).to_string()))
            .collect();
        let mut sources = Vec::new();
        if wanted(BlockId::Tfidf) {
            sources.push(BlockSource::Tfidf {
                keys: keys.clone(),
                texts: texts.clone(),
                config: self.config.detector.tfidf,
            });
        }
        if wanted(BlockId::Dense) {
            match &self.config.vectors {
                Some(path) => {
                    let table = VectorTable::load(path)?;
                    let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
                    let block = dense_block(keys.clone(), &refs, &table)?;
                    if !block.flagged.is_empty() {
                        warn!("{} texts have no token in the vector table", block.flagged.len());
                    }
                    sources.push(BlockSource::Fixed(block));
                }
                None => info!("no vector table configured; skipping the dense block"),
            }
        }
        if wanted(BlockId::Instr) {
            if bundle.embedding_paths.is_empty() {
                info!("no embeddings in the manifest; skipping the instr block");
            } else {
                sources.push(BlockSource::Fixed(load_instruction_embeddings(&keys, bundle, self.config.strict)?));
            }
        }
        let levels = [
            (BlockId::Nela, &features.quant, true),
            (BlockId::Spacy, &features.morpho, !bundle.conllu_paths.is_empty()),
            (BlockId::Tweeteval, &features.semantic, !bundle.semantic_label_paths.is_empty()),
        ];
        for (id, mats, available) in levels {
            if !wanted(id) {
                continue;
            }
            if !available {
                info!("no sidecar inputs for the {id} block; skipping");
                continue;
            }
            let refs: Vec<&FeatureMatrix> = mats.iter().collect();
            sources.push(BlockSource::Features(FeatureBlock::from_matrices(id, &keys, &refs)?));
        }
        if sources.is_empty() {
            return Err(Error::Config("no detection blocks are available".into()));
        }
        Ok(sources)
    }

    pub fn compute_detection(&self, dataset: &Dataset, bundle: &SidecarBundle, features: &FeatureSet) -> Result<(SweepOutcome, crate::detector::DataSplit, Vec<BlockId>)> {
        let sources = self.block_sources(dataset, bundle, features)?;
        let samples: Vec<(String, crate::corpus::Lang)> = dataset.samples.iter().map(|s| (s.id.clone(), s.lang)).collect();
        let split = split_by_sample(sources[0].keys(), &samples, self.config.detector.test_fraction, self.config.seed)?;
        let ids = sources.iter().map(BlockSource::id).collect();
        let outcome = run_sweep(&sources, &split, &self.config.detector.gbdt)?;
        Ok((outcome, split, ids))
    }

    pub fn write_detection(&self, outcome: &SweepOutcome, split: &crate::detector::DataSplit, blocks: Vec<BlockId>) -> Result<()> {
        let path = self.path("detect_grid.csv")?;
        let mut w = create(&path)?;
        write_results_grid(&mut w, &outcome.results, &self.preamble())?;
        finish(w, &path)?;
        outcome.best.save(self.path("model.json")?)?;
        write_json(
            &self.path("run.json")?,
            &RunMetadata {
                config_digest: &self.digest,
                seed: self.config.seed,
                split_digest: &split.digest,
                train_rows: split.train.len(),
                test_rows: split.test.len(),
                blocks,
                combinations: outcome.results.len(),
                best_combination: &outcome.best.combination,
                best_macro_f1: outcome.results[0].macro_f1,
                params: &self.config.detector.gbdt,
                test_fraction: self.config.detector.test_fraction,
                fingerprints: &outcome.best.fingerprints,
            },
        )
    }

    pub fn detect(&self) -> Result<SweepOutcome> {
        let (dataset, bundle) = self.load()?;
        let features = self.compute_features(&dataset, &bundle)?;
        let (outcome, split, blocks) = self.compute_detection(&dataset, &bundle, &features)?;
        self.write_detection(&outcome, &split, blocks)?;
        Ok(outcome)
    }

    /// Every stage in order, sharing intermediate results.
    pub fn report(&self) -> Result<(Vec<SimilarityReport>, SweepOutcome)> {
        let (dataset, bundle) = self.ingest()?;
        let features = self.compute_features(&dataset, &bundle)?;
        self.write_features(&features)?;
        let clustering = self.compute_clustering(&dataset, &bundle)?;
        self.write_clustering(&clustering)?;
        let reports = self.compute_similarity(&features, &clustering, false)?;
        self.write_similarity(&reports, false)?;
        let (outcome, split, blocks) = self.compute_detection(&dataset, &bundle, &features)?;
        self.write_detection(&outcome, &split, blocks)?;
        Ok((reports, outcome))
    }
}
