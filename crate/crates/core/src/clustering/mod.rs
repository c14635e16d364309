pub mod affinity;
pub mod embeddings;
pub mod pca;

use std::collections::BTreeMap;
use std::io::Write;

use log::{info, warn};
use serde::{Deserialize, Serialize};

pub use affinity::{affinity_propagation, median_off_diagonal, neg_sq_euclidean, ApParams, ClusterAssignment, Preference};
pub use embeddings::{load_embeddings, read_embedding, EmbeddingMatrix};
pub use pca::{pca_fit_transform, Pca, PcaProjection};

use crate::alignment::{report_from_profiles, CorpusProfile, NormalizationMode, SimilarityReport};
use crate::corpus::{Lang, SampleKey, Variant};
use crate::error::{Error, Result};

pub const CLUSTER_FEATURE_SET: &str = "Cluster";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterConfig {
    pub pca_dims: usize,
    pub damping: f64,
    pub max_iter: usize,
    pub convergence_window: usize,
    /// `None` uses the median off-diagonal similarity.
    pub preference: Option<f64>,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            pca_dims: 50,
            damping: 0.7,
            max_iter: 500,
            convergence_window: 25,
            preference: None,
        }
    }
}

impl ClusterConfig {
    pub fn ap_params(&self) -> ApParams {
        ApParams {
            preference: self.preference.map_or(Preference::Median, Preference::Value),
            damping: self.damping,
            max_iter: self.max_iter,
            convergence_window: self.convergence_window,
        }
    }
}

/// Fraction of each variant's rows falling in each cluster. Variants with
/// no rows are left out.
pub fn composition_vectors(assignment: &ClusterAssignment, keys: &[SampleKey]) -> Result<BTreeMap<Variant, Vec<f64>>> {
    if assignment.exemplar.len() != keys.len() {
        return Err(Error::Dimension {
            expected: keys.len(),
            found: assignment.exemplar.len(),
        });
    }
    let k = assignment.n_clusters();
    let labels = assignment.labels();
    let mut counts: BTreeMap<Variant, Vec<usize>> = BTreeMap::new();
    for (key, &c) in keys.iter().zip(&labels) {
        counts.entry(key.variant).or_insert_with(|| vec![0; k])[c] += 1;
    }
    for v in Variant::ALL {
        if !counts.contains_key(&v) {
            warn!("variant {v} has no clustered rows");
        }
    }
    Ok(counts
        .into_iter()
        .map(|(v, c)| {
            let total: usize = c.iter().sum();
            (v, c.iter().map(|&n| n as f64 / total as f64).collect())
        })
        .collect())
}

/// Pairwise cosines of the composition vectors, unnormalized.
pub fn cluster_similarity_report(lang: Lang, compositions: &BTreeMap<Variant, Vec<f64>>) -> Result<SimilarityReport> {
    let k = compositions.values().next().map_or(0, Vec::len);
    if compositions.values().any(|c| c.len() != k) {
        return Err(Error::InvalidArgument("composition vectors differ in length".into()));
    }
    let columns: Vec<String> = (0..k).map(|c| format!("cluster_{c}")).collect();
    let profiles: Vec<CorpusProfile> = compositions
        .iter()
        .map(|(&variant, values)| CorpusProfile {
            variant,
            feature_set: CLUSTER_FEATURE_SET.to_string(),
            columns: columns.clone(),
            values: values.clone(),
            support: vec![0; k],
            undefined: vec![],
        })
        .collect();
    report_from_profiles(CLUSTER_FEATURE_SET, lang, &profiles, NormalizationMode::None)
}

#[derive(Debug, Clone)]
pub struct ClusteringOutcome {
    pub keys: Vec<SampleKey>,
    pub assignment: ClusterAssignment,
    pub explained_variance_ratio: Vec<f64>,
    pub compositions: BTreeMap<Variant, Vec<f64>>,
    pub report: SimilarityReport,
}

/// PCA over all rows jointly, then AP on negative squared distances.
pub fn run_clustering(lang: Lang, embeddings: &EmbeddingMatrix, config: &ClusterConfig) -> Result<ClusteringOutcome> {
    let rows = embeddings.n_rows();
    if rows < 2 {
        return Err(Error::InvalidArgument(format!("clustering needs at least 2 embeddings, got {rows}")));
    }
    let k = config.pca_dims.min(rows - 1).min(embeddings.dim).max(1);
    let projection = pca_fit_transform(&embeddings.values, rows, embeddings.dim, k)?;
    let similarity = neg_sq_euclidean(&projection.projected, rows, k);
    let assignment = affinity_propagation(&similarity, rows, &config.ap_params())?;
    if !assignment.converged {
        warn!("affinity propagation did not converge in {} iterations", assignment.iterations);
    }
    info!(
        "{} clusters over {rows} rows after {} iterations",
        assignment.n_clusters(),
        assignment.iterations
    );
    let compositions = composition_vectors(&assignment, &embeddings.keys)?;
    let report = cluster_similarity_report(lang, &compositions)?;
    Ok(ClusteringOutcome {
        keys: embeddings.keys.clone(),
        assignment,
        explained_variance_ratio: projection.pca.explained_variance_ratio,
        compositions,
        report,
    })
}

/// CSV `sample_id,variant,cluster,exemplar_id`.
pub fn write_assignments<W: Write>(
    mut out: W,
    keys: &[SampleKey],
    assignment: &ClusterAssignment,
    preamble: &[String],
) -> Result<()> {
    for line in preamble {
        writeln!(out, "# {line}").map_err(|e| Error::io("<csv>", e))?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sample_id", "variant", "cluster", "exemplar_id"])?;
    for ((key, &c), &e) in keys.iter().zip(&assignment.labels()).zip(&assignment.exemplar) {
        w.write_record([key.id.clone(), key.variant.code().to_string(), c.to_string(), keys[e].to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
