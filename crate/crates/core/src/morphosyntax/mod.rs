//! Distributions over UD part-of-speech tags, entity categories and
//! dependency relations, computed from CoNLL-U sidecar annotations.

mod conllu;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use conllu::{parse_conllu, parse_conllu_str, write_conllu, AnnotatedSentence, AnnotatedToken, Upos};

use crate::corpus::{ArtifactKind, Corpus, SidecarBundle};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

/// The 18 entity categories.
pub const NER_LABELS: [&str; 18] = [
    "PERSON",
    "NORP",
    "FAC",
    "ORG",
    "GPE",
    "LOC",
    "PRODUCT",
    "EVENT",
    "WORK_OF_ART",
    "LAW",
    "LANGUAGE",
    "DATE",
    "TIME",
    "PERCENT",
    "MONEY",
    "QUANTITY",
    "ORDINAL",
    "CARDINAL",
];

/// The 37 universal dependency relations.
pub const DEP_RELATIONS: [&str; 37] = [
    "acl",
    "advcl",
    "advmod",
    "amod",
    "appos",
    "aux",
    "case",
    "cc",
    "ccomp",
    "clf",
    "compound",
    "conj",
    "cop",
    "csubj",
    "dep",
    "det",
    "discourse",
    "dislocated",
    "expl",
    "fixed",
    "flat",
    "goeswith",
    "iobj",
    "list",
    "mark",
    "nmod",
    "nsubj",
    "nummod",
    "obj",
    "obl",
    "orphan",
    "parataxis",
    "punct",
    "reparandum",
    "root",
    "vocative",
    "xcomp",
];

fn ner_index(label: &str) -> Option<usize> {
    let canonical = match label {
        "PER" => "PERSON",
        "ORGANIZATION" => "ORG",
        "LOCATION" => "LOC",
        other => other,
    };
    NER_LABELS.iter().position(|l| *l == canonical)
}

/// Maps a relation label onto the universal vocabulary: lowercased, subtype
/// stripped (`nsubj:pass` → `nsubj`), anything else bucketed to `dep`.
pub fn dep_index(deprel: &str) -> usize {
    let base = deprel.split(':').next().unwrap_or("").to_lowercase();
    DEP_RELATIONS
        .iter()
        .position(|r| *r == base)
        .unwrap_or_else(|| DEP_RELATIONS.iter().position(|r| *r == "dep").unwrap())
}

pub fn token_count(sentences: &[AnnotatedSentence]) -> usize {
    sentences.iter().map(|s| s.tokens.len()).sum()
}

/// Tag frequencies over all tokens, in [`Upos::ALL`] order. `None` without
/// tokens.
pub fn pos_distribution(sentences: &[AnnotatedSentence]) -> Option<Vec<f64>> {
    let total = token_count(sentences);
    if total == 0 {
        return None;
    }
    let mut counts = vec![0usize; Upos::ALL.len()];
    for t in sentences.iter().flat_map(|s| &s.tokens) {
        counts[t.upos.index()] += 1;
    }
    Some(counts.into_iter().map(|c| c as f64 / total as f64).collect())
}

/// Pooled tag distribution of several texts (token-weighted).
pub fn pooled_pos_distribution<'a, I>(texts: I) -> Option<Vec<f64>>
where
    I: IntoIterator<Item = &'a [AnnotatedSentence]>,
{
    let all: Vec<AnnotatedSentence> = texts.into_iter().flat_map(|s| s.iter().cloned()).collect();
    pos_distribution(&all)
}

/// Entity mentions per sentence. Consecutive tokens sharing a label form
/// one mention unless a `B-` prefix starts a new one.
pub fn entity_mentions(sentence: &AnnotatedSentence) -> Vec<String> {
    let mut mentions = Vec::new();
    let mut open: Option<String> = None;
    for t in &sentence.tokens {
        let Some(raw) = t.ner.as_deref() else {
            open = None;
            continue;
        };
        let (begins, label) = if let Some(l) = raw.strip_prefix("B-") {
            (true, l)
        } else if let Some(l) = raw.strip_prefix("I-") {
            (false, l)
        } else {
            (false, raw)
        };
        if begins || open.as_deref() != Some(label) {
            mentions.push(label.to_string());
            open = Some(label.to_string());
        }
    }
    mentions
}

/// Mention counts per category over all mentions, in [`NER_LABELS`] order;
/// all zeros when there are no (known) mentions.
pub fn ner_distribution(sentences: &[AnnotatedSentence]) -> Vec<f64> {
    let mut counts = vec![0usize; NER_LABELS.len()];
    for label in sentences.iter().flat_map(entity_mentions) {
        match ner_index(&label) {
            Some(i) => counts[i] += 1,
            None => warn!("dropping unknown entity label `{label}`"),
        }
    }
    let total: usize = counts.iter().sum();
    if total == 0 {
        return vec![0.0; NER_LABELS.len()];
    }
    counts.into_iter().map(|c| c as f64 / total as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepMetrics {
    /// Relation frequencies in [`DEP_RELATIONS`] order.
    pub dep_dist: Vec<f64>,
    /// Mean number of edges from each token up to the synthetic root; a
    /// token attached directly to the root has depth 1.
    pub avg_tree_depth: f64,
}

fn sentence_label(s: &AnnotatedSentence, idx: usize) -> String {
    s.sent_id.clone().unwrap_or_else(|| (idx + 1).to_string())
}

/// Depth of every token of one sentence; fails on a head cycle.
pub fn token_depths(s: &AnnotatedSentence, idx: usize) -> Result<Vec<usize>> {
    let n = s.tokens.len();
    let mut depths = vec![0usize; n];
    for (i, depth) in depths.iter_mut().enumerate() {
        let mut node = i + 1;
        let mut d = 0;
        while node != 0 {
            d += 1;
            if d > n {
                return Err(Error::HeadCycle(sentence_label(s, idx)));
            }
            node = s.tokens[node - 1].head;
        }
        *depth = d;
    }
    Ok(depths)
}

pub fn dep_metrics(sentences: &[AnnotatedSentence]) -> Result<Option<DepMetrics>> {
    let total = token_count(sentences);
    if total == 0 {
        return Ok(None);
    }
    let mut counts = vec![0usize; DEP_RELATIONS.len()];
    let mut depth_sum = 0usize;
    for (idx, s) in sentences.iter().enumerate() {
        depth_sum += token_depths(s, idx)?.iter().sum::<usize>();
        for t in &s.tokens {
            counts[dep_index(&t.deprel)] += 1;
        }
    }
    Ok(Some(DepMetrics {
        dep_dist: counts.into_iter().map(|c| c as f64 / total as f64).collect(),
        avg_tree_depth: depth_sum as f64 / total as f64,
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorphoFeatures {
    pub pos_dist: Option<Vec<f64>>,
    pub ner_dist: Option<Vec<f64>>,
    pub dep: Option<DepMetrics>,
    /// Non-punctuation tokens per sentence.
    pub avg_sentence_length: Option<f64>,
}

impl MorphoFeatures {
    pub fn from_sentences(sentences: &[AnnotatedSentence]) -> Result<Self> {
        let tokens = token_count(sentences);
        let words = sentences
            .iter()
            .flat_map(|s| &s.tokens)
            .filter(|t| t.upos != Upos::Punct)
            .count();
        Ok(MorphoFeatures {
            pos_dist: pos_distribution(sentences),
            ner_dist: (tokens > 0).then(|| ner_distribution(sentences)),
            dep: dep_metrics(sentences)?,
            avg_sentence_length: (!sentences.is_empty()).then(|| words as f64 / sentences.len() as f64),
        })
    }

    pub fn undefined() -> Self {
        MorphoFeatures {
            pos_dist: None,
            ner_dist: None,
            dep: None,
            avg_sentence_length: None,
        }
    }

    /// Values in [`morpho_columns`] order.
    pub fn to_row(&self) -> Vec<Option<f64>> {
        fn spread(v: Option<&Vec<f64>>, n: usize) -> Vec<Option<f64>> {
            match v {
                Some(v) => v.iter().copied().map(Some).collect(),
                None => vec![None; n],
            }
        }
        let mut row = spread(self.pos_dist.as_ref(), Upos::ALL.len());
        row.extend(spread(self.ner_dist.as_ref(), NER_LABELS.len()));
        row.extend(spread(self.dep.as_ref().map(|d| &d.dep_dist), DEP_RELATIONS.len()));
        row.push(self.avg_sentence_length);
        row.push(self.dep.as_ref().map(|d| d.avg_tree_depth));
        row
    }
}

/// `pos_<TAG>` ×17, `ner_<LABEL>` ×18, `dep_<rel>` ×37, then
/// `avg_sentence_length` and `avg_tree_depth`.
pub fn morpho_columns() -> Vec<String> {
    let mut cols: Vec<String> = Upos::ALL.iter().map(|u| format!("pos_{u}")).collect();
    cols.extend(NER_LABELS.iter().map(|l| format!("ner_{l}")));
    cols.extend(DEP_RELATIONS.iter().map(|r| format!("dep_{r}")));
    cols.push("avg_sentence_length".into());
    cols.push("avg_tree_depth".into());
    cols
}

/// One row per text from its CoNLL-U sidecar. Without `strict`, texts
/// lacking an annotation get an undefined row.
pub fn extract_morpho(corpus: &Corpus, bundle: &SidecarBundle, strict: bool) -> Result<FeatureMatrix> {
    let keys = corpus.keys();
    if strict {
        bundle.require(ArtifactKind::Conllu, &keys)?;
    }
    let rows: Vec<Vec<Option<f64>>> = keys
        .par_iter()
        .map(|key| match bundle.get(ArtifactKind::Conllu, key) {
            Some(path) => Ok(MorphoFeatures::from_sentences(&parse_conllu(path)?)?.to_row()),
            None => {
                warn!("no CoNLL-U annotation for {key}");
                Ok(MorphoFeatures::undefined().to_row())
            }
        })
        .collect::<Result<_>>()?;
    let mut m = FeatureMatrix::new(morpho_columns());
    for (key, row) in keys.into_iter().zip(rows) {
        m.push_row(key, row)?;
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tok(upos: Upos, deprel: &str, head: usize, ner: Option<&str>) -> AnnotatedToken {
        AnnotatedToken {
            form: "w".into(),
            upos,
            deprel: deprel.into(),
            head,
            ner: ner.map(String::from),
        }
    }

    fn sentence(tokens: Vec<AnnotatedToken>) -> AnnotatedSentence {
        AnnotatedSentence { sent_id: None, tokens }
    }

    #[test]
    fn pos_counts() {
        let s = sentence(vec![
            tok(Upos::Noun, "nsubj", 2, None),
            tok(Upos::Verb, "root", 0, None),
            tok(Upos::Noun, "obj", 2, None),
            tok(Upos::Punct, "punct", 2, None),
        ]);
        let d = pos_distribution(&[s]).unwrap();
        assert_eq!(d[Upos::Noun.index()], 0.5);
        assert_eq!(d[Upos::Verb.index()], 0.25);
        assert_eq!(d[Upos::Punct.index()], 0.25);
        assert_eq!(d.iter().filter(|&&x| x == 0.0).count(), 14);
        let single = pos_distribution(&[sentence(vec![tok(Upos::Adv, "root", 0, None)])]).unwrap();
        assert_eq!(single[Upos::Adv.index()], 1.0);
        assert_eq!(pos_distribution(&[]), None);
    }

    #[test]
    fn ner_counts() {
        let s = sentence(vec![
            tok(Upos::Propn, "nsubj", 0, Some("PERSON")),
            tok(Upos::Cconj, "cc", 1, None),
            tok(Upos::Propn, "conj", 1, Some("PERSON")),
            tok(Upos::Propn, "conj", 1, Some("ORG")),
        ]);
        let d = ner_distribution(&[s]);
        assert!((d[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((d[3] - 1.0 / 3.0).abs() < 1e-12);
        let none = ner_distribution(&[sentence(vec![tok(Upos::Noun, "root", 0, None)])]);
        assert!(none.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn mention_grouping() {
        let s = sentence(vec![
            tok(Upos::Propn, "flat", 2, Some("B-PERSON")),
            tok(Upos::Propn, "root", 0, Some("I-PERSON")),
            tok(Upos::Propn, "conj", 2, Some("B-PERSON")),
            tok(Upos::Propn, "flat", 3, Some("GPE")),
            tok(Upos::Propn, "flat", 3, Some("PER")),
            tok(Upos::Propn, "flat", 3, Some("MISC")),
        ]);
        assert_eq!(entity_mentions(&s), ["PERSON", "PERSON", "GPE", "PER", "MISC"]);
        let d = ner_distribution(&[s]);
        assert!((d[0] - 0.75).abs() < 1e-12);
        assert!((d[4] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn depth_and_relations() {
        // root -> a -> b
        let chain = sentence(vec![tok(Upos::Verb, "root", 0, None), tok(Upos::Noun, "obj", 1, None)]);
        assert_eq!(dep_metrics(&[chain]).unwrap().unwrap().avg_tree_depth, 1.5);
        let flat = sentence(vec![tok(Upos::Noun, "root", 0, None), tok(Upos::Noun, "root", 0, None)]);
        assert_eq!(dep_metrics(&[flat]).unwrap().unwrap().avg_tree_depth, 1.0);
        let rels = sentence(vec![
            tok(Upos::Noun, "nsubj", 0, None),
            tok(Upos::Noun, "obj", 0, None),
            tok(Upos::Noun, "obj", 0, None),
        ]);
        let m = dep_metrics(&[rels]).unwrap().unwrap();
        assert!((m.dep_dist[dep_index("nsubj")] - 1.0 / 3.0).abs() < 1e-12);
        assert!((m.dep_dist[dep_index("obj")] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn relation_normalization() {
        assert_eq!(dep_index("nsubj:pass"), dep_index("nsubj"));
        assert_eq!(dep_index("ROOT"), dep_index("root"));
        assert_eq!(dep_index("pobj"), dep_index("dep"));
        assert_eq!(DEP_RELATIONS.len(), 37);
    }

    #[test]
    fn cycle_is_an_error() {
        let mut s = sentence(vec![tok(Upos::Noun, "dep", 2, None), tok(Upos::Noun, "dep", 1, None)]);
        s.sent_id = Some("loop".into());
        match dep_metrics(&[s]) {
            Err(Error::HeadCycle(id)) => assert_eq!(id, "loop"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn cconj_share_in_row() {
        let mut tokens = vec![tok(Upos::Verb, "root", 0, None)];
        tokens.extend((0..2).map(|_| tok(Upos::Cconj, "cc", 1, None)));
        tokens.extend((0..7).map(|_| tok(Upos::Noun, "conj", 1, None)));
        let row = MorphoFeatures::from_sentences(&[sentence(tokens)]).unwrap().to_row();
        let cols = morpho_columns();
        assert_eq!(row.len(), cols.len());
        assert_eq!(cols.len(), 17 + 18 + 37 + 2);
        let i = cols.iter().position(|c| c == "pos_CCONJ").unwrap();
        assert!((row[i].unwrap() - 0.2).abs() < 1e-12);
    }

    fn arb_sentence() -> impl Strategy<Value = AnnotatedSentence> {
        prop::collection::vec((0usize..17, 0usize..40), 1..12).prop_map(|layout| {
            let n = layout.len();
            let tokens = layout
                .into_iter()
                .enumerate()
                .map(|(i, (u, r))| AnnotatedToken {
                    form: format!("t{i}"),
                    upos: Upos::ALL[u],
                    deprel: DEP_RELATIONS.get(r).copied().unwrap_or("weird").to_string(),
                    // each token points at an earlier one, so heads form a tree
                    head: if i == 0 { 0 } else { (r % i) + 1 }.min(n),
                    ner: None,
                })
                .collect();
            AnnotatedSentence { sent_id: None, tokens }
        })
    }

    proptest! {
        #[test]
        fn distributions_normalized(sentences in prop::collection::vec(arb_sentence(), 1..4)) {
            let pos: f64 = pos_distribution(&sentences).unwrap().iter().sum();
            prop_assert!((pos - 1.0).abs() < 1e-9);
            let dep: f64 = dep_metrics(&sentences).unwrap().unwrap().dep_dist.iter().sum();
            prop_assert!((dep - 1.0).abs() < 1e-9);
            let again = parse_conllu_str(&write_conllu(&sentences), std::path::Path::new("rt")).unwrap();
            prop_assert_eq!(pos_distribution(&again), pos_distribution(&sentences));
        }

        #[test]
        fn pooled_equals_token_weighted_mean(texts in prop::collection::vec(prop::collection::vec(arb_sentence(), 1..3), 1..5)) {
            let pooled = pooled_pos_distribution(texts.iter().map(Vec::as_slice)).unwrap();
            let total: usize = texts.iter().map(|t| token_count(t)).sum();
            for (k, p) in pooled.iter().enumerate() {
                let weighted: f64 = texts
                    .iter()
                    .map(|t| token_count(t) as f64 * pos_distribution(t).unwrap()[k])
                    .sum::<f64>() / total as f64;
                prop_assert!((p - weighted).abs() < 1e-12);
            }
        }
    }
}
