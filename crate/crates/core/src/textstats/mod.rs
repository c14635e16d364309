//! Quantitative text statistics: lexical diversity, readability, style and
//! lexicon-backed affect/bias/moral rates.

mod lexicon;
mod readability;
mod tokenize;

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use lexicon::{lexicon_rates, Lexicon, Lexicons};
pub use readability::{
    count_syllables, flesch_kincaid, flesch_kincaid_grade, gunning_fog, gunning_fog_index, FogScore,
};
pub use tokenize::{tokenize, Token, TokenizedText};

use crate::corpus::Corpus;
use crate::features::FeatureMatrix;

/// Column order of the quantitative feature matrix.
pub const QUANT_COLUMNS: [&str; 14] = [
    "type_token_ratio",
    "avg_sentence_length",
    "avg_word_length",
    "flesch_kincaid_grade",
    "gunning_fog",
    "complex_word_ratio",
    "punctuation_ratio",
    "uppercase_ratio",
    "exclamation_count",
    "question_count",
    "hapax_ratio",
    "affect_lexicon_rate",
    "bias_lexicon_rate",
    "moral_lexicon_rate",
];

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct QuantFeatures {
    pub type_token_ratio: Option<f64>,
    pub avg_sentence_length: Option<f64>,
    pub avg_word_length: Option<f64>,
    pub flesch_kincaid_grade: Option<f64>,
    pub gunning_fog: Option<f64>,
    pub complex_word_ratio: Option<f64>,
    pub punctuation_ratio: Option<f64>,
    pub uppercase_ratio: Option<f64>,
    pub exclamation_count: Option<f64>,
    pub question_count: Option<f64>,
    pub hapax_ratio: Option<f64>,
    pub affect_lexicon_rate: Option<f64>,
    pub bias_lexicon_rate: Option<f64>,
    pub moral_lexicon_rate: Option<f64>,
}

impl QuantFeatures {
    /// Values in [`QUANT_COLUMNS`] order.
    pub fn to_row(&self) -> Vec<Option<f64>> {
        vec![
            self.type_token_ratio,
            self.avg_sentence_length,
            self.avg_word_length,
            self.flesch_kincaid_grade,
            self.gunning_fog,
            self.complex_word_ratio,
            self.punctuation_ratio,
            self.uppercase_ratio,
            self.exclamation_count,
            self.question_count,
            self.hapax_ratio,
            self.affect_lexicon_rate,
            self.bias_lexicon_rate,
            self.moral_lexicon_rate,
        ]
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LexicalFeatures {
    pub type_token_ratio: Option<f64>,
    pub hapax_ratio: Option<f64>,
    pub avg_sentence_length: Option<f64>,
    pub avg_word_length: Option<f64>,
}

/// Diversity and length statistics over word tokens (lowercased for type
/// counting). All `None` for a text without words.
pub fn lexical_features(t: &TokenizedText) -> LexicalFeatures {
    let words = t.word_count();
    if words == 0 {
        return LexicalFeatures::default();
    }
    let mut freq: HashMap<String, usize> = HashMap::new();
    let mut word_chars = 0usize;
    for w in t.words() {
        word_chars += w.chars().count();
        *freq.entry(w.to_lowercase()).or_default() += 1;
    }
    let hapax = freq.values().filter(|&&c| c == 1).count();
    let n = words as f64;
    LexicalFeatures {
        type_token_ratio: Some(freq.len() as f64 / n),
        hapax_ratio: Some(hapax as f64 / n),
        avg_sentence_length: Some(n / t.sentence_count() as f64),
        avg_word_length: Some(word_chars as f64 / n),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantConfig {
    /// Emit Flesch-Kincaid and Gunning fog; when off both columns (and the
    /// complex word ratio) are undefined.
    pub readability: bool,
}

impl Default for QuantConfig {
    fn default() -> Self {
        QuantConfig { readability: true }
    }
}

/// Full feature vector of one text. A text without tokens is entirely
/// undefined.
pub fn quant_features(text: &str, lexicons: &Lexicons, config: QuantConfig) -> QuantFeatures {
    let t = tokenize(text);
    if t.is_empty() {
        return QuantFeatures::default();
    }
    let lex = lexical_features(&t);
    let fog = if config.readability { gunning_fog(&t) } else { None };
    let fk = if config.readability { flesch_kincaid(&t) } else { None };
    let (mut letters, mut upper) = (0usize, 0usize);
    let (mut exclaim, mut question) = (0usize, 0usize);
    for c in text.chars() {
        if c.is_alphabetic() {
            letters += 1;
            if c.is_uppercase() {
                upper += 1;
            }
        }
        match c {
            '!' => exclaim += 1,
            '?' => question += 1,
            _ => {}
        }
    }
    let [affect, bias, moral] = lexicon_rates(&t, lexicons);
    QuantFeatures {
        type_token_ratio: lex.type_token_ratio,
        avg_sentence_length: lex.avg_sentence_length,
        avg_word_length: lex.avg_word_length,
        flesch_kincaid_grade: fk,
        gunning_fog: fog.map(|f| f.grade),
        complex_word_ratio: fog.map(|f| f.complex_word_ratio),
        punctuation_ratio: Some(t.punctuation_count() as f64 / t.tokens.len() as f64),
        uppercase_ratio: (letters > 0).then(|| upper as f64 / letters as f64),
        exclamation_count: Some(exclaim as f64),
        question_count: Some(question as f64),
        hapax_ratio: lex.hapax_ratio,
        affect_lexicon_rate: affect,
        bias_lexicon_rate: bias,
        moral_lexicon_rate: moral,
    }
}

/// One row per text of the corpus, columns in [`QUANT_COLUMNS`] order.
pub fn extract_quant(corpus: &Corpus, lexicons: &Lexicons, config: QuantConfig) -> FeatureMatrix {
    let rows: Vec<Vec<Option<f64>>> = corpus
        .texts
        .par_iter()
        .map(|(_, text)| quant_features(text, lexicons, config).to_row())
        .collect();
    let mut m = FeatureMatrix::new(QUANT_COLUMNS.iter().map(|s| s.to_string()).collect());
    for (key, row) in corpus.keys().into_iter().zip(rows) {
        m.push_row(key, row).expect("row width matches QUANT_COLUMNS");
    }
    m
}
