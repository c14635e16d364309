use std::collections::HashSet;
use std::fs;
use std::path::Path;

use super::tokenize::TokenizedText;
use crate::error::{Error, Result};

/// A case-insensitive word list.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    pub name: String,
    words: HashSet<String>,
}

impl Lexicon {
    pub fn new<I, S>(name: &str, words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Lexicon {
            name: name.to_string(),
            words: words.into_iter().map(|w| w.as_ref().to_lowercase()).collect(),
        }
    }

    /// One word per line; blank lines and `#` comments are ignored.
    pub fn parse(name: &str, content: &str) -> Self {
        Lexicon::new(
            name,
            content
                .lines()
                .map(|l| l.split('#').next().unwrap_or("").trim())
                .filter(|l| !l.is_empty()),
        )
    }

    pub fn load(name: &str, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let content = fs::read_to_string(path).map_err(|_| Error::MissingLexicon {
            name: name.to_string(),
            path: path.to_path_buf(),
        })?;
        Ok(Lexicon::parse(name, &content))
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(&word.to_lowercase())
    }

    /// Matched word tokens over word tokens; `None` for a text without words.
    pub fn rate(&self, t: &TokenizedText) -> Option<f64> {
        let total = t.word_count();
        if total == 0 {
            return None;
        }
        let hits = t.words().filter(|w| self.contains(w)).count();
        Some(hits as f64 / total as f64)
    }
}

/// The affect, bias and moral word lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicons {
    pub affect: Lexicon,
    pub bias: Lexicon,
    pub moral: Lexicon,
}

impl Lexicons {
    /// Small bundled lists covering English and German.
    pub fn bundled() -> Self {
        Lexicons {
            affect: Lexicon::parse("affect", include_str!("../../lexicons/affect.txt")),
            bias: Lexicon::parse("bias", include_str!("../../lexicons/bias.txt")),
            moral: Lexicon::parse("moral", include_str!("../../lexicons/moral.txt")),
        }
    }

    pub fn load(affect: &Path, bias: &Path, moral: &Path) -> Result<Self> {
        Ok(Lexicons {
            affect: Lexicon::load("affect", affect)?,
            bias: Lexicon::load("bias", bias)?,
            moral: Lexicon::load("moral", moral)?,
        })
    }
}

/// Per-lexicon match rates in affect, bias, moral order.
pub fn lexicon_rates(t: &TokenizedText, lexicons: &Lexicons) -> [Option<f64>; 3] {
    [
        lexicons.affect.rate(t),
        lexicons.bias.rate(t),
        lexicons.moral.rate(t),
    ]
}
