use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Universal Dependencies part-of-speech tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Upos {
    Adj,
    Adp,
    Adv,
    Aux,
    Cconj,
    Det,
    Intj,
    Noun,
    Num,
    Part,
    Pron,
    Propn,
    Punct,
    Sconj,
    Sym,
    Verb,
    X,
}

impl Upos {
    pub const ALL: [Upos; 17] = [
        Upos::Adj,
        Upos::Adp,
        Upos::Adv,
        Upos::Aux,
        Upos::Cconj,
        Upos::Det,
        Upos::Intj,
        Upos::Noun,
        Upos::Num,
        Upos::Part,
        Upos::Pron,
        Upos::Propn,
        Upos::Punct,
        Upos::Sconj,
        Upos::Sym,
        Upos::Verb,
        Upos::X,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Upos::Adj => "ADJ",
            Upos::Adp => "ADP",
            Upos::Adv => "ADV",
            Upos::Aux => "AUX",
            Upos::Cconj => "CCONJ",
            Upos::Det => "DET",
            Upos::Intj => "INTJ",
            Upos::Noun => "NOUN",
            Upos::Num => "NUM",
            Upos::Part => "PART",
            Upos::Pron => "PRON",
            Upos::Propn => "PROPN",
            Upos::Punct => "PUNCT",
            Upos::Sconj => "SCONJ",
            Upos::Sym => "SYM",
            Upos::Verb => "VERB",
            Upos::X => "X",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Upos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Upos {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        Upos::ALL.into_iter().find(|u| u.as_str() == s).ok_or(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedToken {
    pub form: String,
    pub upos: Upos,
    /// Relation label as written in the file (subtypes included).
    pub deprel: String,
    /// 1-based index of the head within the sentence, 0 for the root.
    pub head: usize,
    /// Entity label from `NER=` in MISC, possibly with a `B-`/`I-` prefix.
    pub ner: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedSentence {
    pub sent_id: Option<String>,
    pub tokens: Vec<AnnotatedToken>,
}

pub fn parse_conllu(path: impl AsRef<Path>) -> Result<Vec<AnnotatedSentence>> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_conllu_str(&content, path)
}

struct PendingSentence {
    sentence: AnnotatedSentence,
    // file line of each token, for head validation errors
    lines: Vec<usize>,
}

/// Parses CoNLL-U text. Multi-word ranges (`3-4`) and empty nodes (`5.1`)
/// are skipped; unknown UPOS tags become `X`.
pub fn parse_conllu_str(content: &str, origin: &Path) -> Result<Vec<AnnotatedSentence>> {
    let mut sentences = Vec::new();
    let mut current = PendingSentence {
        sentence: AnnotatedSentence::default(),
        lines: Vec::new(),
    };
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };

    let finish = |pending: &mut PendingSentence, out: &mut Vec<AnnotatedSentence>| -> Result<()> {
        let n = pending.sentence.tokens.len();
        for (tok, &line) in pending.sentence.tokens.iter().zip(&pending.lines) {
            if tok.head > n {
                return Err(err(line, format!("head {} outside sentence of {n} tokens", tok.head)));
            }
        }
        if n > 0 {
            out.push(std::mem::take(&mut pending.sentence));
        } else {
            pending.sentence = AnnotatedSentence::default();
        }
        pending.lines.clear();
        Ok(())
    };

    for (i, raw) in content.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            finish(&mut current, &mut sentences)?;
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(id) = comment.trim().strip_prefix("sent_id") {
                let id = id.trim_start().trim_start_matches('=').trim();
                current.sentence.sent_id = Some(id.to_string());
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(err(line_no, format!("expected 10 tab-separated columns, found {}", cols.len())));
        }
        if cols[0].contains('-') || cols[0].contains('.') {
            continue;
        }
        let position: usize = cols[0]
            .parse()
            .map_err(|_| err(line_no, format!("invalid token id `{}`", cols[0])))?;
        if position != current.sentence.tokens.len() + 1 {
            return Err(err(line_no, format!("token id {position} out of sequence")));
        }
        let upos = cols[3].parse().unwrap_or_else(|_| {
            warn!("{}:{line_no}: unknown UPOS `{}` mapped to X", origin.display(), cols[3]);
            Upos::X
        });
        let head = if cols[6] == "_" {
            0
        } else {
            cols[6]
                .parse()
                .map_err(|_| err(line_no, format!("invalid head `{}`", cols[6])))?
        };
        let ner = cols[9]
            .split('|')
            .find_map(|kv| kv.strip_prefix("NER="))
            .filter(|v| !v.is_empty() && *v != "O")
            .map(String::from);
        current.sentence.tokens.push(AnnotatedToken {
            form: cols[1].to_string(),
            upos,
            deprel: cols[7].to_string(),
            head,
            ner,
        });
        current.lines.push(line_no);
    }
    finish(&mut current, &mut sentences)?;
    Ok(sentences)
}

/// Serializes sentences back to CoNLL-U (unused columns as `_`).
pub fn write_conllu(sentences: &[AnnotatedSentence]) -> String {
    let mut out = String::new();
    for s in sentences {
        if let Some(id) = &s.sent_id {
            out.push_str(&format!("# sent_id = {id}\n"));
        }
        for (i, t) in s.tokens.iter().enumerate() {
            let misc = t.ner.as_ref().map_or("_".to_string(), |n| format!("NER={n}"));
            out.push_str(&format!(
                "{}\t{}\t_\t{}\t_\t_\t{}\t{}\t_\t{}\n",
                i + 1,
                t.form,
                t.upos,
                t.head,
                t.deprel,
                misc
            ));
        }
        out.push('\n');
    }
    out
}
