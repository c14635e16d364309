use std::ops::Range;

/// Abbreviations whose trailing period never ends a sentence.
const ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "vs", "etc", "inc", "ltd", "co", "corp",
    "dept", "approx", "no", "ca", "bzw", "usw", "nr", "str", "evtl", "ggf", "inkl", "vgl", "bspw",
    "hr", "fr", "dipl",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub is_word: bool,
    /// Byte offsets into the source text.
    pub span: Range<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenizedText {
    pub tokens: Vec<Token>,
    /// Token-index ranges, one per sentence, partitioning `0..tokens.len()`.
    pub sentences: Vec<Range<usize>>,
    /// Non-whitespace characters in the source text.
    pub chars: usize,
}

impl TokenizedText {
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().filter(|t| t.is_word).map(|t| t.text.as_str())
    }

    pub fn word_count(&self) -> usize {
        self.tokens.iter().filter(|t| t.is_word).count()
    }

    pub fn punctuation_count(&self) -> usize {
        self.tokens.len() - self.word_count()
    }

    pub fn sentence_count(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Characters kept inside a word when both neighbours qualify.
fn joins(prev: char, c: char, next: char) -> bool {
    match c {
        '\'' | '\u{2019}' | '-' => is_word_char(prev) && is_word_char(next),
        '.' | ',' => prev.is_ascii_digit() && next.is_ascii_digit(),
        _ => false,
    }
}

/// Splits text into word and punctuation tokens and groups them into
/// sentences.
///
/// A word is a run of alphanumeric characters; apostrophes and hyphens stay
/// inside a word when flanked by word characters, as do decimal separators
/// between digits. Every other non-whitespace
/// character is a punctuation token of its own. A `.`, `!` or `?` followed by
/// whitespace or the end of the text closes a sentence, unless the period
/// follows a known abbreviation or an initialism such as `e.g.`. Sentences
/// without any word are merged into their neighbour.
pub fn tokenize(text: &str) -> TokenizedText {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (start, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if is_word_char(c) {
            let mut j = i + 1;
            while j < chars.len() {
                let cj = chars[j].1;
                if is_word_char(cj) {
                    j += 1;
                } else if j + 1 < chars.len() && joins(chars[j - 1].1, cj, chars[j + 1].1) {
                    j += 2;
                } else {
                    break;
                }
            }
            let end = chars.get(j).map_or(text.len(), |(b, _)| *b);
            tokens.push(Token {
                text: text[start..end].to_string(),
                is_word: true,
                span: start..end,
            });
            i = j;
        } else {
            let end = start + c.len_utf8();
            tokens.push(Token {
                text: c.to_string(),
                is_word: false,
                span: start..end,
            });
            i += 1;
        }
    }

    let sentences = split_sentences(text, &tokens);
    let chars = text.chars().filter(|c| !c.is_whitespace()).count();
    TokenizedText {
        tokens,
        sentences,
        chars,
    }
}

fn ends_sentence(text: &str, tokens: &[Token], idx: usize) -> bool {
    let tok = &tokens[idx];
    if !matches!(tok.text.as_str(), "." | "!" | "?") {
        return false;
    }
    let followed_by_break = text[tok.span.end..]
        .chars()
        .next()
        .map_or(true, char::is_whitespace);
    if !followed_by_break {
        return false;
    }
    if tok.text == "." && idx > 0 {
        let prev = &tokens[idx - 1];
        if prev.is_word && prev.span.end == tok.span.start {
            let lower = prev.text.to_lowercase();
            if ABBREVIATIONS.contains(&lower.as_str()) {
                return false;
            }
            // initialisms: "e.g.", "U.S."
            if prev.text.chars().count() == 1
                && idx >= 2
                && tokens[idx - 2].text == "."
                && tokens[idx - 2].span.end == prev.span.start
            {
                return false;
            }
        }
    }
    true
}

fn split_sentences(text: &str, tokens: &[Token]) -> Vec<Range<usize>> {
    let mut sentences: Vec<Range<usize>> = Vec::new();
    let mut start = 0;
    let mut has_word = false;
    for idx in 0..tokens.len() {
        has_word |= tokens[idx].is_word;
        if ends_sentence(text, tokens, idx) {
            if has_word {
                sentences.push(start..idx + 1);
                start = idx + 1;
                has_word = false;
            } else if let Some(last) = sentences.last_mut() {
                last.end = idx + 1;
                start = idx + 1;
            }
        }
    }
    if start < tokens.len() {
        match sentences.last_mut() {
            Some(last) if !has_word => last.end = tokens.len(),
            _ => sentences.push(start..tokens.len()),
        }
    }
    sentences
}
