use super::tokenize::TokenizedText;

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y' | 'ä' | 'ö' | 'ü')
}

/// Heuristic syllable count: vowel groups, minus a silent final `e` unless
/// the word ends in consonant + `le`. Never less than 1.
pub fn count_syllables(word: &str) -> usize {
    let letters: Vec<char> = word
        .chars()
        .filter(|c| c.is_alphabetic())
        .flat_map(char::to_lowercase)
        .collect();
    let mut groups = 0;
    let mut in_group = false;
    for &c in &letters {
        let v = is_vowel(c);
        if v && !in_group {
            groups += 1;
        }
        in_group = v;
    }
    let n = letters.len();
    if groups > 1 && letters.last() == Some(&'e') {
        let consonant_le = n >= 3 && letters[n - 2] == 'l' && !is_vowel(letters[n - 3]);
        if !consonant_le {
            groups -= 1;
        }
    }
    groups.max(1)
}

/// Flesch-Kincaid grade level from raw counts.
pub fn flesch_kincaid_grade(words: usize, sentences: usize, syllables: usize) -> f64 {
    let w = words as f64;
    0.39 * (w / sentences as f64) + 11.8 * (syllables as f64 / w) - 15.59
}

/// Gunning fog index from raw counts; complex words have three or more
/// syllables.
pub fn gunning_fog_index(words: usize, sentences: usize, complex_words: usize) -> f64 {
    let w = words as f64;
    0.4 * (w / sentences as f64 + 100.0 * complex_words as f64 / w)
}

/// `None` when the text has no words or no sentences.
pub fn flesch_kincaid(t: &TokenizedText) -> Option<f64> {
    let (words, sentences) = (t.word_count(), t.sentence_count());
    if words == 0 || sentences == 0 {
        return None;
    }
    let syllables: usize = t.words().map(count_syllables).sum();
    Some(flesch_kincaid_grade(words, sentences, syllables))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FogScore {
    pub grade: f64,
    pub complex_word_ratio: f64,
}

pub fn gunning_fog(t: &TokenizedText) -> Option<FogScore> {
    let (words, sentences) = (t.word_count(), t.sentence_count());
    if words == 0 || sentences == 0 {
        return None;
    }
    let complex = t.words().filter(|w| count_syllables(w) >= 3).count();
    Some(FogScore {
        grade: gunning_fog_index(words, sentences, complex),
        complex_word_ratio: complex as f64 / words as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::super::tokenize::tokenize;
    use super::*;

    #[test]
    fn syllables() {
        assert_eq!(count_syllables("cat"), 1);
        assert_eq!(count_syllables("make"), 1);
        assert_eq!(count_syllables("table"), 2);
        assert_eq!(count_syllables("the"), 1);
        assert_eq!(count_syllables("people"), 2);
        assert_eq!(count_syllables("University"), 5);
        assert_eq!(count_syllables("rhythm"), 1);
        assert_eq!(count_syllables("2023"), 1);
        assert_eq!(count_syllables("Mädchen"), 2);
    }

    #[test]
    fn flesch_kincaid_cases() {
        let fk = flesch_kincaid(&tokenize("The cat sat on the mat.")).unwrap();
        assert!((fk - (-1.45)).abs() < 1e-9);
        assert!((flesch_kincaid_grade(1, 1, 1) - (-3.40)).abs() < 1e-12);
        assert!(flesch_kincaid_grade(12, 2, 15) < flesch_kincaid_grade(12, 1, 15));
        assert_eq!(flesch_kincaid(&tokenize("")), None);
        assert_eq!(flesch_kincaid(&tokenize("?!")), None);
    }

    #[test]
    fn fog_cases() {
        let f = gunning_fog(&tokenize("The cat sat on the mat.")).unwrap();
        assert!((f.grade - 2.4).abs() < 1e-12);
        assert_eq!(f.complex_word_ratio, 0.0);
        let f = gunning_fog(&tokenize("The university celebrated immediately.")).unwrap();
        assert!((f.grade - 31.6).abs() < 1e-9);
        assert!((f.complex_word_ratio - 0.75).abs() < 1e-12);
        let f = gunning_fog(&tokenize("I go. We run. It is.")).unwrap();
        assert!((f.grade - 0.4 * 2.0).abs() < 1e-12);
    }
}
