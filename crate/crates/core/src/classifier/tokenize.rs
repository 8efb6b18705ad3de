use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ClassifierError;

/// Bag of tokens with their occurrence counts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenVector {
    pub counts: BTreeMap<String, u32>,
}

impl TokenVector {
    pub fn get(&self, token: &str) -> u32 {
        self.counts.get(token).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u32)> {
        self.counts.iter().map(|(t, n)| (t.as_str(), *n))
    }

    fn push(&mut self, token: String) {
        *self.counts.entry(token).or_default() += 1;
    }
}

/// Han, kana, and Hangul; these scripts are written without spaces.
pub(crate) fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x3040..=0x30FF
        | 0x31F0..=0x31FF
        | 0x3400..=0x4DBF
        | 0x4E00..=0x9FFF
        | 0xAC00..=0xD7AF
        | 0xF900..=0xFAFF
        | 0xFF66..=0xFF9F
        | 0x20000..=0x2FFFF)
}

fn flush_word(word: &mut String, out: &mut TokenVector) {
    if !word.is_empty() {
        out.push(std::mem::take(word));
    }
}

fn flush_cjk(run: &mut Vec<char>, out: &mut TokenVector) {
    match run.len() {
        0 => {}
        1 => out.push(run[0].to_string()),
        _ => {
            for pair in run.windows(2) {
                out.push(pair.iter().collect());
            }
        }
    }
    run.clear();
}

/// Lowercased alphanumeric words, plus character bigrams over CJK runs
/// (a lone CJK character becomes a unigram).
pub fn tokenize(text: &str) -> Result<TokenVector, ClassifierError> {
    if text.trim().is_empty() {
        return Err(ClassifierError::EmptyText);
    }
    Ok(tokenize_lossy(text))
}

/// Like [`tokenize`] but maps empty input to an empty vector.
pub fn tokenize_lossy(text: &str) -> TokenVector {
    let mut out = TokenVector::default();
    let mut word = String::new();
    let mut run: Vec<char> = Vec::new();
    for c in text.chars() {
        if is_cjk(c) {
            flush_word(&mut word, &mut out);
            run.push(c);
        } else if c.is_alphanumeric() {
            flush_cjk(&mut run, &mut out);
            word.extend(c.to_lowercase());
        } else {
            flush_word(&mut word, &mut out);
            flush_cjk(&mut run, &mut out);
        }
    }
    flush_word(&mut word, &mut out);
    flush_cjk(&mut run, &mut out);
    out
}
