//! Keyword-rule baseline. The keyword table is plain TOML so it can be tuned
//! without rebuilding; the shipped default is compiled in.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::Deserialize;

use super::tokenize::is_cjk;
use super::ClassifierError;
use crate::taxonomy::{Category, InspectionComment, LabelAssignment, LabelSet, Labeler};

pub const DEFAULT_RULES: &str = include_str!("rules.toml");

/// Category used when no keyword matches.
pub const FALLBACK: Category = Category::EnhancementRequest;

#[derive(Deserialize)]
struct RulesFile {
    keywords: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeywordRules {
    table: BTreeMap<Category, Vec<String>>,
}

impl Default for KeywordRules {
    fn default() -> Self {
        KeywordRules::from_toml_str(DEFAULT_RULES).expect("shipped rules parse")
    }
}

impl KeywordRules {
    pub fn from_toml_str(s: &str) -> Result<Self, ClassifierError> {
        let file: RulesFile =
            toml::from_str(s).map_err(|e| ClassifierError::Rules(e.to_string()))?;
        let mut table = BTreeMap::new();
        for (slug, words) in file.keywords {
            let cat: Category = slug
                .parse()
                .map_err(|e| ClassifierError::Rules(format!("{e}")))?;
            let words = words
                .into_iter()
                .map(|w| w.trim().to_lowercase())
                .filter(|w| !w.is_empty())
                .collect();
            table.insert(cat, words);
        }
        Ok(KeywordRules { table })
    }

    pub fn load(path: &Path) -> Result<Self, ClassifierError> {
        let s = std::fs::read_to_string(path)
            .map_err(|e| ClassifierError::Rules(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&s)
    }

    pub fn keywords(&self, c: Category) -> &[String] {
        self.table.get(&c).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Union of matched categories, or the fallback when nothing matches.
    pub fn classify_text(&self, text: &str) -> LabelSet {
        let hay = text.to_lowercase();
        let matched: Vec<Category> = self
            .table
            .iter()
            .filter(|(_, words)| words.iter().any(|w| contains_keyword(&hay, w)))
            .map(|(c, _)| *c)
            .collect();
        LabelSet::new(matched).unwrap_or_else(|_| LabelSet::new([FALLBACK]).unwrap())
    }

    pub fn rule_baseline(&self, comment: &InspectionComment, at: DateTime<Utc>) -> LabelAssignment {
        LabelAssignment {
            comment_id: comment.id.clone(),
            labels: self.classify_text(&comment.body),
            labeler: Labeler::RuleBaseline,
            scores: None,
            assigned_at: at,
        }
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() && !is_cjk(c)
}

/// Substring search with word boundaries on the non-CJK ends of `kw`.
fn contains_keyword(hay: &str, kw: &str) -> bool {
    if kw.is_empty() {
        return false;
    }
    let need_left = kw.chars().next().is_some_and(is_word_char);
    let need_right = kw.chars().next_back().is_some_and(is_word_char);
    let mut from = 0;
    while let Some(pos) = hay[from..].find(kw) {
        let start = from + pos;
        let end = start + kw.len();
        let left_ok = !need_left || !hay[..start].chars().next_back().is_some_and(is_word_char);
        let right_ok = !need_right || !hay[end..].chars().next().is_some_and(is_word_char);
        if left_ok && right_ok {
            return true;
        }
        from = start + kw.chars().next().map_or(1, char::len_utf8);
    }
    false
}
