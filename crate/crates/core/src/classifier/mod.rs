//! Automatic category suggestions: a keyword baseline and a trainable
//! one-vs-rest Bayesian model, plus cross-validation.

mod eval;
mod model;
mod rules;
mod tokenize;

use thiserror::Error;

use crate::corpus::Corpus;
use crate::taxonomy::LabelSet;

pub use eval::{assign_folds, evaluate, CategoryMetrics, Evaluation, DEFAULT_SEED};
pub use model::{
    train, Example, FittedSubModel, MultiLabelModel, Prediction, SubModel, DEFAULT_THRESHOLD,
    MODEL_FORMAT, SMOOTHING,
};
pub use rules::{KeywordRules, DEFAULT_RULES, FALLBACK};
pub use tokenize::{tokenize, tokenize_lossy, TokenVector};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ClassifierError {
    #[error("empty text")]
    EmptyText,
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("corpus too small: {documents} labeled comments for {folds} folds")]
    CorpusTooSmall { documents: usize, folds: usize },
    #[error("invalid rules: {0}")]
    Rules(String),
    #[error("invalid model: {0}")]
    Model(String),
}

/// Owned training data taken from a corpus's effective labels.
pub fn training_set(corpus: &Corpus) -> Vec<(String, LabelSet)> {
    corpus
        .labeled()
        .into_iter()
        .map(|(c, l)| (c.body.clone(), l.clone()))
        .collect()
}

/// Borrowed view over [`training_set`] output.
pub fn examples(set: &[(String, LabelSet)]) -> Vec<Example<'_>> {
    set.iter()
        .map(|(text, labels)| Example { text, labels })
        .collect()
}
