//! k-fold cross-validation for the multi-label model.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::model::{train, Example};
use super::ClassifierError;
use crate::taxonomy::Category;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CategoryMetrics {
    pub support: usize,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl CategoryMetrics {
    fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        CategoryMetrics {
            support: tp + fn_,
            true_positives: tp,
            false_positives: fp,
            false_negatives: fn_,
            precision,
            recall,
            f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub folds: usize,
    pub documents: usize,
    /// `None` for categories with no positives in any test fold.
    pub per_category: BTreeMap<Category, Option<CategoryMetrics>>,
    /// Mean F1 over defined categories; `None` when none is defined.
    pub macro_f1: Option<f64>,
}

/// Fold index per example: shuffle with a fixed seed, then deal examples
/// round-robin after grouping them by their first label so each fold sees a
/// similar label mix.
pub fn assign_folds(examples: &[Example<'_>], k: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order.sort_by_key(|&i| examples[i].labels.iter().next());
    let mut folds = vec![0; examples.len()];
    for (pos, &i) in order.iter().enumerate() {
        folds[i] = pos % k;
    }
    folds
}

pub fn evaluate(examples: &[Example<'_>], k: usize, seed: u64) -> Result<Evaluation, ClassifierError> {
    if k < 2 || examples.len() < k {
        return Err(ClassifierError::CorpusTooSmall {
            documents: examples.len(),
            folds: k,
        });
    }
    let folds = assign_folds(examples, k, seed);
    let mut counts: BTreeMap<Category, (usize, usize, usize)> =
        Category::ALL.iter().map(|c| (*c, (0, 0, 0))).collect();

    for fold in 0..k {
        let training: Vec<Example<'_>> = examples
            .iter()
            .zip(&folds)
            .filter(|(_, f)| **f != fold)
            .map(|(e, _)| e.clone())
            .collect();
        let model = train(&training, "cv")?;
        for (ex, _) in examples.iter().zip(&folds).filter(|(_, f)| **f == fold) {
            let predicted = match model.predict(ex.text) {
                Ok(p) => p.labels,
                // an empty text cannot be scored; count it as predicting nothing
                Err(ClassifierError::EmptyText) => {
                    for c in ex.labels.iter() {
                        counts.get_mut(&c).unwrap().2 += 1;
                    }
                    continue;
                }
                Err(e) => return Err(e),
            };
            for c in Category::ALL {
                let slot = counts.get_mut(&c).unwrap();
                match (predicted.contains(c), ex.labels.contains(c)) {
                    (true, true) => slot.0 += 1,
                    (true, false) => slot.1 += 1,
                    (false, true) => slot.2 += 1,
                    (false, false) => {}
                }
            }
        }
    }

    let per_category: BTreeMap<Category, Option<CategoryMetrics>> = counts
        .into_iter()
        .map(|(c, (tp, fp, fn_))| {
            let m = (tp + fn_ > 0).then(|| CategoryMetrics::from_counts(tp, fp, fn_));
            (c, m)
        })
        .collect();
    let defined: Vec<f64> = per_category.values().flatten().map(|m| m.f1).collect();
    let macro_f1 = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    Ok(Evaluation {
        folds: k,
        documents: examples.len(),
        per_category,
        macro_f1,
    })
}
