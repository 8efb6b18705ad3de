//! Workloads shared by the benchmarks.

use inspect_core::classifier::training_set;
use inspect_core::{survey, Corpus, LabelSet};

/// The survey corpus and its labeled texts.
pub fn survey_workload() -> (Corpus, Vec<(String, LabelSet)>) {
    let corpus = survey::build_corpus();
    let set = training_set(&corpus);
    (corpus, set)
}
