//! One-vs-rest multinomial Bayes over token counts.
//!
//! Each category gets an independent binary sub-model trained on "has the
//! label" vs "does not". Token likelihoods use Laplace smoothing over the
//! shared vocabulary; tokens outside the vocabulary are ignored at
//! prediction time.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha1::{Digest, Sha1};

use super::tokenize::{tokenize, tokenize_lossy, TokenVector};
use super::ClassifierError;
use crate::taxonomy::{Category, InspectionComment, LabelAssignment, LabelSet, Labeler};

pub const MODEL_FORMAT: &str = "inspect-nb/1";
pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const SMOOTHING: f64 = 1.0;

/// A training document: raw text plus its label set.
#[derive(Debug, Clone)]
pub struct Example<'a> {
    pub text: &'a str,
    pub labels: &'a LabelSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedSubModel {
    pub positives: usize,
    pub negatives: usize,
    pub log_prior_pos: f64,
    pub log_prior_neg: f64,
    /// Aligned with [`MultiLabelModel::vocabulary`].
    pub token_log_likelihoods_pos: Vec<f64>,
    pub token_log_likelihoods_neg: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SubModel {
    Fitted(FittedSubModel),
    /// No positive training examples.
    AlwaysNegative { negatives: usize },
    /// Every training example was positive.
    AlwaysPositive { positives: usize },
}

impl SubModel {
    fn log_odds(&self, tokens: &[(usize, u32)]) -> f64 {
        match self {
            SubModel::AlwaysNegative { .. } => f64::NEG_INFINITY,
            SubModel::AlwaysPositive { .. } => f64::INFINITY,
            SubModel::Fitted(m) => {
                let mut pos = m.log_prior_pos;
                let mut neg = m.log_prior_neg;
                for &(i, n) in tokens {
                    pos += n as f64 * m.token_log_likelihoods_pos[i];
                    neg += n as f64 * m.token_log_likelihoods_neg[i];
                }
                pos - neg
            }
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiLabelModel {
    pub format: String,
    pub version: String,
    pub threshold: f64,
    pub smoothing: f64,
    pub vocabulary: Vec<String>,
    pub per_category: BTreeMap<Category, SubModel>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

/// Scores and the resulting label set for one text.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub labels: LabelSet,
    pub scores: BTreeMap<Category, f64>,
}

impl Prediction {
    /// Scores in table order.
    pub fn ranked_by_taxonomy(&self) -> impl Iterator<Item = (Category, f64)> + '_ {
        self.scores.iter().map(|(c, s)| (*c, *s))
    }
}

/// Fits one sub-model per category. Fails only on an empty training set.
pub fn train(examples: &[Example<'_>], version: &str) -> Result<MultiLabelModel, ClassifierError> {
    if examples.is_empty() {
        return Err(ClassifierError::EmptyCorpus);
    }
    let docs: Vec<TokenVector> = examples.iter().map(|e| tokenize_lossy(e.text)).collect();

    let mut vocab: Vec<String> = docs
        .iter()
        .flat_map(|d| d.counts.keys().cloned())
        .collect();
    vocab.sort();
    vocab.dedup();
    let index: HashMap<String, usize> = vocab
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i))
        .collect();
    let v = vocab.len() as f64;
    let n = examples.len();

    let mut per_category = BTreeMap::new();
    for cat in Category::ALL {
        let mut pos_counts = vec![0u64; vocab.len()];
        let mut neg_counts = vec![0u64; vocab.len()];
        let (mut pos_docs, mut neg_docs) = (0usize, 0usize);
        for (doc, ex) in docs.iter().zip(examples) {
            let (bucket, ndocs) = if ex.labels.contains(cat) {
                (&mut pos_counts, &mut pos_docs)
            } else {
                (&mut neg_counts, &mut neg_docs)
            };
            *ndocs += 1;
            for (t, c) in doc.iter() {
                bucket[index[t]] += c as u64;
            }
        }
        let sub = if pos_docs == 0 {
            SubModel::AlwaysNegative {
                negatives: neg_docs,
            }
        } else if neg_docs == 0 {
            SubModel::AlwaysPositive {
                positives: pos_docs,
            }
        } else {
            let likelihoods = |counts: &[u64]| {
                let total: u64 = counts.iter().sum();
                let denom = total as f64 + SMOOTHING * v;
                counts
                    .iter()
                    .map(|c| ((*c as f64 + SMOOTHING) / denom).ln())
                    .collect::<Vec<f64>>()
            };
            SubModel::Fitted(FittedSubModel {
                positives: pos_docs,
                negatives: neg_docs,
                log_prior_pos: (pos_docs as f64 / n as f64).ln(),
                log_prior_neg: (neg_docs as f64 / n as f64).ln(),
                token_log_likelihoods_pos: likelihoods(&pos_counts),
                token_log_likelihoods_neg: likelihoods(&neg_counts),
            })
        };
        per_category.insert(cat, sub);
    }

    Ok(MultiLabelModel {
        format: MODEL_FORMAT.to_string(),
        version: version.to_string(),
        threshold: DEFAULT_THRESHOLD,
        smoothing: SMOOTHING,
        vocabulary: vocab,
        per_category,
        index,
    })
}

impl MultiLabelModel {
    fn indexed(&self, tokens: &TokenVector) -> Vec<(usize, u32)> {
        tokens
            .iter()
            .filter_map(|(t, n)| self.index.get(t).map(|i| (*i, n)))
            .collect()
    }

    pub fn sub_model(&self, c: Category) -> &SubModel {
        &self.per_category[&c]
    }

    /// Log-odds per category, in table order.
    pub fn log_odds(&self, text: &str) -> Result<Vec<(Category, f64)>, ClassifierError> {
        let tokens = self.indexed(&tokenize(text)?);
        Ok(Category::ALL
            .iter()
            .map(|c| (*c, self.per_category[c].log_odds(&tokens)))
            .collect())
    }

    /// Labels are every category whose posterior reaches the threshold; when
    /// none does, the single most probable category (first in table order on
    /// ties).
    pub fn predict(&self, text: &str) -> Result<Prediction, ClassifierError> {
        let odds = self.log_odds(text)?;
        let scores: BTreeMap<Category, f64> =
            odds.iter().map(|(c, z)| (*c, sigmoid(*z))).collect();
        let above: Vec<Category> = scores
            .iter()
            .filter(|(_, p)| **p >= self.threshold)
            .map(|(c, _)| *c)
            .collect();
        let labels = match LabelSet::new(above) {
            Ok(l) => l,
            Err(_) => {
                let mut best = odds[0];
                for &(c, z) in &odds[1..] {
                    if z > best.1 {
                        best = (c, z);
                    }
                }
                LabelSet::new([best.0]).expect("one label")
            }
        };
        Ok(Prediction { labels, scores })
    }

    pub fn predict_assignment(
        &self,
        comment: &InspectionComment,
        at: DateTime<Utc>,
    ) -> Result<LabelAssignment, ClassifierError> {
        let p = self.predict(&comment.body)?;
        Ok(LabelAssignment {
            comment_id: comment.id.clone(),
            labels: p.labels,
            labeler: Labeler::MlModel(self.version.clone()),
            scores: Some(p.scores),
            assigned_at: at,
        })
    }

    /// Hex SHA-1 over the parameters, ignoring `version`.
    pub fn fingerprint(&self) -> String {
        let mut copy = self.clone();
        copy.version.clear();
        let bytes = serde_json::to_vec(&copy).expect("model serializes");
        Sha1::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, ClassifierError> {
        let mut m: MultiLabelModel =
            serde_json::from_str(s).map_err(|e| ClassifierError::Model(e.to_string()))?;
        m.validate()?;
        m.index = m
            .vocabulary
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<(), ClassifierError> {
        std::fs::write(path, self.to_json())
            .map_err(|e| ClassifierError::Model(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, ClassifierError> {
        let s = std::fs::read_to_string(path)
            .map_err(|e| ClassifierError::Model(format!("{}: {e}", path.display())))?;
        Self::from_json(&s)
    }

    fn validate(&self) -> Result<(), ClassifierError> {
        let bad = |m: String| Err(ClassifierError::Model(m));
        if self.format != MODEL_FORMAT {
            return bad(format!("unsupported model format `{}`", self.format));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad(format!("threshold {} outside [0, 1]", self.threshold));
        }
        if self.per_category.len() != Category::ALL.len() {
            return bad(format!(
                "expected {} sub-models, found {}",
                Category::ALL.len(),
                self.per_category.len()
            ));
        }
        for (c, sub) in &self.per_category {
            if let SubModel::Fitted(m) = sub {
                if m.token_log_likelihoods_pos.len() != self.vocabulary.len()
                    || m.token_log_likelihoods_neg.len() != self.vocabulary.len()
                {
                    return bad(format!("`{c}`: likelihood vector length mismatch"));
                }
                let finite = [m.log_prior_pos, m.log_prior_neg]
                    .iter()
                    .chain(&m.token_log_likelihoods_pos)
                    .chain(&m.token_log_likelihoods_neg)
                    .all(|x| x.is_finite());
                if !finite {
                    return bad(format!("`{c}`: non-finite parameter"));
                }
            }
        }
        Ok(())
    }
}
