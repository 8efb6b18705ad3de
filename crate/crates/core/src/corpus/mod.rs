//! The unified comment corpus: comments keyed by id plus an append-only log
//! of label assignments.
//!
//! Effective labels resolve as: the latest human assignment if any exists,
//! otherwise the latest machine assignment (rule baseline or model),
//! otherwise none. "Latest" means latest in log order.

mod csv_io;
mod store;

use std::collections::{BTreeMap, HashMap};

use chrono::{DateTime, Utc};
use thiserror::Error;

use crate::taxonomy::{
    validate_comment_in, Category, CommentId, InspectionComment, LabelAssignment, LabelSet,
    Labeler, Source, SourceLocation, TaxonomyError, Violation,
};

pub use csv_io::{export_csv, export_csv_string, import_csv, CsvError, CSV_HEADER};
pub use store::{CorpusDir, CorpusLock, StoreError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CorpusError {
    #[error("unknown comment id `{0}`")]
    UnknownComment(CommentId),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
}

/// Outcome of an [`Corpus::ingest`] call.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IngestReport {
    pub added: usize,
    pub updated: usize,
    pub unchanged: usize,
    pub rejected: Vec<(CommentId, Vec<Violation>)>,
}

/// Where a comment came from, in source terms.
#[derive(Debug, Clone, PartialEq)]
pub enum Provenance<'a> {
    DesignTool { project_id: &'a str, frame_id: &'a str },
    CodeHost { repo: &'a str, pr_number: u64 },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    comments: BTreeMap<CommentId, InspectionComment>,
    assignments: Vec<LabelAssignment>,
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.comments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.comments.is_empty()
    }

    pub fn get(&self, id: &CommentId) -> Option<&InspectionComment> {
        self.comments.get(id)
    }

    /// Comments in id order.
    pub fn comments(&self) -> impl Iterator<Item = &InspectionComment> {
        self.comments.values()
    }

    pub fn assignments(&self) -> &[LabelAssignment] {
        &self.assignments
    }

    pub fn provenance(&self, id: &CommentId) -> Option<Provenance<'_>> {
        self.comments.get(id).map(|c| match &c.location {
            SourceLocation::DesignTool {
                project_id,
                frame_id,
                ..
            } => Provenance::DesignTool {
                project_id,
                frame_id,
            },
            SourceLocation::CodeHost {
                repo, pr_number, ..
            } => Provenance::CodeHost {
                repo,
                pr_number: *pr_number,
            },
        })
    }

    /// Upserts comments by id. Invalid comments are rejected individually;
    /// parents may be resolved from the corpus or from the same batch.
    pub fn ingest(&mut self, comments: impl IntoIterator<Item = InspectionComment>) -> IngestReport {
        let batch: Vec<InspectionComment> = comments.into_iter().collect();
        let batch_sources: HashMap<CommentId, Source> =
            batch.iter().map(|c| (c.id.clone(), c.source)).collect();
        let mut report = IngestReport::default();
        for c in batch {
            let lookup = |id: &CommentId| {
                self.comments
                    .get(id)
                    .map(|p| p.source)
                    .or_else(|| batch_sources.get(id).copied())
            };
            if let Err(v) = validate_comment_in(&c, lookup) {
                report.rejected.push((c.id.clone(), v));
                continue;
            }
            match self.comments.get(&c.id) {
                Some(existing) if existing == &c => report.unchanged += 1,
                Some(_) => {
                    report.updated += 1;
                    self.comments.insert(c.id.clone(), c);
                }
                None => {
                    report.added += 1;
                    self.comments.insert(c.id.clone(), c);
                }
            }
        }
        report
    }

    /// Records a new assignment for an existing comment.
    pub fn assign_labels(
        &mut self,
        comment_id: &CommentId,
        labels: impl IntoIterator<Item = Category>,
        labeler: Labeler,
        assigned_at: DateTime<Utc>,
    ) -> Result<LabelAssignment, CorpusError> {
        let labels = LabelSet::new(labels)?;
        let assignment = LabelAssignment {
            comment_id: comment_id.clone(),
            labels,
            labeler,
            scores: None,
            assigned_at,
        };
        self.record(assignment.clone())?;
        Ok(assignment)
    }

    /// Like [`Corpus::assign_labels`] but takes slugs, as typed by a user.
    pub fn assign_label_slugs<S: AsRef<str>>(
        &mut self,
        comment_id: &CommentId,
        slugs: &[S],
        labeler: Labeler,
        assigned_at: DateTime<Utc>,
    ) -> Result<LabelAssignment, CorpusError> {
        if !self.comments.contains_key(comment_id) {
            return Err(CorpusError::UnknownComment(comment_id.clone()));
        }
        let labels = slugs
            .iter()
            .map(|s| s.as_ref().trim().parse::<Category>())
            .collect::<Result<Vec<_>, _>>()?;
        self.assign_labels(comment_id, labels, labeler, assigned_at)
    }

    /// Appends a prebuilt assignment (e.g. from a classifier).
    pub fn record(&mut self, assignment: LabelAssignment) -> Result<(), CorpusError> {
        if !self.comments.contains_key(&assignment.comment_id) {
            return Err(CorpusError::UnknownComment(assignment.comment_id));
        }
        self.assignments.push(assignment);
        Ok(())
    }

    /// The assignment currently in effect for a comment.
    pub fn effective_assignment(&self, id: &CommentId) -> Option<&LabelAssignment> {
        let mut human = None;
        let mut machine = None;
        for a in self.assignments.iter().filter(|a| &a.comment_id == id) {
            if a.labeler.is_human() {
                human = Some(a);
            } else {
                machine = Some(a);
            }
        }
        human.or(machine)
    }

    pub fn effective_labels(&self, id: &CommentId) -> Option<&LabelSet> {
        self.effective_assignment(id).map(|a| &a.labels)
    }

    /// Effective assignment for every comment, computed in one pass.
    pub fn effective_map(&self) -> HashMap<&CommentId, &LabelAssignment> {
        let mut human: HashMap<&CommentId, &LabelAssignment> = HashMap::new();
        let mut machine: HashMap<&CommentId, &LabelAssignment> = HashMap::new();
        for a in &self.assignments {
            let slot = if a.labeler.is_human() {
                &mut human
            } else {
                &mut machine
            };
            slot.insert(&a.comment_id, a);
        }
        for (id, a) in human {
            machine.insert(id, a);
        }
        machine
    }

    /// Comments with no assignment at all.
    pub fn unlabeled(&self) -> impl Iterator<Item = &InspectionComment> {
        let labeled = self.effective_map();
        let ids: std::collections::HashSet<&CommentId> = labeled.keys().copied().collect();
        self.comments
            .values()
            .filter(move |c| !ids.contains(&c.id))
    }

    /// Comments paired with their effective labels, skipping unlabeled ones.
    pub fn labeled(&self) -> Vec<(&InspectionComment, &LabelSet)> {
        let eff = self.effective_map();
        self.comments
            .values()
            .filter_map(|c| eff.get(&c.id).map(|a| (c, &a.labels)))
            .collect()
    }

    pub(crate) fn replace_assignments(&mut self, assignments: Vec<LabelAssignment>) {
        self.assignments = assignments;
    }

    pub(crate) fn insert_unchecked(&mut self, c: InspectionComment) {
        self.comments.insert(c.id.clone(), c);
    }
}


#[cfg(test)]
mod props {
    use super::*;
    use crate::taxonomy::{ArtifactKind, AuthorRole};
    use chrono::TimeZone;
    use proptest::prelude::*;

    fn labeler_strategy() -> impl Strategy<Value = Labeler> {
        prop_oneof![
            "[a-c]".prop_map(Labeler::Human),
            Just(Labeler::RuleBaseline),
            "v[1-2]".prop_map(Labeler::MlModel),
        ]
    }

    proptest! {
        // Effective labels depend only on the relative order within the human
        // and machine streams, so any interleaving of the two gives the same answer.
        #[test]
        fn effective_labels_ignore_interleaving(
            events in prop::collection::vec((labeler_strategy(), 0usize..13), 1..20),
            seed in any::<u64>(),
        ) {
            let base = InspectionComment {
                id: "c".into(),
                source: Source::CodeHost,
                year: 2021,
                group: "G1".into(),
                author_role: AuthorRole::Teacher,
                artifact: ArtifactKind::Other,
                body: "x".into(),
                created_at: Utc.with_ymd_and_hms(2021, 1, 1, 0, 0, 0).unwrap(),
                location: SourceLocation::CodeHost { repo: "r".into(), pr_number: 1, file_path: None },
                parent_id: None,
                posted_in: None,
                image_path: None,
            };
            let humans: Vec<_> = events.iter().filter(|e| e.0.is_human()).cloned().collect();
            let machines: Vec<_> = events.iter().filter(|e| !e.0.is_human()).cloned().collect();

            // merge the two streams with a seed-driven interleaving
            let mut merged = Vec::new();
            let (mut i, mut j, mut s) = (0, 0, seed);
            while i < humans.len() || j < machines.len() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let take_h = j >= machines.len() || (i < humans.len() && (s >> 33) & 1 == 1);
                if take_h { merged.push(humans[i].clone()); i += 1; } else { merged.push(machines[j].clone()); j += 1; }
            }

            let mut corpus = Corpus::new();
            corpus.ingest([base]);
            let id = CommentId::from("c");
            let ts = Utc.with_ymd_and_hms(2021, 2, 1, 0, 0, 0).unwrap();
            for (lab, k) in &merged {
                corpus.assign_labels(&id, [Category::ALL[*k]], lab.clone(), ts).unwrap();
            }
            let expected = humans.last().or(machines.last()).map(|e| Category::ALL[e.1]);
            let got = corpus.effective_labels(&id).map(|l| l.iter().next().unwrap());
            prop_assert_eq!(got, expected);
        }
    }
}
