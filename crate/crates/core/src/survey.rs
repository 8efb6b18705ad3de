//! The three-year survey counts and a corpus that reproduces them.
//!
//! The builder deals each group's labels round-robin over its comments, so
//! every comment gets at least one label, no comment repeats a category, and
//! per-category counts match the survey exactly.

use chrono::{Duration, TimeZone, Utc};

use crate::corpus::Corpus;
use crate::taxonomy::{
    ArtifactKind, AuthorRole, Category, CommentId, InspectionComment, Labeler, LabelSet,
    PullRequestRef, Source, SourceLocation,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SurveyRow {
    pub year: i32,
    pub group: &'static str,
    pub comments: usize,
    /// Label counts in taxonomy order.
    pub counts: [usize; 13],
}

impl SurveyRow {
    pub fn count(&self, c: Category) -> usize {
        self.counts[c.index()]
    }

    pub fn label_total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// 2020 only reports a yearly total of 171; the 96/75 split between its two
/// groups is ours.
pub const SURVEY: [SurveyRow; 4] = [
    SurveyRow {
        year: 2022,
        group: "G1",
        comments: 264,
        counts: [50, 13, 22, 6, 3, 10, 24, 22, 1, 2, 57, 53, 6],
    },
    SurveyRow {
        year: 2021,
        group: "G1",
        comments: 117,
        counts: [3, 2, 8, 6, 0, 8, 22, 18, 2, 0, 21, 33, 0],
    },
    SurveyRow {
        year: 2020,
        group: "G1",
        comments: 96,
        counts: [14, 0, 8, 8, 0, 11, 21, 13, 2, 1, 11, 19, 2],
    },
    SurveyRow {
        year: 2020,
        group: "G2",
        comments: 75,
        counts: [14, 1, 2, 3, 2, 6, 12, 6, 0, 0, 12, 27, 0],
    },
];

pub const YEARLY_TOTALS: [(i32, usize); 3] = [(2022, 264), (2021, 117), (2020, 171)];

pub const SURVEY_LABELER: &str = "survey";

fn phrase(c: Category) -> &'static str {
    match c {
        Category::ShortDescription => "The description of this step is too brief to follow.",
        Category::Excess => "This paragraph repeats content already covered elsewhere.",
        Category::Abstract => "The wording here is vague; state the concrete behaviour.",
        Category::Understandability => "It is hard to understand what this diagram is trying to say.",
        Category::Undefined => "The term used here is never defined in the document.",
        Category::Inconsistent => "This contradicts the screen transition described earlier.",
        Category::Mistake => "There is an error in this value; please correct it.",
        Category::Rationale => "Explain the reason why this design was chosen.",
        Category::ShortItems => "Some required items are missing from this list.",
        Category::MissedInspection => "This was pointed out last time and is still not fixed.",
        Category::Presentation => "Typo in the heading and the notation is not unified.",
        Category::EnhancementRequest => "It would be better to add a search function here.",
        Category::Format => "The layout does not follow the document template.",
    }
}

/// Per-comment label sets for one row, by round-robin dealing.
pub fn deal(row: &SurveyRow) -> Vec<LabelSet> {
    let mut slots: Vec<Vec<Category>> = vec![Vec::new(); row.comments];
    let mut i = 0;
    for c in Category::ALL {
        for _ in 0..row.count(c) {
            slots[i % row.comments].push(c);
            i += 1;
        }
    }
    slots
        .into_iter()
        .map(|s| LabelSet::new(s).expect("label total covers every comment"))
        .collect()
}

const ARTIFACTS: [ArtifactKind; 6] = [
    ArtifactKind::FunctionalSpec,
    ArtifactKind::ScreenTransition,
    ArtifactKind::ClassDiagram,
    ArtifactKind::DatabaseSpec,
    ArtifactKind::SequenceDiagram,
    ArtifactKind::Statechart,
];

/// Deterministic corpus whose effective labels reproduce [`SURVEY`].
pub fn build_corpus() -> Corpus {
    let mut corpus = Corpus::new();
    for row in &SURVEY {
        let repo = format!("pbl-{}/{}", row.year, row.group.to_lowercase());
        let start = Utc.with_ymd_and_hms(row.year, 6, 1, 9, 0, 0).unwrap();
        let labels = deal(row);
        let mut batch = Vec::with_capacity(row.comments);
        for (i, set) in labels.iter().enumerate() {
            let artifact = ARTIFACTS[i % ARTIFACTS.len()];
            let created_at = start + Duration::minutes(37 * i as i64);
            let body = set.iter().map(phrase).collect::<Vec<_>>().join(" ");
            let id = CommentId(format!("s{}{}-{:03}", row.year, row.group.to_lowercase(), i + 1));
            let (source, location, posted_in) = if artifact == ArtifactKind::ScreenTransition {
                (
                    Source::DesignTool,
                    SourceLocation::DesignTool {
                        project_id: format!("design-{}-{}", row.year, row.group.to_lowercase()),
                        frame_id: format!("{}:{}", 1 + i % 7, 10 + i % 5),
                        x: (40 + (i * 13) % 300) as f64,
                        y: (25 + (i * 29) % 500) as f64,
                    },
                    Some(PullRequestRef {
                        repo: repo.clone(),
                        pr_number: 1,
                    }),
                )
            } else {
                (
                    Source::CodeHost,
                    SourceLocation::CodeHost {
                        repo: repo.clone(),
                        pr_number: 1 + (i % 4) as u64,
                        file_path: Some(format!("docs/{}.md", artifact.slug())),
                    },
                    None,
                )
            };
            batch.push(InspectionComment {
                id,
                source,
                year: row.year,
                group: row.group.to_string(),
                author_role: if i % 3 == 2 {
                    AuthorRole::TeachingAssistant
                } else {
                    AuthorRole::Teacher
                },
                artifact,
                body,
                created_at,
                location,
                parent_id: None,
                posted_in,
                image_path: None,
            });
        }
        let report = corpus.ingest(batch.iter().cloned());
        assert!(report.rejected.is_empty(), "survey comments are valid");
        for (c, set) in batch.iter().zip(labels) {
            corpus
                .assign_labels(&c.id, set.iter(), Labeler::Human(SURVEY_LABELER.into()), c.created_at)
                .expect("comment was just ingested");
        }
    }
    corpus
}
