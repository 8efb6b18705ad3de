//! Inspection-comment toolkit: a unified corpus of review comments from a
//! design tool and a code host, a bridge that mirrors design comments into
//! pull requests with pin images, category statistics, and an automatic
//! classifier over the thirteen-category taxonomy.

pub mod analytics;
pub mod bridge;
pub mod classifier;
pub mod corpus;
pub mod survey;
pub mod taxonomy;

pub use analytics::{compute_stats, percentage_chart_data, yearly_comment_totals, GroupStats};
pub use corpus::{Corpus, CorpusDir};
pub use taxonomy::{
    taxonomy, ArtifactKind, AuthorRole, Category, CategoryLabel, CommentId, InspectionComment,
    LabelAssignment, LabelSet, Labeler, PullRequestRef, Source, SourceLocation,
};
