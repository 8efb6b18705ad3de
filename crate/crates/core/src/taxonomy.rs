//! Comment corpus data model and the fixed thirteen-category taxonomy.
//!
//! Categories, artifact kinds and comment records are plain value types.
//! Label bookkeeping (who labeled what, and which labels are in effect) lives
//! in [`crate::corpus::Corpus`]; this module only defines the records and
//! their validation rules.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TaxonomyError {
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("unknown artifact kind `{0}`")]
    UnknownArtifact(String),
    #[error("unknown source `{0}`")]
    UnknownSource(String),
    #[error("unknown author role `{0}`")]
    UnknownRole(String),
    #[error("invalid labeler `{0}`")]
    InvalidLabeler(String),
    #[error("empty label set")]
    EmptyLabelSet,
}

/// One of the thirteen inspection-comment categories.
///
/// The derived `Ord` follows table order, which is also the canonical order
/// for label cells in CSV output and for chart series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Category {
    ShortDescription,
    Excess,
    Abstract,
    Understandability,
    Undefined,
    Inconsistent,
    Mistake,
    Rationale,
    ShortItems,
    MissedInspection,
    Presentation,
    EnhancementRequest,
    Format,
}

impl Category {
    pub const ALL: [Category; 13] = [
        Category::ShortDescription,
        Category::Excess,
        Category::Abstract,
        Category::Understandability,
        Category::Undefined,
        Category::Inconsistent,
        Category::Mistake,
        Category::Rationale,
        Category::ShortItems,
        Category::MissedInspection,
        Category::Presentation,
        Category::EnhancementRequest,
        Category::Format,
    ];

    pub fn slug(self) -> &'static str {
        match self {
            Category::ShortDescription => "short-description",
            Category::Excess => "excess",
            Category::Abstract => "abstract",
            Category::Understandability => "understandability",
            Category::Undefined => "undefined",
            Category::Inconsistent => "inconsistent",
            Category::Mistake => "mistake",
            Category::Rationale => "rationale",
            Category::ShortItems => "short-items",
            Category::MissedInspection => "missed-inspection",
            Category::Presentation => "presentation",
            Category::EnhancementRequest => "enhancement-request",
            Category::Format => "format",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Category::ShortDescription => "short description",
            Category::Excess => "excess",
            Category::Abstract => "abstract",
            Category::Understandability => "understandability",
            Category::Undefined => "undefined",
            Category::Inconsistent => "inconsistent",
            Category::Mistake => "mistake",
            Category::Rationale => "rationale",
            Category::ShortItems => "short items",
            Category::MissedInspection => "missed inspection comments",
            Category::Presentation => "presentation",
            Category::EnhancementRequest => "enhancement request",
            Category::Format => "format",
        }
    }

    pub fn definition(self) -> &'static str {
        match self {
            Category::ShortDescription => "Lack of description",
            Category::Excess => "Excess of description",
            Category::Abstract => "Too abstract description",
            Category::Understandability => "Difficult to understand the descriptions",
            Category::Undefined => "Undefined term",
            Category::Inconsistent => "Inconsistency among deliverables",
            Category::Mistake => "Obvious errors in description and model notation",
            Category::Rationale => "Unknown design basis",
            Category::ShortItems => "Lack of information to be stated",
            Category::MissedInspection => "Unmodified to previous inspections",
            Category::Presentation => "Inappropriately worded",
            Category::EnhancementRequest => "Suggestions for improvements to specifications",
            Category::Format => "Document formatting deficiencies",
        }
    }

    /// Zero-based position in table order.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> CategoryLabel {
        CategoryLabel {
            slug: self,
            display_name: self.display_name(),
            definition: self.definition(),
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for Category {
    type Err = TaxonomyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.slug() == s)
            .ok_or_else(|| TaxonomyError::UnknownLabel(s.to_string()))
    }
}

/// A category together with its human-readable name and definition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CategoryLabel {
    pub slug: Category,
    pub display_name: &'static str,
    pub definition: &'static str,
}

/// The thirteen categories in table order.
pub fn taxonomy() -> [CategoryLabel; 13] {
    Category::ALL.map(Category::label)
}

/// Kind of course artifact a comment targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArtifactKind {
    FunctionalSpec,
    ScreenTransition,
    ClassDiagram,
    DatabaseSpec,
    SequenceDiagram,
    Statechart,
    Other,
}

impl ArtifactKind {
    pub const ALL: [ArtifactKind; 7] = [
        ArtifactKind::FunctionalSpec,
        ArtifactKind::ScreenTransition,
        ArtifactKind::ClassDiagram,
        ArtifactKind::DatabaseSpec,
        ArtifactKind::SequenceDiagram,
        ArtifactKind::Statechart,
        ArtifactKind::Other,
    ];

    pub fn slug(self) -> &'static str {
        match self {
            ArtifactKind::FunctionalSpec => "functional-spec",
            ArtifactKind::ScreenTransition => "screen-transition",
            ArtifactKind::ClassDiagram => "class-diagram",
            ArtifactKind::DatabaseSpec => "database-spec",
            ArtifactKind::SequenceDiagram => "sequence-diagram",
            ArtifactKind::Statechart => "statechart",
            ArtifactKind::Other => "other",
        }
    }

    /// Notation the artifact is authored in.
    pub fn notation(self) -> &'static str {
        match self {
            ArtifactKind::FunctionalSpec | ArtifactKind::DatabaseSpec => "Markdown",
            ArtifactKind::ScreenTransition => "figma",
            ArtifactKind::ClassDiagram
            | ArtifactKind::SequenceDiagram
            | ArtifactKind::Statechart => "plant UML",
            ArtifactKind::Other => "text",
        }
    }

    /// Best-effort guess from a repository file path.
    pub fn guess_from_path(path: &str) -> ArtifactKind {
        let p = path.to_lowercase();
        if p.contains("class") {
            ArtifactKind::ClassDiagram
        } else if p.contains("sequence") {
            ArtifactKind::SequenceDiagram
        } else if p.contains("state") {
            ArtifactKind::Statechart
        } else if p.contains("database") || p.contains("/db") || p.starts_with("db") {
            ArtifactKind::DatabaseSpec
        } else if p.contains("functional") || p.contains("requirement") {
            ArtifactKind::FunctionalSpec
        } else if p.contains("screen") || p.contains("transition") {
            ArtifactKind::ScreenTransition
        } else {
            ArtifactKind::Other
        }
    }
}

impl fmt::Display for ArtifactKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for ArtifactKind {
    type Err = TaxonomyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ArtifactKind::ALL
            .into_iter()
            .find(|a| a.slug() == s)
            .ok_or_else(|| TaxonomyError::UnknownArtifact(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    DesignTool,
    CodeHost,
}

impl Source {
    pub fn slug(self) -> &'static str {
        match self {
            Source::DesignTool => "design-tool",
            Source::CodeHost => "code-host",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for Source {
    type Err = TaxonomyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "design-tool" => Ok(Source::DesignTool),
            "code-host" => Ok(Source::CodeHost),
            other => Err(TaxonomyError::UnknownSource(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AuthorRole {
    Teacher,
    TeachingAssistant,
    Student,
}

impl AuthorRole {
    pub fn slug(self) -> &'static str {
        match self {
            AuthorRole::Teacher => "teacher",
            AuthorRole::TeachingAssistant => "teaching-assistant",
            AuthorRole::Student => "student",
        }
    }
}

impl fmt::Display for AuthorRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for AuthorRole {
    type Err = TaxonomyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "teacher" => Ok(AuthorRole::Teacher),
            "teaching-assistant" => Ok(AuthorRole::TeachingAssistant),
            "student" => Ok(AuthorRole::Student),
            other => Err(TaxonomyError::UnknownRole(other.to_string())),
        }
    }
}

/// Opaque comment identifier, unique across sources.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CommentId(pub String);

impl CommentId {
    pub fn new(id: impl Into<String>) -> Self {
        CommentId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CommentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for CommentId {
    fn from(s: &str) -> Self {
        CommentId(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PullRequestRef {
    pub repo: String,
    pub pr_number: u64,
}

/// Where a comment was made, shaped by its source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SourceLocation {
    DesignTool {
        project_id: String,
        frame_id: String,
        x: f64,
        y: f64,
    },
    CodeHost {
        repo: String,
        pr_number: u64,
        file_path: Option<String>,
    },
}

impl SourceLocation {
    pub fn source(&self) -> Source {
        match self {
            SourceLocation::DesignTool { .. } => Source::DesignTool,
            SourceLocation::CodeHost { .. } => Source::CodeHost,
        }
    }
}

/// One review remark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InspectionComment {
    pub id: CommentId,
    pub source: Source,
    pub year: i32,
    pub group: String,
    pub author_role: AuthorRole,
    pub artifact: ArtifactKind,
    pub body: String,
    pub created_at: DateTime<Utc>,
    pub location: SourceLocation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_id: Option<CommentId>,
    /// Pull request a design-tool comment was mirrored into.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub posted_in: Option<PullRequestRef>,
    /// Repository path of the pin image published for a design-tool comment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_path: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Violation {
    EmptyBody,
    LocationSourceMismatch,
    NonFiniteCoordinate,
    InvalidPrNumber,
    EmptyId,
    SelfParent,
    UnknownParent { parent: CommentId },
    ParentSourceMismatch { parent: CommentId },
    PostedInOnCodeHost,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyBody => f.write_str("empty body"),
            Violation::LocationSourceMismatch => f.write_str("location/source mismatch"),
            Violation::NonFiniteCoordinate => f.write_str("non-finite coordinate"),
            Violation::InvalidPrNumber => f.write_str("pull request number must be positive"),
            Violation::EmptyId => f.write_str("empty id"),
            Violation::SelfParent => f.write_str("comment is its own parent"),
            Violation::UnknownParent { parent } => write!(f, "unknown parent `{parent}`"),
            Violation::ParentSourceMismatch { parent } => {
                write!(f, "parent `{parent}` has a different source")
            }
            Violation::PostedInOnCodeHost => {
                f.write_str("posted_in is only meaningful for design-tool comments")
            }
        }
    }
}

/// Checks every invariant of a standalone comment. Parent references are not
/// checked here; see [`validate_comment_in`].
pub fn validate_comment(c: &InspectionComment) -> Result<(), Vec<Violation>> {
    validate_comment_in(c, |_| None)
}

/// Like [`validate_comment`], resolving `parent_id` through `lookup` which
/// returns the parent's source when the parent exists.
pub fn validate_comment_in(
    c: &InspectionComment,
    lookup: impl Fn(&CommentId) -> Option<Source>,
) -> Result<(), Vec<Violation>> {
    let mut v = Vec::new();
    if c.id.as_str().trim().is_empty() {
        v.push(Violation::EmptyId);
    }
    if c.body.trim().is_empty() {
        v.push(Violation::EmptyBody);
    }
    if c.location.source() != c.source {
        v.push(Violation::LocationSourceMismatch);
    }
    match &c.location {
        SourceLocation::DesignTool { x, y, .. } => {
            if !x.is_finite() || !y.is_finite() {
                v.push(Violation::NonFiniteCoordinate);
            }
        }
        SourceLocation::CodeHost { pr_number, .. } => {
            if *pr_number == 0 {
                v.push(Violation::InvalidPrNumber);
            }
        }
    }
    if let Some(pr) = &c.posted_in {
        if c.source == Source::CodeHost {
            v.push(Violation::PostedInOnCodeHost);
        }
        if pr.pr_number == 0 {
            v.push(Violation::InvalidPrNumber);
        }
    }
    if let Some(parent) = &c.parent_id {
        if parent == &c.id {
            v.push(Violation::SelfParent);
        } else {
            match lookup(parent) {
                None => v.push(Violation::UnknownParent {
                    parent: parent.clone(),
                }),
                Some(src) if src != c.source => v.push(Violation::ParentSourceMismatch {
                    parent: parent.clone(),
                }),
                Some(_) => {}
            }
        }
    }
    if v.is_empty() {
        Ok(())
    } else {
        Err(v)
    }
}

/// Who produced a label assignment.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Labeler {
    Human(String),
    RuleBaseline,
    MlModel(String),
}

impl Labeler {
    pub fn is_human(&self) -> bool {
        matches!(self, Labeler::Human(_))
    }
}

impl fmt::Display for Labeler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Labeler::Human(name) => write!(f, "human:{name}"),
            Labeler::RuleBaseline => f.write_str("rule-baseline"),
            Labeler::MlModel(version) => write!(f, "ml-model:{version}"),
        }
    }
}

impl FromStr for Labeler {
    type Err = TaxonomyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "rule-baseline" {
            return Ok(Labeler::RuleBaseline);
        }
        let bad = || TaxonomyError::InvalidLabeler(s.to_string());
        match s.split_once(':') {
            Some(("human", name)) if !name.is_empty() => Ok(Labeler::Human(name.to_string())),
            Some(("ml-model", v)) if !v.is_empty() => Ok(Labeler::MlModel(v.to_string())),
            _ => Err(bad()),
        }
    }
}

impl Serialize for Labeler {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Labeler {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Non-empty set of categories, iterated in table order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Category>", into = "Vec<Category>")]
pub struct LabelSet(BTreeSet<Category>);

impl LabelSet {
    pub fn new(labels: impl IntoIterator<Item = Category>) -> Result<Self, TaxonomyError> {
        let set: BTreeSet<Category> = labels.into_iter().collect();
        if set.is_empty() {
            Err(TaxonomyError::EmptyLabelSet)
        } else {
            Ok(LabelSet(set))
        }
    }

    /// Parses slugs joined by `sep`, e.g. `mistake;format`.
    pub fn parse(s: &str, sep: char) -> Result<Self, TaxonomyError> {
        let labels = s
            .split(sep)
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<Category>, _>>()?;
        LabelSet::new(labels)
    }

    pub fn contains(&self, c: Category) -> bool {
        self.0.contains(&c)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn iter(&self) -> impl Iterator<Item = Category> + '_ {
        self.0.iter().copied()
    }

    pub fn join(&self, sep: &str) -> String {
        self.iter().map(Category::slug).collect::<Vec<_>>().join(sep)
    }
}

impl TryFrom<Vec<Category>> for LabelSet {
    type Error = TaxonomyError;

    fn try_from(v: Vec<Category>) -> Result<Self, Self::Error> {
        LabelSet::new(v)
    }
}

impl From<LabelSet> for Vec<Category> {
    fn from(s: LabelSet) -> Self {
        s.0.into_iter().collect()
    }
}

/// One labeling event. Assignments are append-only; see
/// [`crate::corpus::Corpus::effective_labels`] for how they resolve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelAssignment {
    pub comment_id: CommentId,
    pub labels: LabelSet,
    pub labeler: Labeler,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<BTreeMap<Category, f64>>,
    pub assigned_at: DateTime<Utc>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn sample() -> InspectionComment {
        InspectionComment {
            id: "c1".into(),
            source: Source::DesignTool,
            year: 2022,
            group: "G1".into(),
            author_role: AuthorRole::Teacher,
            artifact: ArtifactKind::ScreenTransition,
            body: "Button label is unclear".into(),
            created_at: Utc.with_ymd_and_hms(2022, 6, 1, 9, 0, 0).unwrap(),
            location: SourceLocation::DesignTool {
                project_id: "p1".into(),
                frame_id: "f1".into(),
                x: 10.0,
                y: -4.5,
            },
            parent_id: None,
            posted_in: None,
            image_path: None,
        }
    }

    #[test]
    fn taxonomy_order_and_definitions() {
        let t = taxonomy();
        assert_eq!(t.len(), 13);
        assert_eq!(t[0].slug.slug(), "short-description");
        assert_eq!(t[0].definition, "Lack of description");
        assert_eq!(t[10].slug.slug(), "presentation");
        assert_eq!(t[10].definition, "Inappropriately worded");
        assert_eq!(t[5].definition, "Inconsistency among deliverables");
        for (i, l) in t.iter().enumerate() {
            assert_eq!(l.slug.index(), i);
        }
    }

    #[test]
    fn slugs_unique_and_round_trip() {
        let slugs: BTreeSet<&str> = Category::ALL.iter().map(|c| c.slug()).collect();
        assert_eq!(slugs.len(), 13);
        for c in Category::ALL {
            assert_eq!(c.slug().parse::<Category>().unwrap(), c);
            assert!(c.slug().chars().all(|ch| ch.is_ascii_lowercase() || ch == '-'));
        }
        assert!("speling".parse::<Category>().is_err());
    }

    #[test]
    fn artifact_kinds() {
        assert_eq!(ArtifactKind::ScreenTransition.notation(), "figma");
        assert_eq!(ArtifactKind::ClassDiagram.notation(), "plant UML");
        for a in ArtifactKind::ALL {
            assert_eq!(a.slug().parse::<ArtifactKind>().unwrap(), a);
        }
        assert_eq!(
            ArtifactKind::guess_from_path("docs/class_diagram.puml"),
            ArtifactKind::ClassDiagram
        );
        assert_eq!(ArtifactKind::guess_from_path("README.md"), ArtifactKind::Other);
    }

    #[test]
    fn well_formed_comment_is_ok() {
        assert_eq!(validate_comment(&sample()), Ok(()));
    }

    #[test]
    fn empty_body_is_reported() {
        let mut c = sample();
        c.body = "  \n".into();
        let v = validate_comment(&c).unwrap_err();
        assert_eq!(v, vec![Violation::EmptyBody]);
        assert_eq!(v[0].to_string(), "empty body");
    }

    #[test]
    fn location_mismatch_is_reported() {
        let mut c = sample();
        c.location = SourceLocation::CodeHost {
            repo: "org/app".into(),
            pr_number: 7,
            file_path: None,
        };
        let v = validate_comment(&c).unwrap_err();
        assert!(v.contains(&Violation::LocationSourceMismatch));
        assert_eq!(
            Violation::LocationSourceMismatch.to_string(),
            "location/source mismatch"
        );
    }

    #[test]
    fn all_violations_collected() {
        let mut c = sample();
        c.body = String::new();
        c.location = SourceLocation::DesignTool {
            project_id: "p".into(),
            frame_id: "f".into(),
            x: f64::NAN,
            y: 0.0,
        };
        c.parent_id = Some("missing".into());
        let v = validate_comment(&c).unwrap_err();
        assert_eq!(v.len(), 3);
    }

    #[test]
    fn parent_checks() {
        let mut c = sample();
        c.parent_id = Some("c0".into());
        assert!(validate_comment_in(&c, |_| Some(Source::DesignTool)).is_ok());
        let v = validate_comment_in(&c, |_| Some(Source::CodeHost)).unwrap_err();
        assert!(matches!(v[0], Violation::ParentSourceMismatch { .. }));
    }

    #[test]
    fn labeler_parsing() {
        for s in ["human:alice", "rule-baseline", "ml-model:v1"] {
            assert_eq!(s.parse::<Labeler>().unwrap().to_string(), s);
        }
        assert!("human:".parse::<Labeler>().is_err());
        assert!("robot".parse::<Labeler>().is_err());
    }

    #[test]
    fn label_set_semantics() {
        let s = LabelSet::new([Category::Format, Category::Mistake, Category::Format]).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.join(";"), "mistake;format");
        assert_eq!(LabelSet::new([]), Err(TaxonomyError::EmptyLabelSet));
        assert_eq!(
            LabelSet::parse("format;speling", ';'),
            Err(TaxonomyError::UnknownLabel("speling".into()))
        );
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, r#"["mistake","format"]"#);
        assert!(serde_json::from_str::<LabelSet>("[]").is_err());
    }
}
