//! Mirrors design-tool comments into a pull request: each comment gets a pin
//! image committed to an image ref and a PR comment that links to it and
//! carries an idempotency marker.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::sync::Arc;

use chrono::{DateTime, Datelike, Utc};
use image::RgbaImage;
use serde::Serialize;
use thiserror::Error;

use crate::taxonomy::{
    ArtifactKind, AuthorRole, CommentId, InspectionComment, PullRequestRef, Source, SourceLocation,
};

pub mod git;
pub mod marker;
pub mod pin;
pub mod transport;

pub use git::{ObjectStore, Signature, DEFAULT_IMAGE_REF};
pub use marker::SyncMarker;
pub use pin::{render_pin, RenderedPinImage};
pub use transport::{CodeHost, DesignCommentRecord, DesignTool, PrComment, TransportError};

pub const MISSING_FRAME: &str = "missing frame image";

/// A design-tool comment paired with the frame it annotates.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignToolComment {
    pub remote_id: String,
    pub frame_id: String,
    pub frame_image: Arc<RgbaImage>,
    pub x: f64,
    pub y: f64,
    pub body: String,
    pub created_at: DateTime<Utc>,
    pub parent_remote_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SyncFailure {
    pub remote_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SyncReport {
    pub fetched: usize,
    pub published_images: usize,
    pub posted_comments: usize,
    pub skipped_duplicates: usize,
    pub failures: Vec<SyncFailure>,
}

impl SyncReport {
    pub fn is_balanced(&self) -> bool {
        self.fetched == self.posted_comments + self.skipped_duplicates + self.failures.len()
    }
}

/// Result of fetching a project: usable comments plus per-comment failures.
#[derive(Debug, Clone, Default)]
pub struct DesignFetch {
    pub comments: Vec<DesignToolComment>,
    pub failures: Vec<SyncFailure>,
}

#[derive(Debug, Error)]
pub enum SyncError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("duplicate design comment id `{0}`")]
    DuplicateRemoteId(String),
}

/// Loads every comment of `project_id` with its frame image. Frames are
/// fetched once each; comments whose frame cannot be loaded become failures.
pub fn fetch_design_comments(
    project_id: &str,
    transport: &dyn DesignTool,
) -> Result<DesignFetch, SyncError> {
    let records = transport.list_comments(project_id)?;
    let mut seen = HashSet::new();
    for r in &records {
        if !seen.insert(r.remote_id.as_str()) {
            return Err(SyncError::DuplicateRemoteId(r.remote_id.clone()));
        }
    }
    let mut frames: HashMap<String, Result<Arc<RgbaImage>, String>> = HashMap::new();
    let mut out = DesignFetch::default();
    for r in records {
        let frame = frames
            .entry(r.frame_id.clone())
            .or_insert_with(|| match transport.frame_image(project_id, &r.frame_id) {
                Ok(Some(img)) if img.width() >= 1 && img.height() >= 1 => Ok(Arc::new(img)),
                Ok(_) => Err(MISSING_FRAME.to_string()),
                Err(e) => Err(e.to_string()),
            })
            .clone();
        match frame {
            Ok(frame_image) => out.comments.push(DesignToolComment {
                remote_id: r.remote_id,
                frame_id: r.frame_id,
                frame_image,
                x: r.x,
                y: r.y,
                body: r.body,
                created_at: r.created_at,
                parent_remote_id: r.parent_remote_id,
            }),
            Err(reason) => out.failures.push(SyncFailure {
                remote_id: r.remote_id,
                reason,
            }),
        }
    }
    Ok(out)
}

/// Repository path for a comment's pin image. The escape keeps ASCII
/// alphanumerics and `_`, and writes every other byte as `-xx`, so distinct
/// ids never share a path.
pub fn image_path(pr_number: u64, remote_id: &str) -> String {
    let mut name = String::new();
    for b in remote_id.bytes() {
        if b.is_ascii_alphanumeric() || b == b'_' {
            name.push(b as char);
        } else {
            name.push_str(&format!("-{b:02x}"));
        }
    }
    format!("images/pr{pr_number}/c{name}.png")
}

/// Posts a mirrored comment: original text, image reference and marker.
pub fn post_pr_comment(
    code_host: &dyn CodeHost,
    repo: &str,
    pr_number: u64,
    body: &str,
    image_link: &str,
    index: u32,
    reply_to: Option<&str>,
    marker: &SyncMarker,
) -> Result<String, TransportError> {
    let text = marker::compose_body(body, reply_to, index, image_link, marker);
    code_host.create_pr_comment(repo, pr_number, &text)
}

#[derive(Debug, Clone)]
pub struct SyncParams<'a> {
    pub project_id: &'a str,
    pub repo: &'a str,
    pub pr_number: u64,
    pub ref_name: &'a str,
    pub signature: Signature,
}

fn existing_keys(
    code_host: &dyn CodeHost,
    repo: &str,
    pr_number: u64,
) -> Result<HashSet<(String, String)>, TransportError> {
    let mut keys = HashSet::new();
    for c in code_host.list_pr_comments(repo, pr_number)? {
        for m in marker::find_markers(&c.body).into_iter().flatten() {
            keys.insert((m.project_id, m.remote_id));
        }
    }
    Ok(keys)
}

/// Runs one batch: fetch, then for every comment without a marker in the PR
/// render its pin, publish the image and post the comment.
///
/// Per-comment problems land in the report. Only losing a transport as a
/// whole (listing the project or the PR) aborts.
pub fn sync(
    params: &SyncParams<'_>,
    design: &dyn DesignTool,
    code_host: &dyn CodeHost,
    store: &dyn ObjectStore,
) -> Result<SyncReport, SyncError> {
    let fetch = fetch_design_comments(params.project_id, design)?;
    let mut report = SyncReport {
        fetched: fetch.comments.len() + fetch.failures.len(),
        failures: fetch.failures,
        ..SyncReport::default()
    };
    let mut posted = existing_keys(code_host, params.repo, params.pr_number)?;
    let index_of: HashMap<&str, usize> = fetch
        .comments
        .iter()
        .enumerate()
        .map(|(i, c)| (c.remote_id.as_str(), i + 1))
        .collect();

    for (i, c) in fetch.comments.iter().enumerate() {
        let index = (i + 1) as u32;
        let key = (params.project_id.to_string(), c.remote_id.clone());
        if posted.contains(&key) {
            report.skipped_duplicates += 1;
            continue;
        }
        let path = image_path(params.pr_number, &c.remote_id);
        let png = render_pin(&c.frame_image, c.x, c.y, index).to_png();
        let message = format!("Add pin image for design comment {}", c.remote_id);
        if let Err(e) = git::publish_image(store, params.ref_name, &path, &png, &message, &params.signature) {
            report.failures.push(SyncFailure {
                remote_id: c.remote_id.clone(),
                reason: e.to_string(),
            });
            continue;
        }
        report.published_images += 1;

        // another sync of the same pair may have posted meanwhile
        match existing_keys(code_host, params.repo, params.pr_number) {
            Ok(now) if now.contains(&key) => {
                report.skipped_duplicates += 1;
                posted.insert(key);
                continue;
            }
            Ok(_) => {}
            Err(e) => {
                report.failures.push(SyncFailure {
                    remote_id: c.remote_id.clone(),
                    reason: e.to_string(),
                });
                continue;
            }
        }

        let marker = SyncMarker {
            remote_id: c.remote_id.clone(),
            project_id: params.project_id.to_string(),
            frame_id: c.frame_id.clone(),
            x: c.x,
            y: c.y,
            created_at: Some(c.created_at),
            image_path: Some(path.clone()),
            parent_remote_id: c.parent_remote_id.clone(),
        };
        let reply = c
            .parent_remote_id
            .as_deref()
            .map(|p| marker::reply_prefix(index_of.get(p).copied(), p));
        let link = code_host.image_link(params.repo, params.ref_name, &path);
        match post_pr_comment(
            code_host,
            params.repo,
            params.pr_number,
            &c.body,
            &link,
            index,
            reply.as_deref(),
            &marker,
        ) {
            Ok(_) => {
                report.posted_comments += 1;
                posted.insert(key);
            }
            Err(e) => report.failures.push(SyncFailure {
                remote_id: c.remote_id.clone(),
                reason: e.to_string(),
            }),
        }
    }
    debug_assert!(report.is_balanced());
    Ok(report)
}

/// Metadata the code host does not know.
#[derive(Debug, Clone)]
pub struct ImportContext {
    pub group: String,
    /// Course year; defaults to each comment's creation year.
    pub year: Option<i32>,
    pub default_role: AuthorRole,
    pub roles: BTreeMap<String, AuthorRole>,
}

impl Default for ImportContext {
    fn default() -> Self {
        ImportContext {
            group: "G1".to_string(),
            year: None,
            default_role: AuthorRole::Teacher,
            roles: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct CodeHostImport {
    pub comments: Vec<InspectionComment>,
    pub warnings: Vec<String>,
}

pub fn design_comment_id(remote_id: &str) -> CommentId {
    CommentId(format!("figma-{remote_id}"))
}

pub fn code_host_comment_id(remote_id: &str) -> CommentId {
    CommentId(format!("gh-{remote_id}"))
}

/// Maps a PR conversation into corpus records. Comments with exactly one
/// valid marker become design-tool records; anything else stays a code-host
/// record, with a warning when a marker was present but unusable.
pub fn fetch_code_host_comments(
    repo: &str,
    pr_number: u64,
    transport: &dyn CodeHost,
    ctx: &ImportContext,
) -> Result<CodeHostImport, TransportError> {
    let mut out = CodeHostImport::default();
    let mut claimed = BTreeSet::new();
    for c in transport.list_pr_comments(repo, pr_number)? {
        let role = ctx.roles.get(&c.author).copied().unwrap_or(ctx.default_role);
        let markers = marker::find_markers(&c.body);
        let decoded = match markers.as_slice() {
            [] => None,
            [Ok(m)] if claimed.insert(m.remote_id.clone()) => Some(m.clone()),
            [Ok(m)] => {
                out.warnings.push(format!(
                    "comment {}: design comment {} already imported from another PR comment",
                    c.id, m.remote_id
                ));
                None
            }
            [Err(e)] => {
                out.warnings.push(format!("comment {}: malformed marker: {e}", c.id));
                None
            }
            many => {
                out.warnings.push(format!("comment {}: {} markers, expected one", c.id, many.len()));
                None
            }
        };
        let record = match decoded {
            Some(m) => {
                let created_at = m.created_at.unwrap_or(c.created_at);
                InspectionComment {
                    id: design_comment_id(&m.remote_id),
                    source: Source::DesignTool,
                    year: ctx.year.unwrap_or(created_at.year()),
                    group: ctx.group.clone(),
                    author_role: role,
                    artifact: ArtifactKind::ScreenTransition,
                    body: marker::decompose_body(&c.body, &m),
                    created_at,
                    parent_id: m.parent_remote_id.as_deref().map(design_comment_id),
                    posted_in: Some(PullRequestRef {
                        repo: repo.to_string(),
                        pr_number,
                    }),
                    image_path: m.image_path.clone(),
                    location: SourceLocation::DesignTool {
                        project_id: m.project_id,
                        frame_id: m.frame_id,
                        x: m.x,
                        y: m.y,
                    },
                }
            }
            None => InspectionComment {
                id: code_host_comment_id(&c.id),
                source: Source::CodeHost,
                year: ctx.year.unwrap_or(c.created_at.year()),
                group: ctx.group.clone(),
                author_role: role,
                artifact: c
                    .path
                    .as_deref()
                    .map(ArtifactKind::guess_from_path)
                    .unwrap_or(ArtifactKind::Other),
                body: c.body,
                created_at: c.created_at,
                location: SourceLocation::CodeHost {
                    repo: repo.to_string(),
                    pr_number,
                    file_path: c.path,
                },
                parent_id: None,
                posted_in: None,
                image_path: None,
            },
        };
        out.comments.push(record);
    }
    Ok(out)
}
