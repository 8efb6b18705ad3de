//! Access to the design tool and the code host. The fixture implementation
//! reads and writes a directory tree; the live one (feature `live`) talks to
//! the public REST APIs.

use chrono::{DateTime, Utc};
use image::RgbaImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod fixture;
#[cfg(feature = "live")]
pub mod live;

pub use fixture::FixtureTransport;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("transport unreachable: {0}")]
    Unreachable(String),
    #[error("project not found: {0}")]
    ProjectNotFound(String),
    #[error("PR not found")]
    PrNotFound { repo: String, pr_number: u64 },
    #[error("malformed payload at {record}: {message}")]
    Malformed { record: String, message: String },
}

impl TransportError {
    /// Failures worth retrying later with the same inputs.
    pub fn is_retryable(&self) -> bool {
        matches!(self, TransportError::Unreachable(_))
    }
}

/// A comment as the design tool reports it, before frame images are attached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignCommentRecord {
    pub remote_id: String,
    pub frame_id: String,
    pub x: f64,
    pub y: f64,
    pub body: String,
    pub created_at: DateTime<Utc>,
    #[serde(default)]
    pub parent_remote_id: Option<String>,
}

/// A conversation comment on a pull request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrComment {
    pub id: String,
    pub body: String,
    #[serde(default)]
    pub author: String,
    pub created_at: DateTime<Utc>,
    /// File the comment is anchored to, for review comments.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

pub trait DesignTool {
    fn list_comments(&self, project_id: &str) -> Result<Vec<DesignCommentRecord>, TransportError>;

    /// `Ok(None)` when the frame has no exportable image.
    fn frame_image(&self, project_id: &str, frame_id: &str)
        -> Result<Option<RgbaImage>, TransportError>;
}

pub trait CodeHost {
    fn list_pr_comments(&self, repo: &str, pr_number: u64) -> Result<Vec<PrComment>, TransportError>;

    /// Posts a conversation comment and returns its remote id.
    fn create_pr_comment(&self, repo: &str, pr_number: u64, body: &str)
        -> Result<String, TransportError>;

    /// How a PR comment should link to a file stored on `ref_name`.
    fn image_link(&self, repo: &str, ref_name: &str, path: &str) -> String;
}
