//! The idempotency marker appended to every mirrored PR comment, and the
//! body layout around it.
//!
//! A posted body looks like
//!
//! ```text
//! reply to #1            (only for replies)
//!
//! <original text, marker-like lines escaped>
//!
//! ![pin 2](<image link>)
//!
//! <!-- [marker] scenecommenter:figma-comment-id=...&project=...&frame=...&x=...&y=... -->
//! ```

use chrono::{DateTime, Utc};
use thiserror::Error;
use url::form_urlencoded;

pub const MARKER_OPEN: &str = "<!-- [marker] scenecommenter:";
pub const MARKER_CLOSE: &str = " -->";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MarkerError {
    #[error("marker is not closed")]
    Unterminated,
    #[error("marker lacks `{0}`")]
    MissingField(&'static str),
    #[error("marker field `{field}` is invalid: `{value}`")]
    InvalidField { field: &'static str, value: String },
    #[error("marker repeats `{0}`")]
    DuplicateField(String),
}

/// Everything needed to rebuild the design-tool comment from its PR copy.
#[derive(Debug, Clone, PartialEq)]
pub struct SyncMarker {
    pub remote_id: String,
    pub project_id: String,
    pub frame_id: String,
    pub x: f64,
    pub y: f64,
    pub created_at: Option<DateTime<Utc>>,
    pub image_path: Option<String>,
    pub parent_remote_id: Option<String>,
}

impl SyncMarker {
    /// Identity used for duplicate detection.
    pub fn key(&self) -> (&str, &str) {
        (&self.project_id, &self.remote_id)
    }

    pub fn to_line(&self) -> String {
        let mut s = form_urlencoded::Serializer::new(String::new());
        s.append_pair("figma-comment-id", &self.remote_id)
            .append_pair("project", &self.project_id)
            .append_pair("frame", &self.frame_id)
            .append_pair("x", &self.x.to_string())
            .append_pair("y", &self.y.to_string());
        if let Some(t) = &self.created_at {
            s.append_pair("created", &t.to_rfc3339_opts(chrono::SecondsFormat::AutoSi, true));
        }
        if let Some(p) = &self.image_path {
            s.append_pair("image", p);
        }
        if let Some(p) = &self.parent_remote_id {
            s.append_pair("parent", p);
        }
        format!("{MARKER_OPEN}{}{MARKER_CLOSE}", s.finish())
    }

    /// Parses a single line. `None` if the line is not a marker at all.
    pub fn parse_line(line: &str) -> Option<Result<SyncMarker, MarkerError>> {
        let rest = line.trim().strip_prefix(MARKER_OPEN)?;
        Some(Self::parse_payload(rest))
    }

    fn parse_payload(rest: &str) -> Result<SyncMarker, MarkerError> {
        let payload = rest
            .strip_suffix(MARKER_CLOSE.trim_start())
            .ok_or(MarkerError::Unterminated)?
            .trim_end();
        let mut fields = std::collections::BTreeMap::new();
        for (k, v) in form_urlencoded::parse(payload.as_bytes()) {
            if fields.insert(k.to_string(), v.to_string()).is_some() {
                return Err(MarkerError::DuplicateField(k.into_owned()));
            }
        }
        let mut take = |name: &'static str| fields.remove(name);
        let required = |v: Option<String>, name: &'static str| v.ok_or(MarkerError::MissingField(name));
        let coord = |v: String, name: &'static str| {
            v.parse::<f64>()
                .map_err(|_| MarkerError::InvalidField { field: name, value: v })
        };
        let remote_id = required(take("figma-comment-id"), "figma-comment-id")?;
        if remote_id.is_empty() {
            return Err(MarkerError::InvalidField {
                field: "figma-comment-id",
                value: remote_id,
            });
        }
        let project_id = required(take("project"), "project")?;
        let frame_id = required(take("frame"), "frame")?;
        let x = coord(required(take("x"), "x")?, "x")?;
        let y = coord(required(take("y"), "y")?, "y")?;
        let created_at = match take("created") {
            Some(v) => Some(
                DateTime::parse_from_rfc3339(&v)
                    .map_err(|_| MarkerError::InvalidField { field: "created", value: v })?
                    .with_timezone(&Utc),
            ),
            None => None,
        };
        Ok(SyncMarker {
            remote_id,
            project_id,
            frame_id,
            x,
            y,
            created_at,
            image_path: take("image"),
            parent_remote_id: take("parent"),
        })
    }
}

fn marker_like(line: &str) -> bool {
    line.trim_start().trim_start_matches('\\').starts_with(MARKER_OPEN)
}

/// Makes marker-looking lines inert by adding one backslash in front of the
/// marker text. Reversible by [`unescape_body`].
pub fn escape_body(body: &str) -> String {
    map_lines(body, |line| {
        if marker_like(line) {
            let indent = line.len() - line.trim_start().len();
            format!("{}\\{}", &line[..indent], &line[indent..])
        } else {
            line.to_string()
        }
    })
}

pub fn unescape_body(body: &str) -> String {
    map_lines(body, |line| {
        if marker_like(line) && line.trim_start().starts_with('\\') {
            let indent = line.len() - line.trim_start().len();
            format!("{}{}", &line[..indent], &line[indent + 1..])
        } else {
            line.to_string()
        }
    })
}

/// Applies `f` to each line, keeping the exact `\n` / `\r\n` separators.
fn map_lines(s: &str, f: impl Fn(&str) -> String) -> String {
    let mut out = String::with_capacity(s.len() + 8);
    for piece in s.split_inclusive('\n') {
        let (line, end) = match piece.strip_suffix("\r\n") {
            Some(l) => (l, "\r\n"),
            None => match piece.strip_suffix('\n') {
                Some(l) => (l, "\n"),
                None => (piece, ""),
            },
        };
        out.push_str(&f(line));
        out.push_str(end);
    }
    out
}

/// Markers found in a PR comment body, in line order. Escaped lines do not
/// count.
pub fn find_markers(body: &str) -> Vec<Result<SyncMarker, MarkerError>> {
    body.lines().filter_map(SyncMarker::parse_line).collect()
}

pub fn reply_prefix(parent_index: Option<usize>, parent_remote_id: &str) -> String {
    match parent_index {
        Some(i) => format!("reply to #{i}"),
        None => format!("reply to comment {parent_remote_id}"),
    }
}

/// Assembles the PR comment body.
pub fn compose_body(
    text: &str,
    reply_to: Option<&str>,
    index: u32,
    image_link: &str,
    marker: &SyncMarker,
) -> String {
    let mut out = String::new();
    if let Some(prefix) = reply_to {
        out.push_str(prefix);
        out.push_str("\n\n");
    }
    out.push_str(&escape_body(text));
    out.push_str(&format!("\n\n![pin {index}]({image_link})\n\n"));
    out.push_str(&marker.to_line());
    out
}

/// Recovers the original text from a composed body. Falls back to the body
/// minus marker lines when the layout was edited by hand.
pub fn decompose_body(body: &str, marker: &SyncMarker) -> String {
    let strict = || -> Option<String> {
        let (rest, last) = body.rsplit_once("\n\n")?;
        SyncMarker::parse_line(last)?.ok()?;
        let (mut text, image) = rest.rsplit_once("\n\n")?;
        if !(image.starts_with("![pin ") && image.ends_with(')')) {
            return None;
        }
        if marker.parent_remote_id.is_some() {
            let (prefix, tail) = text.split_once("\n\n")?;
            if !prefix.starts_with("reply to ") {
                return None;
            }
            text = tail;
        }
        Some(unescape_body(text))
    };
    strict().unwrap_or_else(|| {
        let kept: Vec<&str> = body
            .lines()
            .filter(|l| SyncMarker::parse_line(l).is_none())
            .collect();
        unescape_body(kept.join("\n").trim())
    })
}
