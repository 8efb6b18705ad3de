use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use image::RgbaImage;

use super::{CodeHost, DesignCommentRecord, DesignTool, PrComment, TransportError};
use crate::bridge::git::{DirStore, GitError};

type Clock = Arc<dyn Fn() -> DateTime<Utc> + Send + Sync>;

/// Directory-backed transports.
///
/// ```text
/// project/<id>/comments.json          design comments
/// project/<id>/frames/<frame>.png     frame images
/// repo/<name>/pr/<n>/comments.json    PR conversation
/// repo/<name>/git/                    object store for published images
/// ```
#[derive(Clone)]
pub struct FixtureTransport {
    root: PathBuf,
    clock: Clock,
}

impl std::fmt::Debug for FixtureTransport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FixtureTransport").field("root", &self.root).finish()
    }
}

fn safe_segments(what: &str, s: &str) -> Result<(), TransportError> {
    let bad = s.is_empty()
        || s.split('/')
            .any(|p| p.is_empty() || p == "." || p == ".." || p.contains('\\') || p.contains('\0'));
    if bad {
        Err(TransportError::Malformed {
            record: what.to_string(),
            message: format!("unusable name `{s}`"),
        })
    } else {
        Ok(())
    }
}

fn io_err(path: &Path, e: std::io::Error) -> TransportError {
    TransportError::Unreachable(format!("{}: {e}", path.display()))
}

impl FixtureTransport {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        FixtureTransport {
            root: root.into(),
            clock: Arc::new(Utc::now),
        }
    }

    /// Replaces the timestamp source used for posted comments.
    pub fn with_clock(mut self, clock: impl Fn() -> DateTime<Utc> + Send + Sync + 'static) -> Self {
        self.clock = Arc::new(clock);
        self
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn ensure_root(&self) -> Result<(), TransportError> {
        if self.root.is_dir() {
            Ok(())
        } else {
            Err(TransportError::Unreachable(format!(
                "fixture directory {} does not exist",
                self.root.display()
            )))
        }
    }

    fn project_dir(&self, project_id: &str) -> Result<PathBuf, TransportError> {
        safe_segments("project id", project_id)?;
        Ok(self.root.join("project").join(project_id))
    }

    fn pr_dir(&self, repo: &str, pr_number: u64) -> Result<PathBuf, TransportError> {
        safe_segments("repo", repo)?;
        Ok(self.root.join("repo").join(repo).join("pr").join(pr_number.to_string()))
    }

    /// The image object store that belongs to `repo`.
    pub fn object_store(&self, repo: &str) -> Result<DirStore, GitError> {
        safe_segments("repo", repo).map_err(|e| GitError::InvalidRef(e.to_string()))?;
        DirStore::open(self.root.join("repo").join(repo).join("git"))
    }

    fn read_json(path: &Path) -> Result<Option<Vec<serde_json::Value>>, TransportError> {
        match fs::read(path) {
            Ok(bytes) => serde_json::from_slice(&bytes).map(Some).map_err(|e| TransportError::Malformed {
                record: path.display().to_string(),
                message: e.to_string(),
            }),
            Err(e) if e.kind() == ErrorKind::NotFound => Ok(None),
            Err(e) => Err(io_err(path, e)),
        }
    }

    fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), TransportError> {
        let parent = path.parent().expect("fixture files live in a directory");
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
        let tmp = path.with_extension("json.tmp");
        let text = serde_json::to_string_pretty(value).expect("fixture values serialize");
        fs::write(&tmp, text).map_err(|e| io_err(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| io_err(path, e))
    }

    fn decode<T: serde::de::DeserializeOwned>(
        file: &Path,
        values: Vec<serde_json::Value>,
    ) -> Result<Vec<T>, TransportError> {
        values
            .into_iter()
            .enumerate()
            .map(|(i, v)| {
                serde_json::from_value(v).map_err(|e| TransportError::Malformed {
                    record: format!("{}[{i}]", file.display()),
                    message: e.to_string(),
                })
            })
            .collect()
    }

    /// Writes a design-tool project snapshot.
    pub fn write_project(
        &self,
        project_id: &str,
        comments: &[DesignCommentRecord],
    ) -> Result<(), TransportError> {
        let dir = self.project_dir(project_id)?;
        Self::write_json(&dir.join("comments.json"), &comments)
    }

    pub fn write_frame(
        &self,
        project_id: &str,
        frame_id: &str,
        frame: &RgbaImage,
    ) -> Result<(), TransportError> {
        safe_segments("frame id", frame_id)?;
        let dir = self.project_dir(project_id)?.join("frames");
        fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        let path = dir.join(format!("{frame_id}.png"));
        frame.save(&path).map_err(|e| TransportError::Unreachable(format!("{}: {e}", path.display())))
    }

    /// Creates an empty pull request conversation.
    pub fn create_pr(&self, repo: &str, pr_number: u64) -> Result<(), TransportError> {
        let dir = self.pr_dir(repo, pr_number)?;
        fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        let file = dir.join("comments.json");
        if !file.exists() {
            Self::write_json(&file, &Vec::<PrComment>::new())?;
        }
        Ok(())
    }

    pub fn write_pr_comments(
        &self,
        repo: &str,
        pr_number: u64,
        comments: &[PrComment],
    ) -> Result<(), TransportError> {
        Self::write_json(&self.pr_dir(repo, pr_number)?.join("comments.json"), &comments)
    }
}

impl DesignTool for FixtureTransport {
    fn list_comments(&self, project_id: &str) -> Result<Vec<DesignCommentRecord>, TransportError> {
        self.ensure_root()?;
        let dir = self.project_dir(project_id)?;
        if !dir.is_dir() {
            return Err(TransportError::ProjectNotFound(project_id.to_string()));
        }
        let file = dir.join("comments.json");
        match Self::read_json(&file)? {
            Some(values) => Self::decode(&file, values),
            None => Ok(Vec::new()),
        }
    }

    fn frame_image(
        &self,
        project_id: &str,
        frame_id: &str,
    ) -> Result<Option<RgbaImage>, TransportError> {
        safe_segments("frame id", frame_id)?;
        let path = self.project_dir(project_id)?.join("frames").join(format!("{frame_id}.png"));
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(io_err(&path, e)),
        };
        let img = image::load_from_memory(&bytes).map_err(|e| TransportError::Malformed {
            record: path.display().to_string(),
            message: e.to_string(),
        })?;
        Ok(Some(img.to_rgba8()))
    }
}

impl CodeHost for FixtureTransport {
    fn list_pr_comments(&self, repo: &str, pr_number: u64) -> Result<Vec<PrComment>, TransportError> {
        self.ensure_root()?;
        let dir = self.pr_dir(repo, pr_number)?;
        if !dir.is_dir() {
            return Err(TransportError::PrNotFound {
                repo: repo.to_string(),
                pr_number,
            });
        }
        let file = dir.join("comments.json");
        match Self::read_json(&file)? {
            Some(values) => Self::decode(&file, values),
            None => Ok(Vec::new()),
        }
    }

    fn create_pr_comment(
        &self,
        repo: &str,
        pr_number: u64,
        body: &str,
    ) -> Result<String, TransportError> {
        let mut comments = self.list_pr_comments(repo, pr_number)?;
        let next = comments
            .iter()
            .filter_map(|c| c.id.parse::<u64>().ok())
            .max()
            .unwrap_or(0)
            + 1;
        let id = next.to_string();
        comments.push(PrComment {
            id: id.clone(),
            body: body.to_string(),
            author: "inspect-bridge".to_string(),
            created_at: (self.clock)(),
            path: None,
        });
        self.write_pr_comments(repo, pr_number, &comments)?;
        Ok(id)
    }

    fn image_link(&self, _repo: &str, _ref_name: &str, path: &str) -> String {
        path.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    #[test]
    fn missing_root_is_unreachable() {
        let t = FixtureTransport::new("/definitely/not/here");
        assert!(matches!(t.list_comments("p"), Err(TransportError::Unreachable(_))));
        assert!(matches!(t.list_pr_comments("r", 1), Err(TransportError::Unreachable(_))));
    }

    #[test]
    fn pr_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let at = Utc.with_ymd_and_hms(2022, 6, 1, 0, 0, 0).unwrap();
        let t = FixtureTransport::new(dir.path()).with_clock(move || at);
        assert!(matches!(
            t.create_pr_comment("team/app", 999, "x"),
            Err(TransportError::PrNotFound { pr_number: 999, .. })
        ));
        assert_eq!(TransportError::PrNotFound { repo: "r".into(), pr_number: 1 }.to_string(), "PR not found");
        t.create_pr("team/app", 7).unwrap();
        assert!(t.list_pr_comments("team/app", 7).unwrap().is_empty());
        assert_eq!(t.create_pr_comment("team/app", 7, "a").unwrap(), "1");
        assert_eq!(t.create_pr_comment("team/app", 7, "b").unwrap(), "2");
        let all = t.list_pr_comments("team/app", 7).unwrap();
        assert_eq!(all.len(), 2);
        assert_eq!(all[1].body, "b");
        assert_eq!(all[1].created_at, at);
    }

    #[test]
    fn malformed_record_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("project/p");
        fs::create_dir_all(&p).unwrap();
        fs::write(p.join("comments.json"), r#"[{"remote_id":"a"}]"#).unwrap();
        let t = FixtureTransport::new(dir.path());
        match t.list_comments("p") {
            Err(TransportError::Malformed { record, .. }) => assert!(record.ends_with("[0]")),
            other => panic!("{other:?}"),
        }
        assert!(matches!(t.list_comments("q"), Err(TransportError::ProjectNotFound(_))));
        assert!(t.list_comments("../p").is_err());
    }
}
