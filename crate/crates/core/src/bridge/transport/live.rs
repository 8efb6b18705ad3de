//! HTTP clients for the hosted design tool and code host.

use std::time::Duration;

use base64::Engine;
use chrono::{DateTime, Utc};
use image::RgbaImage;
use rand::Rng;
use reqwest::blocking::{Client, RequestBuilder, Response};
use reqwest::StatusCode;
use serde::Deserialize;
use serde_json::{json, Value};

use super::{CodeHost, DesignCommentRecord, DesignTool, PrComment, TransportError};
use crate::bridge::git::{
    check_ref_name, CasOutcome, Commit, EntryMode, GitError, Object, ObjectId, ObjectStore,
    Signature, Tree, TreeEntry,
};

pub const DESIGN_TOKEN_ENV: &str = "BRIDGE_DESIGN_TOKEN";
pub const CODEHOST_TOKEN_ENV: &str = "BRIDGE_CODEHOST_TOKEN";

const USER_AGENT: &str = concat!("inspect-bridge/", env!("CARGO_PKG_VERSION"));

fn client() -> Client {
    Client::builder()
        .user_agent(USER_AGENT)
        .timeout(Duration::from_secs(30))
        .build()
        .expect("static client configuration")
}

fn token(var: &str) -> Result<String, TransportError> {
    std::env::var(var)
        .ok()
        .filter(|t| !t.is_empty())
        .ok_or_else(|| TransportError::Unreachable(format!("{var} is not set")))
}

fn send(req: RequestBuilder) -> Result<Response, TransportError> {
    req.send().map_err(|e| TransportError::Unreachable(e.to_string()))
}

fn malformed(record: &str, e: impl std::fmt::Display) -> TransportError {
    TransportError::Malformed {
        record: record.to_string(),
        message: e.to_string(),
    }
}

fn expect_ok(resp: Response, what: &str) -> Result<Response, TransportError> {
    if resp.status().is_success() {
        Ok(resp)
    } else {
        Err(TransportError::Unreachable(format!("{what}: HTTP {}", resp.status())))
    }
}

/// Design tool REST client. Project ids are file keys.
pub struct DesignToolClient {
    http: Client,
    base: String,
    token: String,
}

impl DesignToolClient {
    pub fn from_env() -> Result<Self, TransportError> {
        Ok(DesignToolClient {
            http: client(),
            base: "https://api.figma.com/v1".to_string(),
            token: token(DESIGN_TOKEN_ENV)?,
        })
    }

    pub fn with_base(mut self, base: impl Into<String>) -> Self {
        self.base = base.into();
        self
    }

    fn get(&self, path: &str) -> RequestBuilder {
        self.http
            .get(format!("{}{path}", self.base))
            .header("X-Figma-Token", &self.token)
    }
}

#[derive(Deserialize)]
struct FigmaComments {
    comments: Vec<FigmaComment>,
}

#[derive(Deserialize)]
struct FigmaComment {
    id: String,
    message: String,
    created_at: DateTime<Utc>,
    #[serde(default)]
    parent_id: Option<String>,
    #[serde(default)]
    client_meta: Option<Value>,
}

impl DesignTool for DesignToolClient {
    fn list_comments(&self, project_id: &str) -> Result<Vec<DesignCommentRecord>, TransportError> {
        let resp = send(self.get(&format!("/files/{project_id}/comments")))?;
        if resp.status() == StatusCode::NOT_FOUND {
            return Err(TransportError::ProjectNotFound(project_id.to_string()));
        }
        let body: FigmaComments = expect_ok(resp, "comments")?
            .json()
            .map_err(|e| malformed("comments", e))?;
        let parents: std::collections::HashMap<String, (String, f64, f64)> = body
            .comments
            .iter()
            .filter_map(|c| Some((c.id.clone(), anchor(c.client_meta.as_ref()?)?)))
            .collect();
        body.comments
            .into_iter()
            .map(|c| {
                let parent = c.parent_id.filter(|p| !p.is_empty());
                // replies carry no anchor of their own; they sit on the parent's pin
                let (frame_id, x, y) = c
                    .client_meta
                    .as_ref()
                    .and_then(anchor)
                    .or_else(|| parent.as_ref().and_then(|p| parents.get(p).cloned()))
                    .ok_or_else(|| malformed(&format!("comment {}", c.id), "no frame anchor"))?;
                Ok(DesignCommentRecord {
                    remote_id: c.id,
                    frame_id,
                    x,
                    y,
                    body: c.message,
                    created_at: c.created_at,
                    parent_remote_id: parent,
                })
            })
            .collect()
    }

    fn frame_image(
        &self,
        project_id: &str,
        frame_id: &str,
    ) -> Result<Option<RgbaImage>, TransportError> {
        let resp = send(
            self.get(&format!(
                "/images/{project_id}?{}",
                url::form_urlencoded::Serializer::new(String::new())
                    .append_pair("ids", frame_id)
                    .append_pair("format", "png")
                    .finish()
            )),
        )?;
        let body: Value = expect_ok(resp, "images")?
            .json()
            .map_err(|e| malformed("images", e))?;
        let Some(url) = body["images"][frame_id].as_str() else {
            return Ok(None);
        };
        let bytes = expect_ok(send(self.http.get(url))?, "frame download")?
            .bytes()
            .map_err(|e| TransportError::Unreachable(e.to_string()))?;
        let img = image::load_from_memory(&bytes).map_err(|e| malformed(frame_id, e))?;
        Ok(Some(img.to_rgba8()))
    }
}

/// Frame id and offset from a comment's `client_meta`.
fn anchor(meta: &Value) -> Option<(String, f64, f64)> {
    let node = meta["node_id"].as_str()?;
    let off = &meta["node_offset"];
    Some((node.to_string(), off["x"].as_f64()?, off["y"].as_f64()?))
}

/// Code host REST client. Also serves as the image object store for one
/// repository through [`CodeHostClient::object_store`].
#[derive(Clone)]
pub struct CodeHostClient {
    http: Client,
    base: String,
    token: String,
}

impl CodeHostClient {
    pub fn from_env() -> Result<Self, TransportError> {
        Ok(CodeHostClient {
            http: client(),
            base: "https://api.github.com".to_string(),
            token: token(CODEHOST_TOKEN_ENV)?,
        })
    }

    pub fn with_base(mut self, base: impl Into<String>) -> Self {
        self.base = base.into();
        self
    }

    fn req(&self, method: reqwest::Method, path: &str) -> RequestBuilder {
        self.http
            .request(method, format!("{}{path}", self.base))
            .bearer_auth(&self.token)
            .header("Accept", "application/vnd.github+json")
    }

    fn ensure_pr(&self, repo: &str, pr_number: u64) -> Result<(), TransportError> {
        let resp = send(self.req(reqwest::Method::GET, &format!("/repos/{repo}/pulls/{pr_number}")))?;
        if resp.status() == StatusCode::NOT_FOUND {
            return Err(TransportError::PrNotFound {
                repo: repo.to_string(),
                pr_number,
            });
        }
        expect_ok(resp, "pull request").map(drop)
    }

    pub fn object_store(&self, repo: &str) -> RemoteObjectStore {
        RemoteObjectStore {
            client: self.clone(),
            repo: repo.to_string(),
        }
    }
}

#[derive(Deserialize)]
struct IssueComment {
    id: u64,
    #[serde(default)]
    body: Option<String>,
    user: Option<Value>,
    created_at: DateTime<Utc>,
}

impl CodeHost for CodeHostClient {
    fn list_pr_comments(&self, repo: &str, pr_number: u64) -> Result<Vec<PrComment>, TransportError> {
        self.ensure_pr(repo, pr_number)?;
        let mut out = Vec::new();
        for page in 1.. {
            let resp = send(
                self.req(
                    reqwest::Method::GET,
                    &format!("/repos/{repo}/issues/{pr_number}/comments?per_page=100&page={page}"),
                ),
            )?;
            let batch: Vec<IssueComment> = expect_ok(resp, "comments")?
                .json()
                .map_err(|e| malformed("comments", e))?;
            let done = batch.len() < 100;
            out.extend(batch.into_iter().map(|c| PrComment {
                id: c.id.to_string(),
                body: c.body.unwrap_or_default(),
                author: c
                    .user
                    .and_then(|u| u["login"].as_str().map(String::from))
                    .unwrap_or_default(),
                created_at: c.created_at,
                path: None,
            }));
            if done {
                break;
            }
        }
        Ok(out)
    }

    fn create_pr_comment(
        &self,
        repo: &str,
        pr_number: u64,
        body: &str,
    ) -> Result<String, TransportError> {
        let resp = send(
            self.req(reqwest::Method::POST, &format!("/repos/{repo}/issues/{pr_number}/comments"))
                .json(&json!({ "body": body })),
        )?;
        if resp.status() == StatusCode::NOT_FOUND {
            return Err(TransportError::PrNotFound {
                repo: repo.to_string(),
                pr_number,
            });
        }
        let v: Value = expect_ok(resp, "post comment")?
            .json()
            .map_err(|e| malformed("post comment", e))?;
        v["id"]
            .as_u64()
            .map(|id| id.to_string())
            .ok_or_else(|| malformed("post comment", "response has no id"))
    }

    fn image_link(&self, repo: &str, ref_name: &str, path: &str) -> String {
        let branch = ref_name.strip_prefix("refs/heads/").unwrap_or(ref_name);
        format!("https://github.com/{repo}/blob/{branch}/{path}?raw=true")
    }
}

/// The Git data API of one repository, exposed as an [`ObjectStore`].
///
/// Ref updates use a non-forced update, which the server rejects unless the
/// new commit descends from the current head. That is the closest the API
/// gets to compare-and-swap.
pub struct RemoteObjectStore {
    client: CodeHostClient,
    repo: String,
}

fn git_err(e: TransportError) -> GitError {
    GitError::Transport(e.to_string())
}

impl RemoteObjectStore {
    fn call(
        &self,
        method: reqwest::Method,
        path: &str,
        body: Option<Value>,
    ) -> Result<(StatusCode, Value), GitError> {
        let mut req = self.client.req(method, &format!("/repos/{}/git{path}", self.repo));
        if let Some(b) = body {
            req = req.json(&b);
        }
        let resp = send(req).map_err(git_err)?;
        let status = resp.status();
        let v = resp.json::<Value>().unwrap_or(Value::Null);
        Ok((status, v))
    }

    fn created_id(&self, path: &str, body: Value, expect: ObjectId) -> Result<ObjectId, GitError> {
        let (status, v) = self.call(reqwest::Method::POST, path, Some(body))?;
        if !status.is_success() {
            return Err(GitError::Rejected(format!("{path}: HTTP {status}")));
        }
        let id: ObjectId = v["sha"]
            .as_str()
            .ok_or_else(|| GitError::Corrupt("response has no sha".into()))?
            .parse()?;
        if id != expect {
            return Err(GitError::Corrupt(format!("server stored {id}, expected {expect}")));
        }
        Ok(id)
    }
}

fn sig_json(s: &Signature) -> Value {
    json!({ "name": s.name, "email": s.email, "date": s.when.to_rfc3339() })
}

fn sig_from(v: &Value) -> Result<Signature, GitError> {
    let when = v["date"]
        .as_str()
        .and_then(|d| DateTime::parse_from_rfc3339(d).ok())
        .ok_or_else(|| GitError::Corrupt("bad signature date".into()))?;
    Ok(Signature {
        name: v["name"].as_str().unwrap_or_default().to_string(),
        email: v["email"].as_str().unwrap_or_default().to_string(),
        when: when.with_timezone(&Utc),
    })
}

impl ObjectStore for RemoteObjectStore {
    fn put(&self, object: &Object) -> Result<ObjectId, GitError> {
        let expect = object.id();
        match object {
            Object::Blob(bytes) => self.created_id(
                "/blobs",
                json!({
                    "content": base64::engine::general_purpose::STANDARD.encode(bytes),
                    "encoding": "base64",
                }),
                expect,
            ),
            Object::Tree(tree) => {
                let entries: Vec<Value> = tree
                    .entries()
                    .iter()
                    .map(|e| {
                        let (mode, kind) = match e.mode {
                            EntryMode::File => ("100644", "blob"),
                            EntryMode::Tree => ("040000", "tree"),
                        };
                        json!({ "path": e.name, "mode": mode, "type": kind, "sha": e.id.to_hex() })
                    })
                    .collect();
                self.created_id("/trees", json!({ "tree": entries }), expect)
            }
            Object::Commit(c) => self.created_id(
                "/commits",
                json!({
                    "message": c.message,
                    "tree": c.tree.to_hex(),
                    "parents": c.parents.iter().map(|p| p.to_hex()).collect::<Vec<_>>(),
                    "author": sig_json(&c.author),
                    "committer": sig_json(&c.committer),
                }),
                expect,
            ),
        }
    }

    fn get(&self, id: &ObjectId) -> Result<Object, GitError> {
        let hex = id.to_hex();
        // the API has no kind-agnostic lookup, so try each kind in turn
        let (status, v) = self.call(reqwest::Method::GET, &format!("/commits/{hex}"), None)?;
        if status.is_success() {
            let parents = v["parents"]
                .as_array()
                .into_iter()
                .flatten()
                .map(|p| p["sha"].as_str().unwrap_or_default().parse())
                .collect::<Result<Vec<ObjectId>, _>>()?;
            return Ok(Object::Commit(Commit {
                tree: v["tree"]["sha"].as_str().unwrap_or_default().parse()?,
                parents,
                author: sig_from(&v["author"])?,
                committer: sig_from(&v["committer"])?,
                message: v["message"].as_str().unwrap_or_default().to_string(),
            }));
        }
        let (status, v) = self.call(reqwest::Method::GET, &format!("/trees/{hex}"), None)?;
        if status.is_success() {
            let mut entries = Vec::new();
            for e in v["tree"].as_array().into_iter().flatten() {
                let mode = match e["mode"].as_str() {
                    Some("100644") => EntryMode::File,
                    Some("040000") | Some("40000") => EntryMode::Tree,
                    other => return Err(GitError::Corrupt(format!("unsupported mode {other:?}"))),
                };
                entries.push(TreeEntry {
                    name: e["path"].as_str().unwrap_or_default().to_string(),
                    mode,
                    id: e["sha"].as_str().unwrap_or_default().parse()?,
                });
            }
            return Ok(Object::Tree(Tree::new(entries)));
        }
        let (status, v) = self.call(reqwest::Method::GET, &format!("/blobs/{hex}"), None)?;
        if status.is_success() {
            let content: String = v["content"]
                .as_str()
                .unwrap_or_default()
                .chars()
                .filter(|c| !c.is_whitespace())
                .collect();
            let bytes = base64::engine::general_purpose::STANDARD
                .decode(content)
                .map_err(|e| GitError::Corrupt(e.to_string()))?;
            return Ok(Object::Blob(bytes));
        }
        Err(GitError::Missing(*id))
    }

    fn read_ref(&self, name: &str) -> Result<Option<ObjectId>, GitError> {
        check_ref_name(name)?;
        let short = name.strip_prefix("refs/").unwrap_or(name);
        let (status, v) = self.call(reqwest::Method::GET, &format!("/ref/{short}"), None)?;
        if status == StatusCode::NOT_FOUND {
            return Ok(None);
        }
        if !status.is_success() {
            return Err(GitError::Transport(format!("read ref: HTTP {status}")));
        }
        v["object"]["sha"]
            .as_str()
            .ok_or_else(|| GitError::Corrupt("ref has no target".into()))?
            .parse()
            .map(Some)
    }

    fn compare_and_swap_ref(
        &self,
        name: &str,
        expected: Option<ObjectId>,
        new: ObjectId,
    ) -> Result<CasOutcome, GitError> {
        check_ref_name(name)?;
        let actual = self.read_ref(name)?;
        if actual != expected {
            return Ok(CasOutcome::Conflict { actual });
        }
        let short = name.strip_prefix("refs/").unwrap_or(name);
        let (status, _) = match expected {
            None => self.call(
                reqwest::Method::POST,
                "/refs",
                Some(json!({ "ref": name, "sha": new.to_hex() })),
            )?,
            Some(_) => self.call(
                reqwest::Method::PATCH,
                &format!("/refs/{short}"),
                Some(json!({ "sha": new.to_hex(), "force": false })),
            )?,
        };
        if status.is_success() {
            Ok(CasOutcome::Swapped)
        } else if status == StatusCode::UNPROCESSABLE_ENTITY || status == StatusCode::CONFLICT {
            Ok(CasOutcome::Conflict {
                actual: self.read_ref(name)?,
            })
        } else {
            Err(GitError::Transport(format!("update ref: HTTP {status}")))
        }
    }

    fn retry_delay(&self, attempt: u32) -> Duration {
        let base = 250u64 << attempt.min(4);
        let jitter = rand::rng().random_range(0..base);
        Duration::from_millis(base + jitter)
    }
}
