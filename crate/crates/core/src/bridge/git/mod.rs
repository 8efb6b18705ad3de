//! Content-addressed object storage with compare-and-swap refs, and the
//! image publishing sequence built on it: read ref, read head commit, create
//! blob, create tree, create commit, swap ref.

mod dir;
mod memory;
mod object;

use std::time::Duration;

use thiserror::Error;

pub use dir::DirStore;
pub use memory::MemoryStore;
pub use object::{
    Commit, EntryMode, Object, ObjectId, ObjectKind, Signature, Tree, TreeEntry,
};

pub const DEFAULT_IMAGE_REF: &str = "refs/heads/inspection-images";

/// Retries after the first failed compare-and-swap.
pub const MAX_CAS_RETRIES: u32 = 3;

#[derive(Debug, Error)]
pub enum GitError {
    #[error("object {0} not found")]
    Missing(ObjectId),
    #[error("object {id} is a {found}, expected a {expected}")]
    WrongKind {
        id: ObjectId,
        expected: &'static str,
        found: &'static str,
    },
    #[error("store rejected object: {0}")]
    Rejected(String),
    #[error("corrupt object: {0}")]
    Corrupt(String),
    #[error("invalid ref name `{0}`")]
    InvalidRef(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("transport: {0}")]
    Transport(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CasOutcome {
    Swapped,
    Conflict { actual: Option<ObjectId> },
}

/// Storage for blobs, trees and commits plus named refs.
///
/// Implementations must reject trees and commits that point at objects they
/// do not hold, and must apply ref updates atomically.
pub trait ObjectStore: Send + Sync {
    fn put(&self, object: &Object) -> Result<ObjectId, GitError>;
    fn get(&self, id: &ObjectId) -> Result<Object, GitError>;
    fn read_ref(&self, name: &str) -> Result<Option<ObjectId>, GitError>;
    /// Points `name` at `new` iff it currently equals `expected` (`None`
    /// meaning the ref does not exist yet).
    fn compare_and_swap_ref(
        &self,
        name: &str,
        expected: Option<ObjectId>,
        new: ObjectId,
    ) -> Result<CasOutcome, GitError>;

    /// Delay before retry `attempt` (1-based) after a conflict.
    fn retry_delay(&self, _attempt: u32) -> Duration {
        Duration::ZERO
    }

    fn get_commit(&self, id: &ObjectId) -> Result<Commit, GitError> {
        match self.get(id)? {
            Object::Commit(c) => Ok(c),
            other => Err(wrong_kind(id, ObjectKind::Commit, &other)),
        }
    }

    fn get_tree(&self, id: &ObjectId) -> Result<Tree, GitError> {
        match self.get(id)? {
            Object::Tree(t) => Ok(t),
            other => Err(wrong_kind(id, ObjectKind::Tree, &other)),
        }
    }

    fn get_blob(&self, id: &ObjectId) -> Result<Vec<u8>, GitError> {
        match self.get(id)? {
            Object::Blob(b) => Ok(b),
            other => Err(wrong_kind(id, ObjectKind::Blob, &other)),
        }
    }
}

fn wrong_kind(id: &ObjectId, expected: ObjectKind, found: &Object) -> GitError {
    GitError::WrongKind {
        id: *id,
        expected: expected.name(),
        found: found.kind().name(),
    }
}

pub(crate) fn check_ref_name(name: &str) -> Result<(), GitError> {
    let ok = name.starts_with("refs/")
        && name
            .split('/')
            .all(|c| !c.is_empty() && c != "." && c != ".." && !c.ends_with(".lock"))
        && !name.contains(['\\', ' ', ':', '?', '*', '[', '~', '^']);
    if ok {
        Ok(())
    } else {
        Err(GitError::InvalidRef(name.to_string()))
    }
}

/// Checks that everything an object references is already stored.
pub(crate) fn check_links(
    object: &Object,
    has: impl Fn(&ObjectId) -> Option<ObjectKind>,
) -> Result<(), GitError> {
    let require = |id: &ObjectId, kind: ObjectKind, what: &str| match has(id) {
        Some(k) if k == kind => Ok(()),
        Some(k) => Err(GitError::Rejected(format!(
            "{what} {id} is a {}, expected a {}",
            k.name(),
            kind.name()
        ))),
        None => Err(GitError::Rejected(format!("{what} {id} does not exist"))),
    };
    match object {
        Object::Blob(_) => Ok(()),
        Object::Tree(t) => t.entries().iter().try_for_each(|e| {
            let kind = match e.mode {
                EntryMode::File => ObjectKind::Blob,
                EntryMode::Tree => ObjectKind::Tree,
            };
            require(&e.id, kind, "tree entry")
        }),
        Object::Commit(c) => {
            require(&c.tree, ObjectKind::Tree, "commit tree")?;
            c.parents
                .iter()
                .try_for_each(|p| require(p, ObjectKind::Commit, "parent"))
        }
    }
}

#[derive(Debug, Error)]
pub enum PublishError {
    #[error("empty or invalid image path `{0}`")]
    InvalidPath(String),
    #[error("ref `{ref_name}` kept moving; gave up after {attempts} attempts")]
    CasExhausted { ref_name: String, attempts: u32 },
    #[error(transparent)]
    Git(#[from] GitError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Published {
    pub commit: ObjectId,
    pub blob: ObjectId,
    pub attempts: u32,
}

fn split_path(path: &str) -> Result<Vec<&str>, PublishError> {
    let parts: Vec<&str> = path.split('/').collect();
    let bad = parts
        .iter()
        .any(|p| p.is_empty() || *p == "." || *p == ".." || p.contains('\0'));
    if path.is_empty() || bad {
        Err(PublishError::InvalidPath(path.to_string()))
    } else {
        Ok(parts)
    }
}

/// Writes a copy of `base` (or an empty tree) with `path` pointing at `blob`,
/// creating intermediate trees as needed. Returns the new root tree id.
fn upsert_path(
    store: &dyn ObjectStore,
    base: Option<ObjectId>,
    path: &[&str],
    blob: ObjectId,
) -> Result<ObjectId, GitError> {
    let mut tree = match base {
        Some(id) => store.get_tree(&id)?,
        None => Tree::default(),
    };
    let (name, rest) = path.split_first().expect("path has at least one component");
    let entry = if rest.is_empty() {
        TreeEntry {
            name: name.to_string(),
            mode: EntryMode::File,
            id: blob,
        }
    } else {
        let sub = tree
            .get(name)
            .filter(|e| e.mode == EntryMode::Tree)
            .map(|e| e.id);
        TreeEntry {
            name: name.to_string(),
            mode: EntryMode::Tree,
            id: upsert_path(store, sub, rest, blob)?,
        }
    };
    tree.upsert(entry);
    store.put(&Object::Tree(tree))
}

/// Commits `bytes` at `path` on top of `ref_name`, retrying on concurrent ref
/// movement up to [`MAX_CAS_RETRIES`] times. A missing ref is treated as
/// empty history and created.
pub fn publish_image(
    store: &dyn ObjectStore,
    ref_name: &str,
    path: &str,
    bytes: &[u8],
    message: &str,
    signature: &Signature,
) -> Result<Published, PublishError> {
    let parts = split_path(path)?;
    check_ref_name(ref_name)?;
    let mut attempts = 0;
    loop {
        attempts += 1;
        let head = store.read_ref(ref_name)?;
        let base_tree = match head {
            Some(id) => Some(store.get_commit(&id)?.tree),
            None => None,
        };
        let blob = store.put(&Object::Blob(bytes.to_vec()))?;
        let tree = upsert_path(store, base_tree, &parts, blob)?;
        let commit = store.put(&Object::Commit(Commit {
            tree,
            parents: head.into_iter().collect(),
            author: signature.clone(),
            committer: signature.clone(),
            message: message.to_string(),
        }))?;
        match store.compare_and_swap_ref(ref_name, head, commit)? {
            CasOutcome::Swapped => {
                return Ok(Published {
                    commit,
                    blob,
                    attempts,
                })
            }
            CasOutcome::Conflict { .. } if attempts <= MAX_CAS_RETRIES => {
                log::debug!("ref {ref_name} moved during publish; retry {attempts}");
                std::thread::sleep(store.retry_delay(attempts));
            }
            CasOutcome::Conflict { .. } => {
                return Err(PublishError::CasExhausted {
                    ref_name: ref_name.to_string(),
                    attempts,
                })
            }
        }
    }
}

/// Commit ids reachable from `ref_name` by first parents, newest first.
pub fn history(store: &dyn ObjectStore, ref_name: &str) -> Result<Vec<ObjectId>, GitError> {
    let mut out = Vec::new();
    let mut next = store.read_ref(ref_name)?;
    while let Some(id) = next {
        let c = store.get_commit(&id)?;
        out.push(id);
        next = c.parents.first().copied();
    }
    Ok(out)
}

/// Looks up the blob stored at `path` in the tree of `commit`.
pub fn read_path_at(
    store: &dyn ObjectStore,
    commit: &ObjectId,
    path: &str,
) -> Result<Option<Vec<u8>>, GitError> {
    let mut tree = store.get_tree(&store.get_commit(commit)?.tree)?;
    let parts: Vec<&str> = path.split('/').collect();
    for (i, name) in parts.iter().enumerate() {
        let Some(entry) = tree.get(name).cloned() else {
            return Ok(None);
        };
        let last = i + 1 == parts.len();
        match (entry.mode, last) {
            (EntryMode::File, true) => return store.get_blob(&entry.id).map(Some),
            (EntryMode::Tree, false) => tree = store.get_tree(&entry.id)?,
            _ => return Ok(None),
        }
    }
    Ok(None)
}

/// Looks up `path` at the head of `ref_name`.
pub fn read_path(
    store: &dyn ObjectStore,
    ref_name: &str,
    path: &str,
) -> Result<Option<Vec<u8>>, GitError> {
    match store.read_ref(ref_name)? {
        Some(head) => read_path_at(store, &head, path),
        None => Ok(None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};
    use sha1::{Digest, Sha1};

    fn sig() -> Signature {
        Signature {
            name: "publisher".into(),
            email: "publisher@example.invalid".into(),
            when: Utc.timestamp_opt(1_660_000_000, 0).unwrap(),
        }
    }

    // independent of the object module: hash the header and bytes directly
    fn oracle_blob_id(bytes: &[u8]) -> String {
        let mut h = Sha1::new();
        h.update(format!("blob {}\0", bytes.len()).as_bytes());
        h.update(bytes);
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    #[test]
    fn first_publish_creates_ref() {
        let store = MemoryStore::new();
        let bytes = b"\x89PNG fake".to_vec();
        let p = publish_image(&store, DEFAULT_IMAGE_REF, "images/pr7/c1.png", &bytes, "add", &sig())
            .unwrap();
        assert_eq!(p.blob.to_hex(), oracle_blob_id(&bytes));
        assert_eq!(store.read_ref(DEFAULT_IMAGE_REF).unwrap(), Some(p.commit));
        let head = store.get_commit(&p.commit).unwrap();
        assert!(head.parents.is_empty());
        let root = store.get_tree(&head.tree).unwrap();
        assert_eq!(root.entries().len(), 1);
        let images = store.get_tree(&root.get("images").unwrap().id).unwrap();
        let pr7 = store.get_tree(&images.get("pr7").unwrap().id).unwrap();
        assert_eq!(pr7.get("c1.png").unwrap().id.to_hex(), oracle_blob_id(&bytes));
        assert_eq!(
            read_path(&store, DEFAULT_IMAGE_REF, "images/pr7/c1.png").unwrap(),
            Some(bytes)
        );
    }

    #[test]
    fn same_bytes_share_blob() {
        let store = MemoryStore::new();
        let a = publish_image(&store, DEFAULT_IMAGE_REF, "a/x.png", b"same", "1", &sig()).unwrap();
        let b = publish_image(&store, DEFAULT_IMAGE_REF, "b/y.png", b"same", "2", &sig()).unwrap();
        assert_eq!(a.blob, b.blob);
        let commit = store.get_commit(&b.commit).unwrap();
        assert_eq!(commit.parents, vec![a.commit]);
        assert!(read_path(&store, DEFAULT_IMAGE_REF, "a/x.png").unwrap().is_some());
        assert_eq!(history(&store, DEFAULT_IMAGE_REF).unwrap(), vec![b.commit, a.commit]);
    }

    #[test]
    fn overwrite_keeps_siblings() {
        let store = MemoryStore::new();
        publish_image(&store, DEFAULT_IMAGE_REF, "d/a.png", b"1", "m", &sig()).unwrap();
        publish_image(&store, DEFAULT_IMAGE_REF, "d/b.png", b"2", "m", &sig()).unwrap();
        publish_image(&store, DEFAULT_IMAGE_REF, "d/a.png", b"3", "m", &sig()).unwrap();
        assert_eq!(read_path(&store, DEFAULT_IMAGE_REF, "d/a.png").unwrap().unwrap(), b"3");
        assert_eq!(read_path(&store, DEFAULT_IMAGE_REF, "d/b.png").unwrap().unwrap(), b"2");
        assert_eq!(read_path(&store, DEFAULT_IMAGE_REF, "d").unwrap(), None);
        assert_eq!(read_path(&store, DEFAULT_IMAGE_REF, "d/a.png/x").unwrap(), None);
    }

    #[test]
    fn invalid_paths() {
        let store = MemoryStore::new();
        for p in ["", "/a", "a//b", "a/../b", "a/"] {
            assert!(matches!(
                publish_image(&store, DEFAULT_IMAGE_REF, p, b"x", "m", &sig()),
                Err(PublishError::InvalidPath(_))
            ));
        }
        assert!(publish_image(&store, "heads/x", "a", b"x", "m", &sig()).is_err());
    }

    #[test]
    fn injected_conflict_retries_and_keeps_both() {
        let store = MemoryStore::new();
        let mut fired = false;
        store.set_before_cas(move |s, name| {
            if !fired {
                fired = true;
                publish_image(s, name, "other/z.png", b"concurrent", "other", &sig()).unwrap();
            }
        });
        let p = publish_image(&store, DEFAULT_IMAGE_REF, "mine/a.png", b"mine", "mine", &sig())
            .unwrap();
        assert_eq!(p.attempts, 2);
        let log = history(&store, DEFAULT_IMAGE_REF).unwrap();
        assert_eq!(log.len(), 2);
        assert!(read_path(&store, DEFAULT_IMAGE_REF, "other/z.png").unwrap().is_some());
        assert!(read_path(&store, DEFAULT_IMAGE_REF, "mine/a.png").unwrap().is_some());
    }

    #[test]
    fn persistent_conflict_exhausts() {
        let store = MemoryStore::new();
        let mut n = 0u32;
        store.set_before_cas(move |s, name| {
            n += 1;
            publish_image(s, name, &format!("noise/{n}.png"), b"n", "noise", &sig()).unwrap();
        });
        let err = publish_image(&store, DEFAULT_IMAGE_REF, "a.png", b"a", "m", &sig()).unwrap_err();
        assert!(matches!(err, PublishError::CasExhausted { attempts: 4, .. }));
        assert_eq!(history(&store, DEFAULT_IMAGE_REF).unwrap().len(), 4);
    }
}
