use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;

use super::{check_links, check_ref_name, CasOutcome, GitError, Object, ObjectId, ObjectKind, ObjectStore};

type Interceptor = Box<dyn FnMut(&MemoryStore, &str) + Send>;

#[derive(Default)]
struct Inner {
    objects: HashMap<ObjectId, Vec<u8>>,
    refs: BTreeMap<String, ObjectId>,
}

/// In-memory store with linearizable ref updates.
///
/// A hook installed with [`MemoryStore::set_before_cas`] runs before every
/// compare-and-swap, letting tests move the ref between a writer's read and
/// its swap. The hook is disarmed while it runs, so it may publish through
/// the same store.
#[derive(Default)]
pub struct MemoryStore {
    inner: Mutex<Inner>,
    before_cas: Mutex<Option<Interceptor>>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_before_cas(&self, hook: impl FnMut(&MemoryStore, &str) + Send + 'static) {
        *self.before_cas.lock().unwrap() = Some(Box::new(hook));
    }

    pub fn clear_before_cas(&self) {
        *self.before_cas.lock().unwrap() = None;
    }

    pub fn object_count(&self) -> usize {
        self.inner.lock().unwrap().objects.len()
    }

    /// Raw encoded bytes of an object, header included.
    pub fn raw(&self, id: &ObjectId) -> Option<Vec<u8>> {
        self.inner.lock().unwrap().objects.get(id).cloned()
    }

    pub fn refs(&self) -> BTreeMap<String, ObjectId> {
        self.inner.lock().unwrap().refs.clone()
    }

    fn kind_of(objects: &HashMap<ObjectId, Vec<u8>>, id: &ObjectId) -> Option<ObjectKind> {
        let bytes = objects.get(id)?;
        let kind = bytes.split(|b| *b == b' ').next()?;
        match kind {
            b"blob" => Some(ObjectKind::Blob),
            b"tree" => Some(ObjectKind::Tree),
            b"commit" => Some(ObjectKind::Commit),
            _ => None,
        }
    }
}

impl ObjectStore for MemoryStore {
    fn put(&self, object: &Object) -> Result<ObjectId, GitError> {
        let mut inner = self.inner.lock().unwrap();
        check_links(object, |id| Self::kind_of(&inner.objects, id))?;
        let bytes = object.encode();
        let id = super::object::hash_encoded(&bytes);
        inner.objects.entry(id).or_insert(bytes);
        Ok(id)
    }

    fn get(&self, id: &ObjectId) -> Result<Object, GitError> {
        let inner = self.inner.lock().unwrap();
        let bytes = inner.objects.get(id).ok_or(GitError::Missing(*id))?;
        Object::decode(bytes)
    }

    fn read_ref(&self, name: &str) -> Result<Option<ObjectId>, GitError> {
        check_ref_name(name)?;
        Ok(self.inner.lock().unwrap().refs.get(name).copied())
    }

    fn compare_and_swap_ref(
        &self,
        name: &str,
        expected: Option<ObjectId>,
        new: ObjectId,
    ) -> Result<CasOutcome, GitError> {
        check_ref_name(name)?;
        let hook = self.before_cas.lock().unwrap().take();
        if let Some(mut hook) = hook {
            hook(self, name);
            let mut slot = self.before_cas.lock().unwrap();
            if slot.is_none() {
                *slot = Some(hook);
            }
        }
        let mut inner = self.inner.lock().unwrap();
        if Self::kind_of(&inner.objects, &new) != Some(ObjectKind::Commit) {
            return Err(GitError::Rejected(format!("ref target {new} is not a stored commit")));
        }
        let actual = inner.refs.get(name).copied();
        if actual != expected {
            return Ok(CasOutcome::Conflict { actual });
        }
        inner.refs.insert(name.to_string(), new);
        Ok(CasOutcome::Swapped)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bridge::git::{EntryMode, Tree, TreeEntry};

    #[test]
    fn rejects_dangling_links() {
        let s = MemoryStore::new();
        let ghost = Object::Blob(b"not stored".to_vec()).id();
        let tree = Object::Tree(Tree::new([TreeEntry {
            name: "x".into(),
            mode: EntryMode::File,
            id: ghost,
        }]));
        assert!(matches!(s.put(&tree), Err(GitError::Rejected(_))));
        let blob = s.put(&Object::Blob(b"not stored".to_vec())).unwrap();
        assert_eq!(blob, ghost);
        assert!(s.put(&tree).is_ok());
        // a blob cannot stand in for a subtree
        let wrong = Object::Tree(Tree::new([TreeEntry {
            name: "d".into(),
            mode: EntryMode::Tree,
            id: ghost,
        }]));
        assert!(s.put(&wrong).is_err());
    }

    #[test]
    fn cas_semantics() {
        let s = MemoryStore::new();
        let blob = s.put(&Object::Blob(vec![])).unwrap();
        assert!(s.compare_and_swap_ref("refs/heads/x", None, blob).is_err());
        let tree = s.put(&Object::Tree(Tree::default())).unwrap();
        let sig = crate::bridge::git::Signature {
            name: "n".into(),
            email: "e".into(),
            when: chrono::Utc::now(),
        };
        let c = s
            .put(&Object::Commit(crate::bridge::git::Commit {
                tree,
                parents: vec![],
                author: sig.clone(),
                committer: sig,
                message: String::new(),
            }))
            .unwrap();
        assert_eq!(s.compare_and_swap_ref("refs/heads/x", None, c).unwrap(), CasOutcome::Swapped);
        assert_eq!(
            s.compare_and_swap_ref("refs/heads/x", None, c).unwrap(),
            CasOutcome::Conflict { actual: Some(c) }
        );
        assert_eq!(s.read_ref("refs/heads/x").unwrap(), Some(c));
        assert!(s.read_ref("bad ref").is_err());
    }

    #[test]
    fn idempotent_put() {
        let s = MemoryStore::new();
        let a = s.put(&Object::Blob(b"x".to_vec())).unwrap();
        let b = s.put(&Object::Blob(b"x".to_vec())).unwrap();
        assert_eq!(a, b);
        assert_eq!(s.object_count(), 1);
    }
}
