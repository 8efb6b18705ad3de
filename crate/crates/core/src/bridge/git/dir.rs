use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{
    check_links, check_ref_name, object::hash_encoded, CasOutcome, GitError, Object, ObjectId,
    ObjectKind, ObjectStore,
};

/// Filesystem store: `objects/<2 hex>/<38 hex>` hold encoded objects
/// (uncompressed), `refs/...` files hold a hex id. Ref swaps are serialized
/// with an advisory lock on `refs.lock`.
#[derive(Debug, Clone)]
pub struct DirStore {
    root: PathBuf,
}

impl DirStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, GitError> {
        let root = root.into();
        fs::create_dir_all(root.join("objects"))?;
        Ok(DirStore { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn object_path(&self, id: &ObjectId) -> PathBuf {
        let hex = id.to_hex();
        self.root.join("objects").join(&hex[..2]).join(&hex[2..])
    }

    fn ref_path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn kind_of(&self, id: &ObjectId) -> Option<ObjectKind> {
        let bytes = fs::read(self.object_path(id)).ok()?;
        Object::decode(&bytes).ok().map(|o| o.kind())
    }

    fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), GitError> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)?;
        Ok(())
    }
}

impl ObjectStore for DirStore {
    fn put(&self, object: &Object) -> Result<ObjectId, GitError> {
        check_links(object, |id| self.kind_of(id))?;
        let bytes = object.encode();
        let id = hash_encoded(&bytes);
        let path = self.object_path(&id);
        if !path.exists() {
            Self::write_atomic(&path, &bytes)?;
        }
        Ok(id)
    }

    fn get(&self, id: &ObjectId) -> Result<Object, GitError> {
        let bytes = match fs::read(self.object_path(id)) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(GitError::Missing(*id)),
            Err(e) => return Err(e.into()),
        };
        if hash_encoded(&bytes) != *id {
            return Err(GitError::Corrupt(format!("object {id} does not match its digest")));
        }
        Object::decode(&bytes)
    }

    fn read_ref(&self, name: &str) -> Result<Option<ObjectId>, GitError> {
        check_ref_name(name)?;
        match fs::read_to_string(self.ref_path(name)) {
            Ok(s) => s.trim().parse().map(Some),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    fn compare_and_swap_ref(
        &self,
        name: &str,
        expected: Option<ObjectId>,
        new: ObjectId,
    ) -> Result<CasOutcome, GitError> {
        check_ref_name(name)?;
        if self.kind_of(&new) != Some(ObjectKind::Commit) {
            return Err(GitError::Rejected(format!("ref target {new} is not a stored commit")));
        }
        let lock = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(self.root.join("refs.lock"))?;
        lock.lock()?;
        let actual = self.read_ref(name)?;
        let outcome = if actual != expected {
            CasOutcome::Conflict { actual }
        } else {
            Self::write_atomic(&self.ref_path(name), format!("{new}\n").as_bytes())?;
            CasOutcome::Swapped
        };
        lock.unlock()?;
        Ok(outcome)
    }
}
