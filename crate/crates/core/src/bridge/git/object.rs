//! Git object encoding: `<kind> <len>\0<body>` hashed with SHA-1, so ids
//! agree with any Git implementation.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, TimeZone, Utc};
use sha1::{Digest, Sha1};

use super::GitError;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ObjectId(pub [u8; 20]);

impl ObjectId {
    pub fn to_hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ObjectId({})", self.to_hex())
    }
}

impl FromStr for ObjectId {
    type Err = GitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || GitError::Corrupt(format!("invalid object id `{s}`"));
        if s.len() != 40 || !s.is_ascii() {
            return Err(bad());
        }
        let mut out = [0u8; 20];
        for (i, chunk) in s.as_bytes().chunks(2).enumerate() {
            let hex = std::str::from_utf8(chunk).map_err(|_| bad())?;
            out[i] = u8::from_str_radix(hex, 16).map_err(|_| bad())?;
        }
        Ok(ObjectId(out))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectKind {
    Blob,
    Tree,
    Commit,
}

impl ObjectKind {
    pub fn name(self) -> &'static str {
        match self {
            ObjectKind::Blob => "blob",
            ObjectKind::Tree => "tree",
            ObjectKind::Commit => "commit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntryMode {
    File,
    Tree,
}

impl EntryMode {
    pub fn octal(self) -> &'static str {
        match self {
            EntryMode::File => "100644",
            EntryMode::Tree => "40000",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeEntry {
    pub name: String,
    pub mode: EntryMode,
    pub id: ObjectId,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Tree {
    entries: Vec<TreeEntry>,
}

/// Git orders tree entries by name, comparing directories as if their name
/// ended in `/`.
fn sort_key(e: &TreeEntry) -> Vec<u8> {
    let mut k = e.name.as_bytes().to_vec();
    if e.mode == EntryMode::Tree {
        k.push(b'/');
    }
    k
}

impl Tree {
    pub fn new(entries: impl IntoIterator<Item = TreeEntry>) -> Self {
        let mut t = Tree::default();
        for e in entries {
            t.upsert(e);
        }
        t
    }

    pub fn entries(&self) -> &[TreeEntry] {
        &self.entries
    }

    pub fn get(&self, name: &str) -> Option<&TreeEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// Inserts or replaces the entry with the same name.
    pub fn upsert(&mut self, entry: TreeEntry) {
        self.entries.retain(|e| e.name != entry.name);
        self.entries.push(entry);
        self.entries.sort_by_key(sort_key);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature {
    pub name: String,
    pub email: String,
    pub when: DateTime<Utc>,
}

impl Signature {
    fn encode(&self) -> String {
        format!("{} <{}> {} +0000", self.name, self.email, self.when.timestamp())
    }

    fn decode(s: &str) -> Result<Self, GitError> {
        let bad = || GitError::Corrupt(format!("bad signature `{s}`"));
        let open = s.find(" <").ok_or_else(bad)?;
        let close = s.rfind("> ").ok_or_else(bad)?;
        let name = &s[..open];
        let email = &s[open + 2..close];
        let mut rest = s[close + 2..].split(' ');
        let secs: i64 = rest.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
        let when = Utc.timestamp_opt(secs, 0).single().ok_or_else(bad)?;
        Ok(Signature {
            name: name.to_string(),
            email: email.to_string(),
            when,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Commit {
    pub tree: ObjectId,
    pub parents: Vec<ObjectId>,
    pub author: Signature,
    pub committer: Signature,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Object {
    Blob(Vec<u8>),
    Tree(Tree),
    Commit(Commit),
}

impl Object {
    pub fn kind(&self) -> ObjectKind {
        match self {
            Object::Blob(_) => ObjectKind::Blob,
            Object::Tree(_) => ObjectKind::Tree,
            Object::Commit(_) => ObjectKind::Commit,
        }
    }

    fn body(&self) -> Vec<u8> {
        match self {
            Object::Blob(b) => b.clone(),
            Object::Tree(t) => {
                let mut out = Vec::new();
                for e in &t.entries {
                    out.extend_from_slice(e.mode.octal().as_bytes());
                    out.push(b' ');
                    out.extend_from_slice(e.name.as_bytes());
                    out.push(0);
                    out.extend_from_slice(&e.id.0);
                }
                out
            }
            Object::Commit(c) => {
                let mut s = format!("tree {}\n", c.tree);
                for p in &c.parents {
                    s.push_str(&format!("parent {p}\n"));
                }
                s.push_str(&format!("author {}\n", c.author.encode()));
                s.push_str(&format!("committer {}\n", c.committer.encode()));
                s.push('\n');
                s.push_str(&c.message);
                s.into_bytes()
            }
        }
    }

    /// Full loose-object bytes: header plus body.
    pub fn encode(&self) -> Vec<u8> {
        let body = self.body();
        let mut out = format!("{} {}\0", self.kind().name(), body.len()).into_bytes();
        out.extend_from_slice(&body);
        out
    }

    pub fn id(&self) -> ObjectId {
        hash_encoded(&self.encode())
    }

    pub fn decode(bytes: &[u8]) -> Result<Object, GitError> {
        let corrupt = |m: &str| GitError::Corrupt(m.to_string());
        let nul = bytes
            .iter()
            .position(|b| *b == 0)
            .ok_or_else(|| corrupt("missing header"))?;
        let header = std::str::from_utf8(&bytes[..nul]).map_err(|_| corrupt("bad header"))?;
        let (kind, len) = header.split_once(' ').ok_or_else(|| corrupt("bad header"))?;
        let len: usize = len.parse().map_err(|_| corrupt("bad length"))?;
        let body = &bytes[nul + 1..];
        if body.len() != len {
            return Err(corrupt("length mismatch"));
        }
        match kind {
            "blob" => Ok(Object::Blob(body.to_vec())),
            "tree" => decode_tree(body).map(Object::Tree),
            "commit" => decode_commit(body).map(Object::Commit),
            other => Err(GitError::Corrupt(format!("unknown kind `{other}`"))),
        }
    }
}

pub(crate) fn hash_encoded(bytes: &[u8]) -> ObjectId {
    ObjectId(Sha1::digest(bytes).into())
}

fn decode_tree(mut body: &[u8]) -> Result<Tree, GitError> {
    let corrupt = || GitError::Corrupt("bad tree entry".into());
    let mut entries = Vec::new();
    while !body.is_empty() {
        let sp = body.iter().position(|b| *b == b' ').ok_or_else(corrupt)?;
        let mode = match &body[..sp] {
            b"100644" => EntryMode::File,
            b"40000" => EntryMode::Tree,
            _ => return Err(corrupt()),
        };
        let rest = &body[sp + 1..];
        let nul = rest.iter().position(|b| *b == 0).ok_or_else(corrupt)?;
        let name = std::str::from_utf8(&rest[..nul]).map_err(|_| corrupt())?;
        if rest.len() < nul + 21 {
            return Err(corrupt());
        }
        let mut id = [0u8; 20];
        id.copy_from_slice(&rest[nul + 1..nul + 21]);
        entries.push(TreeEntry {
            name: name.to_string(),
            mode,
            id: ObjectId(id),
        });
        body = &rest[nul + 21..];
    }
    Ok(Tree { entries })
}

fn decode_commit(body: &[u8]) -> Result<Commit, GitError> {
    let text = std::str::from_utf8(body).map_err(|_| GitError::Corrupt("commit not utf-8".into()))?;
    let (head, message) = text
        .split_once("\n\n")
        .ok_or_else(|| GitError::Corrupt("commit without message separator".into()))?;
    let mut tree = None;
    let mut parents = Vec::new();
    let mut author = None;
    let mut committer = None;
    for line in head.lines() {
        let (key, value) = line
            .split_once(' ')
            .ok_or_else(|| GitError::Corrupt(format!("bad commit line `{line}`")))?;
        match key {
            "tree" => tree = Some(value.parse()?),
            "parent" => parents.push(value.parse()?),
            "author" => author = Some(Signature::decode(value)?),
            "committer" => committer = Some(Signature::decode(value)?),
            _ => {}
        }
    }
    let missing = |f: &str| GitError::Corrupt(format!("commit without {f}"));
    Ok(Commit {
        tree: tree.ok_or_else(|| missing("tree"))?,
        parents,
        author: author.ok_or_else(|| missing("author"))?,
        committer: committer.ok_or_else(|| missing("committer"))?,
        message: message.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_blob_ids() {
        // `git hash-object` reference values
        assert_eq!(
            Object::Blob(Vec::new()).id().to_hex(),
            "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391"
        );
        assert_eq!(
            Object::Blob(b"hello world\n".to_vec()).id().to_hex(),
            "3b18e512dba79e4c8300dd08aeb37f8e728b8dad"
        );
        assert_eq!(
            Object::Tree(Tree::default()).id().to_hex(),
            "4b825dc642cb6eb9a060e54bf8d69288fbee4904"
        );
    }

    #[test]
    fn tree_order_treats_dirs_with_slash() {
        let id = Object::Blob(vec![1]).id();
        let t = Tree::new([
            TreeEntry { name: "a.b".into(), mode: EntryMode::File, id },
            TreeEntry { name: "a".into(), mode: EntryMode::Tree, id },
            TreeEntry { name: "a0".into(), mode: EntryMode::File, id },
        ]);
        let names: Vec<_> = t.entries().iter().map(|e| e.name.as_str()).collect();
        // "a/" sorts after "a.b" ('.' < '/') and before "a0" ('/' < '0')
        assert_eq!(names, ["a.b", "a", "a0"]);
    }

    #[test]
    fn decode_round_trip() {
        let blob = Object::Blob(b"png".to_vec());
        let tree = Object::Tree(Tree::new([TreeEntry {
            name: "c1.png".into(),
            mode: EntryMode::File,
            id: blob.id(),
        }]));
        let sig = Signature {
            name: "bot".into(),
            email: "bot@example.invalid".into(),
            when: Utc.timestamp_opt(1_650_000_000, 0).unwrap(),
        };
        let commit = Object::Commit(Commit {
            tree: tree.id(),
            parents: vec![blob.id()],
            author: sig.clone(),
            committer: sig,
            message: "Add pin\n\nbody\n".into(),
        });
        for o in [blob, tree, commit] {
            assert_eq!(Object::decode(&o.encode()).unwrap(), o);
        }
    }

    #[test]
    fn object_id_parsing() {
        let id = Object::Blob(vec![]).id();
        assert_eq!(id.to_hex().parse::<ObjectId>().unwrap(), id);
        assert!("xyz".parse::<ObjectId>().is_err());
        assert!("zz".repeat(20).parse::<ObjectId>().is_err());
    }

    #[test]
    fn corrupt_objects_rejected() {
        assert!(Object::decode(b"blob 3\0ab").is_err());
        assert!(Object::decode(b"thing 0\0").is_err());
        assert!(Object::decode(b"tree 3\0abc").is_err());
    }
}
