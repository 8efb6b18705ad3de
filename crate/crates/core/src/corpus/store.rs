//! Directory-backed corpus storage.
//!
//! Layout:
//!
//! ```text
//! corpus/comments.csv       canonical export, source of truth for comments
//! corpus/assignments.jsonl  full assignment log, one JSON object per line
//! corpus/threads.jsonl      reply links, which the CSV has no column for
//! corpus/.lock              advisory writer lock
//! ```
//!
//! When `assignments.jsonl` is absent (a hand-made or imported corpus), the
//! labels in `comments.csv` seed the log.

use std::fs::{self, File, OpenOptions, TryLockError};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use serde::{Deserialize, Serialize};

use super::{export_csv, import_csv, Corpus, CsvError};
use crate::taxonomy::{CommentId, LabelAssignment};

#[derive(Debug, Serialize, Deserialize)]
struct ThreadLink {
    comment_id: CommentId,
    parent_id: CommentId,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: CsvError },
    #[error("{path}:{line}: {message}")]
    Log {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("corpus at {0} is locked by another writer")]
    Busy(PathBuf),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Held while writing; released on drop.
#[derive(Debug)]
pub struct CorpusLock {
    file: File,
}

impl Drop for CorpusLock {
    fn drop(&mut self) {
        let _ = self.file.unlock();
    }
}

#[derive(Debug, Clone)]
pub struct CorpusDir {
    root: PathBuf,
}

impl CorpusDir {
    /// Opens (creating if needed) a corpus directory.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(io_err(&root))?;
        Ok(CorpusDir { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn comments_path(&self) -> PathBuf {
        self.root.join("comments.csv")
    }

    pub fn assignments_path(&self) -> PathBuf {
        self.root.join("assignments.jsonl")
    }

    pub fn threads_path(&self) -> PathBuf {
        self.root.join("threads.jsonl")
    }

    pub fn model_path(&self) -> PathBuf {
        self.root.join("model.json")
    }

    fn lock_file(&self) -> Result<File, StoreError> {
        let path = self.root.join(".lock");
        OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&path)
            .map_err(io_err(&path))
    }

    /// Blocks until the writer lock is available.
    pub fn lock(&self) -> Result<CorpusLock, StoreError> {
        let file = self.lock_file()?;
        file.lock().map_err(io_err(&self.root))?;
        Ok(CorpusLock { file })
    }

    /// Fails with [`StoreError::Busy`] instead of waiting.
    pub fn try_lock(&self) -> Result<CorpusLock, StoreError> {
        let file = self.lock_file()?;
        match file.try_lock() {
            Ok(()) => Ok(CorpusLock { file }),
            Err(TryLockError::WouldBlock) => Err(StoreError::Busy(self.root.clone())),
            Err(TryLockError::Error(e)) => Err(io_err(&self.root)(e)),
        }
    }

    pub fn load(&self) -> Result<Corpus, StoreError> {
        let csv_path = self.comments_path();
        let mut corpus = match File::open(&csv_path) {
            Ok(f) => import_csv(BufReader::new(f)).map_err(|source| StoreError::Csv {
                path: csv_path.clone(),
                source,
            })?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Corpus::new(),
            Err(e) => return Err(io_err(&csv_path)(e)),
        };

        self.load_threads(&mut corpus)?;

        let log_path = self.assignments_path();
        match File::open(&log_path) {
            Ok(f) => {
                let mut log = Vec::new();
                for (i, line) in BufReader::new(f).lines().enumerate() {
                    let line = line.map_err(io_err(&log_path))?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    let a: LabelAssignment =
                        serde_json::from_str(&line).map_err(|e| StoreError::Log {
                            path: log_path.clone(),
                            line: i + 1,
                            message: e.to_string(),
                        })?;
                    if corpus.get(&a.comment_id).is_none() {
                        return Err(StoreError::Log {
                            path: log_path.clone(),
                            line: i + 1,
                            message: format!("assignment for unknown comment `{}`", a.comment_id),
                        });
                    }
                    log.push(a);
                }
                corpus.replace_assignments(log);
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(io_err(&log_path)(e)),
        }
        Ok(corpus)
    }

    fn load_threads(&self, corpus: &mut Corpus) -> Result<(), StoreError> {
        let path = self.threads_path();
        let f = match File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(()),
            Err(e) => return Err(io_err(&path)(e)),
        };
        for (i, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(io_err(&path))?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |message: String| StoreError::Log {
                path: path.clone(),
                line: i + 1,
                message,
            };
            let link: ThreadLink = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
            let parent_source = corpus.get(&link.parent_id).map(|p| p.source);
            let child = corpus
                .comments
                .get_mut(&link.comment_id)
                .ok_or_else(|| bad(format!("reply link for unknown comment `{}`", link.comment_id)))?;
            if parent_source != Some(child.source) || link.parent_id == link.comment_id {
                return Err(bad(format!("bad parent `{}` for `{}`", link.parent_id, link.comment_id)));
            }
            child.parent_id = Some(link.parent_id);
        }
        Ok(())
    }

    /// Writes all files atomically. Callers should hold the writer lock.
    pub fn save(&self, corpus: &Corpus, _lock: &CorpusLock) -> Result<(), StoreError> {
        let csv_path = self.comments_path();
        self.write_atomic(&csv_path, |w| {
            export_csv(corpus, w).map(|_| ()).map_err(|source| StoreError::Csv {
                path: csv_path.clone(),
                source,
            })
        })?;
        let log_path = self.assignments_path();
        self.write_atomic(&log_path, |w| {
            for a in corpus.assignments() {
                let line = serde_json::to_string(a).expect("assignments serialize");
                writeln!(w, "{line}").map_err(io_err(&log_path))?;
            }
            Ok(())
        })?;
        let threads_path = self.threads_path();
        self.write_atomic(&threads_path, |w| {
            for c in corpus.comments() {
                if let Some(parent) = &c.parent_id {
                    let link = ThreadLink {
                        comment_id: c.id.clone(),
                        parent_id: parent.clone(),
                    };
                    let line = serde_json::to_string(&link).expect("links serialize");
                    writeln!(w, "{line}").map_err(io_err(&threads_path))?;
                }
            }
            Ok(())
        })
    }

    fn write_atomic(
        &self,
        path: &Path,
        body: impl FnOnce(&mut BufWriter<&mut File>) -> Result<(), StoreError>,
    ) -> Result<(), StoreError> {
        let tmp = path.with_extension("tmp");
        let mut file = File::create(&tmp).map_err(io_err(&tmp))?;
        {
            let mut w = BufWriter::new(&mut file);
            body(&mut w)?;
            w.flush().map_err(io_err(&tmp))?;
        }
        file.sync_all().map_err(io_err(&tmp))?;
        fs::rename(&tmp, path).map_err(io_err(path))
    }
}
