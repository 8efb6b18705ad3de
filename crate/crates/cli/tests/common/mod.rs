#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Parser;
use inspect_cli::{run, Cli, Outcome};

pub const NOW: &str = "2022-07-01T00:00:00Z";

pub fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn survey_csv() -> PathBuf {
    workspace_root().join("crates/core/fixtures/survey/comments.csv")
}

pub fn copy_dir(src: &Path, dst: &Path) {
    fs::create_dir_all(dst).unwrap();
    for entry in fs::read_dir(src).unwrap() {
        let entry = entry.unwrap();
        let to = dst.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_dir(&entry.path(), &to);
        } else {
            fs::copy(entry.path(), &to).unwrap();
        }
    }
}

/// Fresh copy of the demo fixtures under `root`.
pub fn demo_fixtures(root: &Path) -> PathBuf {
    let dst = root.join("fixtures");
    copy_dir(&workspace_root().join("fixtures/demo"), &dst);
    dst
}

/// Runs the CLI in-process; returns the outcome (or error text) and stdout.
pub fn cli(args: &[&str]) -> (Result<Outcome, String>, String) {
    let cli = Cli::try_parse_from(std::iter::once("inspect").chain(args.iter().copied()))
        .unwrap_or_else(|e| panic!("bad arguments {args:?}: {e}"));
    let mut out = Vec::new();
    let res = run(cli, &mut out).map_err(|e| format!("{e:#}"));
    (res, String::from_utf8(out).unwrap())
}

pub fn cli_ok(args: &[&str]) -> String {
    let (res, out) = cli(args);
    assert_eq!(res, Ok(Outcome::Success), "{args:?} printed:\n{out}");
    out
}

/// Every file under `dir` with its contents.
pub fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.clone(), fs::read(&p).unwrap());
            }
        }
    }
    out
}
