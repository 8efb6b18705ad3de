//! Canonical CSV form of a corpus: one row per comment, effective labels
//! joined by `;` in table order, CRLF record terminators, minimal quoting.

use std::io::{Read, Write};

use chrono::{DateTime, SecondsFormat, Utc};
use thiserror::Error;

use super::Corpus;
use crate::taxonomy::{
    CommentId, InspectionComment, LabelAssignment, LabelSet, Labeler, PullRequestRef, Source,
    SourceLocation,
};

pub const CSV_HEADER: [&str; 18] = [
    "comment_id",
    "year",
    "group",
    "source",
    "artifact",
    "author_role",
    "created_at",
    "body",
    "labels",
    "labeler",
    "project_id",
    "frame_id",
    "x",
    "y",
    "repo",
    "pr_number",
    "file_path",
    "image_path",
];

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("header mismatch at column {index}: expected `{expected}`, found `{found}`")]
    HeaderMismatch {
        index: usize,
        expected: &'static str,
        found: String,
    },
    #[error("line {line}: expected {expected} fields, found {found}")]
    Arity {
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("line {line}: duplicate comment id `{id}`")]
    DuplicateId { line: u64, id: CommentId },
}

fn timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

fn row(c: &InspectionComment, eff: Option<&LabelAssignment>) -> [String; 18] {
    let (labels, labeler) = match eff {
        Some(a) => (a.labels.join(";"), a.labeler.to_string()),
        None => (String::new(), String::new()),
    };
    let empty = String::new;
    let (project_id, frame_id, x, y, repo, pr, file_path) = match &c.location {
        SourceLocation::DesignTool {
            project_id,
            frame_id,
            x,
            y,
        } => {
            let (repo, pr) = match &c.posted_in {
                Some(p) => (p.repo.clone(), p.pr_number.to_string()),
                None => (empty(), empty()),
            };
            (
                project_id.clone(),
                frame_id.clone(),
                x.to_string(),
                y.to_string(),
                repo,
                pr,
                empty(),
            )
        }
        SourceLocation::CodeHost {
            repo,
            pr_number,
            file_path,
        } => (
            empty(),
            empty(),
            empty(),
            empty(),
            repo.clone(),
            pr_number.to_string(),
            file_path.clone().unwrap_or_default(),
        ),
    };
    [
        c.id.to_string(),
        c.year.to_string(),
        c.group.clone(),
        c.source.to_string(),
        c.artifact.to_string(),
        c.author_role.to_string(),
        timestamp(&c.created_at),
        c.body.clone(),
        labels,
        labeler,
        project_id,
        frame_id,
        x,
        y,
        repo,
        pr,
        file_path,
        c.image_path.clone().unwrap_or_default(),
    ]
}

/// Writes the corpus and returns the number of data rows.
pub fn export_csv<W: Write>(corpus: &Corpus, out: W) -> Result<usize, CsvError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    let eff = corpus.effective_map();
    let mut n = 0;
    for c in corpus.comments() {
        w.write_record(row(c, eff.get(&c.id).copied()))?;
        n += 1;
    }
    w.flush()?;
    Ok(n)
}

pub fn export_csv_string(corpus: &Corpus) -> String {
    let mut buf = Vec::new();
    export_csv(corpus, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("csv output is utf-8")
}

fn opt(s: &str) -> Option<String> {
    (!s.is_empty()).then(|| s.to_string())
}

fn parse_row(rec: &csv::StringRecord, line: u64) -> Result<(InspectionComment, Option<LabelAssignment>), CsvError> {
    let err = |message: String| CsvError::Row { line, message };
    let f = |i: usize| rec.get(i).unwrap_or("");
    let num = |i: usize| -> Result<f64, CsvError> {
        f(i).parse::<f64>()
            .map_err(|_| err(format!("invalid number `{}` in column {}", f(i), CSV_HEADER[i])))
    };
    let pr_number = |i: usize| -> Result<u64, CsvError> {
        f(i).parse::<u64>()
            .map_err(|_| err(format!("invalid pull request number `{}`", f(i))))
    };

    let id = CommentId::new(f(0));
    let year = f(1)
        .parse::<i32>()
        .map_err(|_| err(format!("invalid year `{}`", f(1))))?;
    let source: Source = f(3).parse().map_err(|e| err(format!("{e}")))?;
    let artifact = f(4).parse().map_err(|e| err(format!("{e}")))?;
    let author_role = f(5).parse().map_err(|e| err(format!("{e}")))?;
    let created_at = DateTime::parse_from_rfc3339(f(6))
        .map_err(|e| err(format!("unparseable timestamp `{}`: {e}", f(6))))?
        .with_timezone(&Utc);

    let (location, posted_in) = match source {
        Source::DesignTool => {
            let posted_in = if f(14).is_empty() {
                None
            } else {
                Some(PullRequestRef {
                    repo: f(14).to_string(),
                    pr_number: pr_number(15)?,
                })
            };
            (
                SourceLocation::DesignTool {
                    project_id: f(10).to_string(),
                    frame_id: f(11).to_string(),
                    x: num(12)?,
                    y: num(13)?,
                },
                posted_in,
            )
        }
        Source::CodeHost => (
            SourceLocation::CodeHost {
                repo: f(14).to_string(),
                pr_number: pr_number(15)?,
                file_path: opt(f(16)),
            },
            None,
        ),
    };

    let comment = InspectionComment {
        id: id.clone(),
        source,
        year,
        group: f(2).to_string(),
        author_role,
        artifact,
        body: f(7).to_string(),
        created_at,
        location,
        parent_id: None,
        posted_in,
        image_path: opt(f(17)),
    };

    let assignment = match (f(8).is_empty(), f(9).is_empty()) {
        (true, true) => None,
        (false, false) => {
            let labels = LabelSet::parse(f(8), ';').map_err(|e| err(e.to_string()))?;
            let labeler: Labeler = f(9).parse().map_err(|e| err(format!("{e}")))?;
            Some(LabelAssignment {
                comment_id: id,
                labels,
                labeler,
                scores: None,
                assigned_at: created_at,
            })
        }
        (true, false) => return Err(err("labeler given without labels".into())),
        (false, true) => return Err(err("labels given without labeler".into())),
    };
    Ok((comment, assignment))
}

/// Reads a corpus from canonical CSV. Each labeled row becomes a single
/// assignment stamped with the comment's creation time.
pub fn import_csv<R: Read>(mut input: R) -> Result<Corpus, CsvError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    // record positions can point at the previous terminator, so skip any
    // line breaks before counting
    let newlines: Vec<usize> = bytes
        .iter()
        .enumerate()
        .filter_map(|(i, b)| (*b == b'\n').then_some(i))
        .collect();
    let line_at = |byte: u64| {
        let mut start = byte as usize;
        while matches!(bytes.get(start), Some(b'\r' | b'\n')) {
            start += 1;
        }
        1 + newlines.partition_point(|&i| i < start) as u64
    };
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(bytes.as_slice());
    let mut records = r.records();

    let header = match records.next() {
        Some(h) => h?,
        None => {
            return Err(CsvError::HeaderMismatch {
                index: 0,
                expected: CSV_HEADER[0],
                found: String::new(),
            })
        }
    };
    for (i, expected) in CSV_HEADER.iter().enumerate() {
        let found = header.get(i).unwrap_or("");
        if found != *expected {
            return Err(CsvError::HeaderMismatch {
                index: i,
                expected,
                found: found.to_string(),
            });
        }
    }
    if header.len() != CSV_HEADER.len() {
        return Err(CsvError::Arity {
            line: 1,
            expected: CSV_HEADER.len(),
            found: header.len(),
        });
    }

    let mut corpus = Corpus::new();
    let mut assignments = Vec::new();
    for rec in records {
        let rec = rec?;
        let line = rec.position().map(|p| line_at(p.byte())).unwrap_or(0);
        if rec.len() != CSV_HEADER.len() {
            return Err(CsvError::Arity {
                line,
                expected: CSV_HEADER.len(),
                found: rec.len(),
            });
        }
        let (comment, assignment) = parse_row(&rec, line)?;
        if corpus.get(&comment.id).is_some() {
            return Err(CsvError::DuplicateId {
                line,
                id: comment.id,
            });
        }
        corpus.insert_unchecked(comment);
        assignments.extend(assignment);
    }
    corpus.replace_assignments(assignments);
    Ok(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::{ArtifactKind, AuthorRole, Category};
    use chrono::TimeZone;

    fn design(id: &str, body: &str) -> InspectionComment {
        InspectionComment {
            id: id.into(),
            source: Source::DesignTool,
            year: 2022,
            group: "G1".into(),
            author_role: AuthorRole::TeachingAssistant,
            artifact: ArtifactKind::ScreenTransition,
            body: body.into(),
            created_at: Utc.with_ymd_and_hms(2022, 6, 1, 9, 30, 0).unwrap(),
            location: SourceLocation::DesignTool {
                project_id: "proj".into(),
                frame_id: "1:2".into(),
                x: 12.5,
                y: -3.0,
            },
            parent_id: None,
            posted_in: Some(PullRequestRef {
                repo: "org/app".into(),
                pr_number: 7,
            }),
            image_path: Some("images/pr7/c1.png".into()),
        }
    }

    #[test]
    fn empty_corpus_is_header_only() {
        let mut buf = Vec::new();
        assert_eq!(export_csv(&Corpus::new(), &mut buf).unwrap(), 0);
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            format!("{}\r\n", CSV_HEADER.join(","))
        );
    }

    #[test]
    fn comma_body_is_quoted() {
        let mut c = Corpus::new();
        c.ingest([design("c1", "fix, please")]);
        let out = export_csv_string(&c);
        assert!(out.contains(",\"fix, please\","), "{out}");
    }

    #[test]
    fn labels_in_taxonomy_order() {
        let mut c = Corpus::new();
        c.ingest([design("c1", "x")]);
        c.assign_labels(
            &"c1".into(),
            [Category::Format, Category::Mistake],
            Labeler::Human("alice".into()),
            Utc::now(),
        )
        .unwrap();
        let out = export_csv_string(&c);
        assert!(out.contains(",mistake;format,human:alice,"), "{out}");
    }

    #[test]
    fn wrong_header_names_first_mismatch() {
        let text = "comment_id,year,team,source\r\n";
        match import_csv(text.as_bytes()) {
            Err(CsvError::HeaderMismatch { index, expected, found }) => {
                assert_eq!(index, 2);
                assert_eq!(expected, "group");
                assert_eq!(found, "team");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_label_is_row_error() {
        let mut c = Corpus::new();
        c.ingest([design("c1", "x")]);
        c.assign_labels(&"c1".into(), [Category::Format], Labeler::RuleBaseline, Utc::now())
            .unwrap();
        let text = export_csv_string(&c).replace(",format,", ",speling,");
        let err = import_csv(text.as_bytes()).unwrap_err();
        assert!(matches!(err, CsvError::Row { line: 2, .. }), "{err:?}");
        assert!(err.to_string().contains("unknown label"));
    }

    #[test]
    fn bad_timestamp_reports_line() {
        let mut c = Corpus::new();
        c.ingest([design("c1", "x"), design("c2", "y")]);
        let text = export_csv_string(&c).replacen("2022-06-01T09:30:00Z", "yesterday", 2);
        let err = import_csv(text.as_bytes()).unwrap_err();
        assert!(matches!(err, CsvError::Row { line: 2, .. }), "{err:?}");
        assert!(err.to_string().contains("unparseable timestamp"));
    }

    #[test]
    fn arity_mismatch() {
        let text = format!("{}\r\nc1,2022\r\n", CSV_HEADER.join(","));
        let err = import_csv(text.as_bytes()).unwrap_err();
        assert!(matches!(err, CsvError::Arity { line: 2, found: 2, .. }), "{err:?}");
    }

    #[test]
    fn round_trip_keeps_locations_and_labels() {
        let mut c = Corpus::new();
        let mut code = design("c2", "line one\nline \"two\"");
        code.source = Source::CodeHost;
        code.posted_in = None;
        code.image_path = None;
        code.location = SourceLocation::CodeHost {
            repo: "org/app".into(),
            pr_number: 9,
            file_path: Some("docs/画面.md".into()),
        };
        c.ingest([design("c1", "画面遷移が不明, です"), code]);
        c.assign_labels(
            &"c2".into(),
            [Category::Undefined],
            Labeler::MlModel("v3".into()),
            Utc::now(),
        )
        .unwrap();
        let text = export_csv_string(&c);
        let back = import_csv(text.as_bytes()).unwrap();
        assert_eq!(back.comments().collect::<Vec<_>>(), c.comments().collect::<Vec<_>>());
        assert_eq!(
            back.effective_labels(&"c2".into()),
            c.effective_labels(&"c2".into())
        );
        assert_eq!(export_csv_string(&back), text);
    }
}
