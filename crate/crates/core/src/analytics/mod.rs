//! Per-year, per-group category statistics and chart data.
//!
//! Percentages use the group's total number of label occurrences as the
//! denominator, so a group's shares sum to one even though a comment may
//! carry several labels. Unlabeled comments count toward `comment_total`
//! only.

mod svg;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::taxonomy::Category;

pub use svg::render_bar_chart;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error("threshold {threshold} for `{slug}` is outside [0, 1]")]
    ThresholdOutOfRange { slug: Category, threshold: f64 },
}

/// A (year, group) pair, e.g. 2022 / G1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GroupKey {
    pub year: i32,
    pub group: String,
}

impl GroupKey {
    pub fn new(year: i32, group: impl Into<String>) -> Self {
        GroupKey {
            year,
            group: group.into(),
        }
    }
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.year, self.group)
    }
}

/// Newest year first, then group name ascending.
impl Ord for GroupKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other
            .year
            .cmp(&self.year)
            .then_with(|| self.group.cmp(&other.group))
    }
}

impl PartialOrd for GroupKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub year: i32,
    pub group: String,
    pub comment_total: usize,
    pub labeled_total: usize,
    pub label_counts: BTreeMap<Category, usize>,
    pub label_total: usize,
    /// Empty when `label_total` is zero.
    pub percentages: BTreeMap<Category, f64>,
}

impl GroupStats {
    fn empty(year: i32, group: &str) -> Self {
        GroupStats {
            year,
            group: group.to_string(),
            comment_total: 0,
            labeled_total: 0,
            label_counts: Category::ALL.iter().map(|c| (*c, 0)).collect(),
            label_total: 0,
            percentages: BTreeMap::new(),
        }
    }

    pub fn key(&self) -> GroupKey {
        GroupKey::new(self.year, self.group.clone())
    }

    pub fn count(&self, c: Category) -> usize {
        self.label_counts.get(&c).copied().unwrap_or(0)
    }

    pub fn share(&self, c: Category) -> Option<f64> {
        self.percentages.get(&c).copied()
    }

    fn finish(&mut self) {
        self.label_total = self.label_counts.values().sum();
        self.percentages = if self.label_total == 0 {
            BTreeMap::new()
        } else {
            let total = self.label_total as f64;
            self.label_counts
                .iter()
                .map(|(c, n)| (*c, *n as f64 / total))
                .collect()
        };
    }
}

pub fn compute_stats(corpus: &Corpus, year: i32, group: &str) -> GroupStats {
    let eff = corpus.effective_map();
    let mut stats = GroupStats::empty(year, group);
    for c in corpus
        .comments()
        .filter(|c| c.year == year && c.group == group)
    {
        stats.comment_total += 1;
        if let Some(a) = eff.get(&c.id) {
            stats.labeled_total += 1;
            for label in a.labels.iter() {
                *stats.label_counts.entry(label).or_default() += 1;
            }
        }
    }
    stats.finish();
    stats
}

/// Every (year, group) present in the corpus, newest year first.
pub fn groups(corpus: &Corpus) -> Vec<GroupKey> {
    let set: BTreeSet<GroupKey> = corpus
        .comments()
        .map(|c| GroupKey::new(c.year, c.group.clone()))
        .collect();
    set.into_iter().collect()
}

pub fn all_stats(corpus: &Corpus) -> Vec<GroupStats> {
    groups(corpus)
        .into_iter()
        .map(|k| compute_stats(corpus, k.year, &k.group))
        .collect()
}

/// Distinct comments per year with groups merged.
pub fn yearly_comment_totals(corpus: &Corpus) -> BTreeMap<i32, usize> {
    let mut out = BTreeMap::new();
    for c in corpus.comments() {
        *out.entry(c.year).or_default() += 1;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendFlag {
    pub group: GroupKey,
    pub slug: Category,
    pub share: f64,
    pub threshold: f64,
    pub message: String,
}

fn advice(slug: Category, key: &GroupKey, share: f64) -> String {
    let pct = share * 100.0;
    match slug {
        Category::Presentation => format!(
            "{key}: {pct:.1}% of remarks concern wording; ask the team to check their spelling again before the next review"
        ),
        Category::Inconsistent => format!(
            "{key}: {pct:.1}% of remarks concern inconsistencies; ask the team to check their past documents"
        ),
        other => format!(
            "{key}: {pct:.1}% of remarks are `{}` ({})",
            other.slug(),
            other.definition().to_lowercase()
        ),
    }
}

/// Raises one flag per (group, slug) whose share meets its threshold.
pub fn trend_flags(
    stats: &[GroupStats],
    rules: &BTreeMap<Category, f64>,
) -> Result<Vec<TrendFlag>, AnalyticsError> {
    for (slug, t) in rules {
        if !(0.0..=1.0).contains(t) {
            return Err(AnalyticsError::ThresholdOutOfRange {
                slug: *slug,
                threshold: *t,
            });
        }
    }
    let mut flags = Vec::new();
    for s in stats {
        for (slug, threshold) in rules {
            if let Some(share) = s.share(*slug) {
                if share >= *threshold {
                    flags.push(TrendFlag {
                        group: s.key(),
                        slug: *slug,
                        share,
                        threshold: *threshold,
                        message: advice(*slug, &s.key(), share),
                    });
                }
            }
        }
    }
    Ok(flags)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint {
    pub slug: Category,
    pub percentage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartSeries {
    pub year: i32,
    pub group: String,
    pub points: Vec<ChartPoint>,
}

impl ChartSeries {
    pub fn value(&self, slug: Category) -> f64 {
        self.points
            .iter()
            .find(|p| p.slug == slug)
            .map(|p| p.percentage)
            .unwrap_or(0.0)
    }
}

/// One series per (year, group), each holding all thirteen categories in
/// table order. Groups with no labels get all-zero series.
pub fn percentage_chart_data(corpus: &Corpus) -> Vec<ChartSeries> {
    all_stats(corpus)
        .into_iter()
        .map(|s| ChartSeries {
            points: Category::ALL
                .iter()
                .map(|c| ChartPoint {
                    slug: *c,
                    percentage: s.share(*c).unwrap_or(0.0),
                })
                .collect(),
            year: s.year,
            group: s.group,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::{
        ArtifactKind, AuthorRole, CommentId, InspectionComment, Labeler, Source, SourceLocation,
    };
    use chrono::{TimeZone, Utc};
    use proptest::prelude::*;

    fn comment(id: &str, year: i32, group: &str) -> InspectionComment {
        InspectionComment {
            id: id.into(),
            source: Source::CodeHost,
            year,
            group: group.into(),
            author_role: AuthorRole::Teacher,
            artifact: ArtifactKind::Other,
            body: "b".into(),
            created_at: Utc.with_ymd_and_hms(year, 6, 1, 0, 0, 0).unwrap(),
            location: SourceLocation::CodeHost {
                repo: "r".into(),
                pr_number: 1,
                file_path: None,
            },
            parent_id: None,
            posted_in: None,
            image_path: None,
        }
    }

    fn corpus_from(rows: &[(i32, &str, Vec<Category>)]) -> Corpus {
        let mut c = Corpus::new();
        for (i, (year, group, labels)) in rows.iter().enumerate() {
            let id = format!("c{i:04}");
            c.ingest([comment(&id, *year, group)]);
            if !labels.is_empty() {
                c.assign_labels(
                    &CommentId::new(id),
                    labels.clone(),
                    Labeler::Human("t".into()),
                    Utc::now(),
                )
                .unwrap();
            }
        }
        c
    }

    #[test]
    fn empty_corpus_yields_zeros() {
        let s = compute_stats(&Corpus::new(), 2022, "G1");
        assert_eq!(s.comment_total, 0);
        assert_eq!(s.label_total, 0);
        assert_eq!(s.label_counts.len(), 13);
        assert!(s.label_counts.values().all(|n| *n == 0));
        assert!(s.percentages.is_empty());
        assert!(yearly_comment_totals(&Corpus::new()).is_empty());
        assert!(trend_flags(&[s], &[(Category::Presentation, 0.0)].into())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn unlabeled_comments_count_only_in_total() {
        let c = corpus_from(&[
            (2021, "G1", vec![Category::Format, Category::Mistake]),
            (2021, "G1", vec![]),
        ]);
        let s = compute_stats(&c, 2021, "G1");
        assert_eq!(s.comment_total, 2);
        assert_eq!(s.labeled_total, 1);
        assert_eq!(s.label_total, 2);
        assert_eq!(s.share(Category::Format), Some(0.5));
    }

    #[test]
    fn single_comment_chart() {
        let c = corpus_from(&[(2020, "G2", vec![Category::Rationale])]);
        let data = percentage_chart_data(&c);
        assert_eq!(data.len(), 1);
        assert_eq!(data[0].points.len(), 13);
        for p in &data[0].points {
            let want = if p.slug == Category::Rationale { 1.0 } else { 0.0 };
            assert_eq!(p.percentage, want);
        }
    }

    #[test]
    fn group_order_newest_first() {
        let c = corpus_from(&[
            (2020, "G2", vec![]),
            (2022, "G1", vec![]),
            (2020, "G1", vec![]),
            (2021, "G1", vec![]),
        ]);
        let keys: Vec<String> = groups(&c).iter().map(|k| k.to_string()).collect();
        assert_eq!(keys, ["2022G1", "2021G1", "2020G1", "2020G2"]);
    }

    #[test]
    fn threshold_validation() {
        let s = compute_stats(&Corpus::new(), 2022, "G1");
        let err = trend_flags(&[s], &[(Category::Format, 1.5)].into()).unwrap_err();
        assert!(matches!(err, AnalyticsError::ThresholdOutOfRange { .. }));
    }

    #[test]
    fn flag_messages() {
        let c = corpus_from(&[
            (2022, "G1", vec![Category::Presentation]),
            (2022, "G1", vec![Category::Inconsistent]),
        ]);
        let s = compute_stats(&c, 2022, "G1");
        let flags = trend_flags(
            &[s],
            &[(Category::Presentation, 0.5), (Category::Inconsistent, 0.5)].into(),
        )
        .unwrap();
        assert_eq!(flags.len(), 2);
        assert!(flags[0].message.contains("past documents"));
        assert!(flags[1].message.contains("spelling"));
    }

    fn label_rows() -> impl Strategy<Value = Vec<(i32, &'static str, Vec<Category>)>> {
        let labels = prop::collection::btree_set(0usize..13, 0..4)
            .prop_map(|s| s.into_iter().map(|i| Category::ALL[i]).collect::<Vec<_>>());
        prop::collection::vec(
            (prop_oneof![Just(2020), Just(2021)], prop_oneof![Just("G1"), Just("G2")], labels),
            0..40,
        )
    }

    proptest! {
        #[test]
        fn counts_sum_to_total(rows in label_rows()) {
            let c = corpus_from(&rows);
            for s in all_stats(&c) {
                prop_assert_eq!(s.label_counts.values().sum::<usize>(), s.label_total);
                if s.label_total > 0 {
                    let p: f64 = s.percentages.values().sum();
                    prop_assert!((p - 1.0).abs() < 1e-9);
                }
                if s.labeled_total == s.comment_total {
                    prop_assert!(s.label_total >= s.comment_total);
                }
            }
        }

        #[test]
        fn permutation_invariant(rows in label_rows(), seed in any::<u64>()) {
            let mut shuffled = rows.clone();
            let n = shuffled.len();
            let mut s = seed;
            for i in (1..n).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
                shuffled.swap(i, (s >> 33) as usize % (i + 1));
            }
            let a = all_stats(&corpus_from(&rows));
            let b = all_stats(&corpus_from(&shuffled));
            prop_assert_eq!(a, b);
        }

        #[test]
        fn single_label_totals_match(rows in prop::collection::vec(0usize..13, 0..50)) {
            let rows: Vec<_> = rows.into_iter().map(|i| (2022, "G1", vec![Category::ALL[i]])).collect();
            let c = corpus_from(&rows);
            let s = compute_stats(&c, 2022, "G1");
            // brute-force oracle: each comment contributes exactly one label
            let brute = rows.len();
            prop_assert_eq!(s.label_total, brute);
            prop_assert_eq!(s.comment_total, brute);
        }

        #[test]
        fn disjoint_corpora_add(a in label_rows(), b in label_rows()) {
            let mut both = a.clone();
            both.extend(b.iter().cloned());
            let (ca, cb, cab) = (corpus_from(&a), corpus_from(&b), corpus_from(&both));
            for year in [2020, 2021] {
                for group in ["G1", "G2"] {
                    let sa = compute_stats(&ca, year, group);
                    let sb = compute_stats(&cb, year, group);
                    let sab = compute_stats(&cab, year, group);
                    for cat in Category::ALL {
                        prop_assert_eq!(sab.count(cat), sa.count(cat) + sb.count(cat));
                    }
                }
            }
        }
    }
}
