use inspect_core::classifier::{evaluate, train, Example, SubModel};
use inspect_core::{Category, LabelSet};
use proptest::prelude::*;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FILLER: [&str; 8] = ["the", "this", "section", "please", "check", "document", "screen", "item"];

/// 13 x 20 documents; category `i` owns the keywords `kw{i}x0..kw{i}x4`.
fn separable(seed: u64) -> Vec<(String, LabelSet)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (ci, c) in Category::ALL.iter().enumerate() {
        for _ in 0..20 {
            let mut words: Vec<String> = (0..3).map(|_| format!("kw{ci}x{}", rng.random_range(0..5))).collect();
            words.extend((0..4).map(|_| FILLER.choose(&mut rng).unwrap().to_string()));
            words.shuffle(&mut rng);
            out.push((words.join(" "), LabelSet::new([*c]).unwrap()));
        }
    }
    out
}

/// Brute force: the category with the most keyword hits, if unique.
fn nearest_keyword(text: &str) -> Option<Category> {
    let mut hits = [0; 13];
    for w in text.split_whitespace() {
        for (ci, h) in hits.iter_mut().enumerate() {
            if (0..5).any(|k| w == format!("kw{ci}x{k}")) {
                *h += 1;
            }
        }
    }
    let best = *hits.iter().max().unwrap();
    let winners: Vec<usize> = (0..13).filter(|i| hits[*i] == best).collect();
    (best > 0 && winners.len() == 1).then(|| Category::ALL[winners[0]])
}

fn as_examples(set: &[(String, LabelSet)]) -> Vec<Example<'_>> {
    set.iter().map(|(t, l)| Example { text: t, labels: l }).collect()
}

#[test]
fn separable_corpus_scores_high() {
    let set = separable(1);
    for (text, labels) in &set {
        assert_eq!(nearest_keyword(text).map(|c| labels.contains(c)), Some(true), "{text}");
    }
    let eval = evaluate(&as_examples(&set), 5, 42).unwrap();
    let f1 = eval.macro_f1.unwrap();
    assert!(f1 >= 0.9, "macro-F1 {f1}");
}

#[test]
fn contradictory_labels_score_low() {
    // every text occurs once under every category
    let texts = ["please review this part", "see the comment above", "check the screen again"];
    let set: Vec<(String, LabelSet)> = texts
        .iter()
        .flat_map(|t| Category::ALL.iter().map(move |c| (t.to_string(), LabelSet::new([*c]).unwrap())))
        .collect();
    let eval = evaluate(&as_examples(&set), 3, 42).unwrap();
    let f1 = eval.macro_f1.unwrap_or(0.0);
    assert!(f1 <= 0.6, "macro-F1 {f1}");
}

fn corpus_strategy() -> impl Strategy<Value = Vec<(String, LabelSet)>> {
    let vocab = prop::sample::select(vec![
        "typo", "missing", "reason", "diagram", "screen", "term", "format", "add", "画面", "遷移", "the", "x1",
    ]);
    let doc = (
        prop::collection::vec(vocab, 1..8),
        prop::collection::btree_set(0usize..13, 1..3),
    )
        .prop_map(|(words, cats)| {
            (words.join(" "), LabelSet::new(cats.into_iter().map(|i| Category::ALL[i])).unwrap())
        });
    prop::collection::vec(doc, 2..30)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scores_are_probabilities(set in corpus_strategy(), text in "[a-z 画面遷移の、。!?]{0,40}[a-z画]") {
        let model = train(&as_examples(&set), "p").unwrap();
        let p = model.predict(&text).unwrap();
        prop_assert!(!p.labels.is_empty());
        prop_assert_eq!(p.scores.len(), 13);
        for s in p.scores.values() {
            prop_assert!(s.is_finite() && (0.0..=1.0).contains(s));
        }
    }

    #[test]
    fn training_order_does_not_matter(set in corpus_strategy(), seed in any::<u64>()) {
        let model = train(&as_examples(&set), "p").unwrap();
        let mut shuffled = set.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(train(&as_examples(&shuffled), "p").unwrap(), model);
    }

    #[test]
    fn positive_evidence_never_lowers_a_score(set in corpus_strategy(), text in "[a-z ]{0,30}[a-z]") {
        let model = train(&as_examples(&set), "p").unwrap();
        let base = model.predict(&text).unwrap().scores;
        for c in Category::ALL {
            let SubModel::Fitted(m) = model.sub_model(c) else { continue };
            for (i, token) in model.vocabulary.iter().enumerate() {
                if m.token_log_likelihoods_pos[i] > m.token_log_likelihoods_neg[i] {
                    let more = model.predict(&format!("{text} {token}")).unwrap().scores;
                    prop_assert!(more[&c] >= base[&c], "{c} {token}: {} < {}", more[&c], base[&c]);
                }
            }
        }
    }
}
