//! Metric implementations against deliberately naive re-derivations.

mod oracles;

use oracles::*;
use proptest::prelude::*;
use storyteller_core::metrics::*;

// ---- oracle equivalence ----

#[test]
fn bleu_matches_naive_counting() {
    for seed in 0..10 {
        let pairs = random_pairs(seed, 20);
        let (c, r): (Vec<_>, Vec<_>) = pairs.iter().cloned().unzip();
        for n in 1..=4 {
            let got = bleu_tokens(&c, &r, n).unwrap();
            let want = naive_bleu(&pairs, n);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-9, "seed {seed} n {n}: {g} vs {w}");
            }
        }
    }
    // Sentence level, one pair at a time: 200 pairs.
    for (cand, refs) in random_pairs(99, 200) {
        let got = bleu_tokens(&[cand.clone()], &[refs.clone()], 4).unwrap();
        let want = naive_bleu(&[(cand, refs)], 4);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-9);
        }
    }
}

#[test]
fn meteor_matches_exhaustive_enumeration() {
    for (i, (cand, refs)) in random_pairs(7, 200).iter().enumerate() {
        let got = meteor_tokens(cand, refs);
        let want = naive_meteor(cand, refs);
        assert!((got - want).abs() < 1e-9, "pair {i}: {cand:?} vs {refs:?}: {got} vs {want}");
    }
}

#[test]
fn rouge_matches_subsequence_enumeration() {
    for (cand, refs) in random_pairs(8, 200) {
        let got = rouge_l_tokens(&cand, &refs);
        let want = naive_rouge(&cand, &refs);
        assert!((got - want).abs() < 1e-12, "{cand:?} vs {refs:?}");
    }
}

#[test]
fn cider_matches_dictionary_oracle() {
    for seed in 0..10 {
        let pairs = random_pairs(100 + seed, 12);
        let (c, r): (Vec<_>, Vec<_>) = pairs.iter().cloned().unzip();
        let (mean, each) = cider_tokens(&c, &r).unwrap();
        let want = naive_cider(&pairs);
        for (g, w) in each.iter().zip(&want) {
            assert!((g - w).abs() < 1e-9, "{g} vs {w}");
        }
        assert!((mean - want.iter().sum::<f64>() / want.len() as f64).abs() < 1e-9);
    }
}

// ---- worked examples ----

fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

#[test]
fn bleu_examples() {
    let same = vec![EvalPair::new("a", "the cat sat on the mat", vec!["the cat sat on the mat".into()])];
    assert_eq!(bleu(&same, 4).unwrap(), vec![1.0; 4]);
    let clipped = vec![EvalPair::new("a", "the the the", vec!["the cat".into()])];
    assert!((bleu(&clipped, 1).unwrap()[0] - 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(bleu(&[], 4), Err(MetricsError::EmptyCorpus));
    assert_eq!(bleu(&same, 5), Err(MetricsError::BleuOrder(5)));
}

#[test]
fn meteor_examples() {
    let a = meteor_alignment(&toks("the cat"), &toks("the cat"));
    assert_eq!((a.matches(), a.chunks), (2, 1));
    assert!((meteor_tokens(&toks("the cat"), &[toks("the cat")]) - 0.9375).abs() < 1e-12);
    assert_eq!(meteor_tokens(&toks("red blue"), &[toks("green yellow")]), 0.0);
    assert_eq!(stem("cats"), stem("cat"));
    let s = meteor(&EvalPair::new("x", "cats", vec!["cat".into()]));
    assert!(s > 0.0);
    let exact = meteor_alignment(&toks("cats cat"), &toks("cat"));
    assert_eq!(exact.pairs, vec![(1, 0)]);
    assert_eq!(exact.exact, 1);
}

#[test]
fn long_inputs_use_the_greedy_aligner_and_still_find_all_matches() {
    let s: Vec<String> = (0..40).map(|i| WORDS[i % WORDS.len()].to_string()).collect();
    let a = meteor_alignment(&s, &s);
    assert_eq!(a.matches(), 40);
    assert_eq!(a.chunks, 1);
    let mut rev = s.clone();
    rev.reverse();
    assert_eq!(meteor_alignment(&s, &rev).matches(), 40);
}

#[test]
fn rouge_examples() {
    assert_eq!(rouge_l_tokens(&toks("a b c"), &[toks("a b c")]), 1.0);
    assert!((rouge_l_tokens(&toks("a b c d"), &[toks("a c b d")]) - 0.75).abs() < 1e-12);
    assert_eq!(lcs_len(&toks("a b c d"), &toks("a c b d")), 3);
}

#[test]
fn cider_examples() {
    let pairs = vec![
        EvalPair::new("a", "one two three four five", vec!["one two three four five".into()]),
        EvalPair::new("b", "six seven", vec!["eight nine ten".into()]),
    ];
    let (_, each) = cider(&pairs).unwrap();
    assert!((each[0] - 10.0).abs() < 1e-12);
    assert_eq!(each[1], 0.0);
    // Only unigrams and bigrams exist for a two-token story.
    let short = vec![
        EvalPair::new("a", "one two", vec!["one two".into()]),
        EvalPair::new("b", "x", vec!["y".into()]),
    ];
    assert!((cider(&short).unwrap().1[0] - 5.0).abs() < 1e-12);
    assert_eq!(
        cider(&pairs[..1]).unwrap_err(),
        MetricsError::CiderCorpusTooSmall(1)
    );
}

#[test]
fn identity_corpus_scores() {
    let texts = ["the dog ran to the park .", "a cat sat . it was happy", "we walked home and the dogs slept"];
    let pairs: Vec<EvalPair> = texts
        .iter()
        .enumerate()
        .map(|(i, t)| EvalPair::new(format!("{i}"), *t, vec![t.to_string()]))
        .collect();
    let report = evaluate_corpus(&pairs).unwrap();
    assert_eq!(report.bleu, [1.0; 4]);
    assert_eq!(report.rouge_l, 1.0);
    for (s, t) in report.per_story.iter().zip(texts) {
        let m = storyteller_core::text::tokenize(t).len() as f64;
        assert!((s.meteor - (1.0 - 0.5 / m.powi(3))).abs() < 1e-12);
    }
}

#[test]
fn empty_candidates_score_zero() {
    let pairs = vec![
        EvalPair::new("a", "", vec!["the cat".into()]),
        EvalPair::new("b", "", vec!["a dog".into()]),
    ];
    let r = evaluate_corpus(&pairs).unwrap();
    assert_eq!(r.columns(), [0.0; 7]);
}

#[test]
fn table_row_formatting() {
    let r = MetricReport {
        bleu: [0.601, 0.365, 0.211, 0.127],
        meteor: 0.344,
        rouge_l: 0.292,
        cider: 0.051,
        per_story: vec![],
    };
    assert_eq!(r.percent_row(), "60.1 | 36.5 | 21.1 | 12.7 | 34.4 | 29.2 | 5.1");
    assert_eq!(r.fraction_row(), "0.6010 | 0.3650 | 0.2110 | 0.1270 | 0.3440 | 0.2920 | 0.0510");
    let table = r.render_table();
    assert!(table.starts_with("scale    | BLEU-1 | BLEU-2 | BLEU-3 | BLEU-4 | METEOR | ROUGE-L | CIDEr\n"));
}

#[test]
fn report_json_round_trips() {
    let pairs = as_eval(&random_pairs(3, 5));
    let report = evaluate_corpus(&pairs).unwrap();
    let json = serde_json::to_string(&report).unwrap();
    let back: MetricReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back, report);
    assert_eq!(back.render_table(), report.render_table());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn scores_stay_in_range(seed in 0u64..10_000) {
        let pairs = as_eval(&random_pairs(seed, 4));
        let r = evaluate_corpus(&pairs).unwrap();
        for v in [r.bleu[0], r.bleu[1], r.bleu[2], r.bleu[3], r.meteor, r.rouge_l] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert!((0.0..=10.0).contains(&r.cider));
        for s in &r.per_story {
            prop_assert!((0.0..=1.0).contains(&s.meteor) && (0.0..=1.0).contains(&s.rouge_l));
            prop_assert!((0.0..=10.0).contains(&s.cider));
        }
        prop_assert_eq!(evaluate_corpus(&pairs).unwrap(), r);
    }

    #[test]
    fn appending_a_reference_word_never_lowers_clipped_unigram_matches(seed in 0u64..10_000, pick in 0usize..10) {
        let mut pairs = as_eval(&random_pairs(seed, 1));
        let reference = pairs[0].references[0].clone();
        let words: Vec<&str> = reference.split(' ').collect();
        let word = words[pick % words.len()].to_string();
        let before = bleu_stats(&pairs, 1).unwrap().matches[0];
        pairs[0].candidate = format!("{} {}", pairs[0].candidate, word);
        prop_assert!(bleu_stats(&pairs, 1).unwrap().matches[0] >= before);
    }
}
