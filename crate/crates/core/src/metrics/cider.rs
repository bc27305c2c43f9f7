use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;

use super::{ngram_counts, tokenize_pairs, EvalPair, MetricsError, Tokenized};

pub const CIDER_MAX_N: usize = 4;

type Weighted<'a> = BTreeMap<Vec<&'a str>, f64>;

fn tfidf<'a>(counts: BTreeMap<Vec<&'a str>, usize>, df: &HashMap<Vec<&str>, usize>, n_docs: f64) -> Weighted<'a> {
    counts
        .into_iter()
        .map(|(g, c)| {
            let d = df.get(&g).copied().unwrap_or(0).max(1) as f64;
            (g, c as f64 * (n_docs / d).ln())
        })
        .collect()
}

fn cosine(a: &Weighted<'_>, b: &Weighted<'_>) -> f64 {
    let na: f64 = a.values().map(|v| v * v).sum::<f64>().sqrt();
    let nb: f64 = b.values().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.iter().map(|(g, v)| v * b.get(g).copied().unwrap_or(0.0)).sum();
    (dot / (na * nb)).clamp(0.0, 1.0)
}

/// Mean CIDEr and the per-story scores, each in [0, 10].
pub(crate) fn cider_tokenized(pairs: &[Tokenized]) -> Result<(f64, Vec<f64>), MetricsError> {
    if pairs.len() < 2 {
        return Err(MetricsError::CiderCorpusTooSmall(pairs.len()));
    }
    let n_docs = pairs.len() as f64;
    // Document frequency over each story's reference set.
    let mut df: Vec<HashMap<Vec<&str>, usize>> = vec![HashMap::new(); CIDER_MAX_N];
    for p in pairs {
        for (n, table) in df.iter_mut().enumerate() {
            let seen: BTreeSet<Vec<&str>> = p.refs.iter().flat_map(|r| ngram_counts(r, n + 1).into_keys()).collect();
            for g in seen {
                *table.entry(g).or_insert(0) += 1;
            }
        }
    }
    let scores: Vec<f64> = pairs
        .par_iter()
        .map(|p| {
            let mut sum = 0.0;
            for (n, table) in df.iter().enumerate() {
                let cand = tfidf(ngram_counts(&p.cand, n + 1), table, n_docs);
                let total: f64 = p
                    .refs
                    .iter()
                    .map(|r| cosine(&cand, &tfidf(ngram_counts(r, n + 1), table, n_docs)))
                    .sum();
                sum += total / p.refs.len() as f64;
            }
            10.0 * sum / CIDER_MAX_N as f64
        })
        .collect();
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    Ok((mean, scores))
}

pub fn cider(pairs: &[EvalPair]) -> Result<(f64, Vec<f64>), MetricsError> {
    cider_tokenized(&tokenize_pairs(pairs)?)
}

/// [`cider`] over pre-tokenized candidates and their reference sets.
pub fn cider_tokens(cands: &[Vec<String>], refs: &[Vec<Vec<String>>]) -> Result<(f64, Vec<f64>), MetricsError> {
    let pairs: Vec<Tokenized> = cands
        .iter()
        .zip(refs)
        .map(|(c, r)| Tokenized {
            cand: c.clone(),
            refs: r.clone(),
        })
        .collect();
    cider_tokenized(&pairs)
}
