use super::EvalPair;
use crate::text::tokenize;

/// Recall weight in the F-measure.
pub const ROUGE_BETA: f64 = 1.2;

pub fn lcs_len<S: AsRef<str>>(a: &[S], b: &[S]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x.as_ref() == y.as_ref() {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn f_measure(lcs: usize, cand: usize, reference: usize) -> f64 {
    if lcs == 0 {
        return 0.0;
    }
    let p = lcs as f64 / cand as f64;
    let r = lcs as f64 / reference as f64;
    let b2 = ROUGE_BETA * ROUGE_BETA;
    (1.0 + b2) * p * r / (r + b2 * p)
}

/// Best LCS F-measure over the references.
pub fn rouge_l_tokens<S: AsRef<str>>(cand: &[S], refs: &[Vec<S>]) -> f64 {
    refs.iter()
        .map(|r| f_measure(lcs_len(cand, r), cand.len(), r.len()))
        .fold(0.0, f64::max)
}

pub fn rouge_l(pair: &EvalPair) -> f64 {
    let refs: Vec<Vec<String>> = pair.references.iter().map(|r| tokenize(r)).collect();
    rouge_l_tokens(&tokenize(&pair.candidate), &refs)
}
