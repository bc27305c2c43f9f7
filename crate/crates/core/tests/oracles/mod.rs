//! Deliberately naive re-derivations of the story metrics and a random
//! small-pair generator, shared by the metric and acceptance tests.

#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use storyteller_core::metrics::{stem, EvalPair};

pub const WORDS: [&str; 12] = ["the", "a", "cat", "cats", "dog", "dogs", "run", "running", "runs", "park", "walk", "walked"];

pub fn words(rng: &mut ChaCha8Rng, min: usize, max: usize) -> Vec<String> {
    let n = rng.gen_range(min..=max);
    (0..n).map(|_| WORDS[rng.gen_range(0..WORDS.len())].to_string()).collect()
}

pub fn random_pairs(seed: u64, n: usize) -> Vec<(Vec<String>, Vec<Vec<String>>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let cand = words(&mut rng, 0, 10);
            let refs = (0..rng.gen_range(1..=3)).map(|_| words(&mut rng, 1, 10)).collect();
            (cand, refs)
        })
        .collect()
}

pub fn as_eval(pairs: &[(Vec<String>, Vec<Vec<String>>)]) -> Vec<EvalPair> {
    pairs
        .iter()
        .enumerate()
        .map(|(i, (c, r))| EvalPair::new(format!("s{i}"), c.join(" "), r.iter().map(|x| x.join(" ")).collect()))
        .collect()
}

pub fn count_occurrences(hay: &[String], gram: &[String]) -> usize {
    if gram.len() > hay.len() {
        return 0;
    }
    (0..=hay.len() - gram.len()).filter(|&i| hay[i..i + gram.len()] == *gram).count()
}

pub fn naive_bleu(pairs: &[(Vec<String>, Vec<Vec<String>>)], n_max: usize) -> Vec<f64> {
    let mut c_len = 0usize;
    let mut r_len = 0usize;
    let mut num = vec![0usize; n_max];
    let mut den = vec![0usize; n_max];
    for (cand, refs) in pairs {
        c_len += cand.len();
        let mut best = refs[0].len();
        for r in refs {
            let (d, bd) = ((r.len() as i64 - cand.len() as i64).abs(), (best as i64 - cand.len() as i64).abs());
            if d < bd || (d == bd && r.len() < best) {
                best = r.len();
            }
        }
        r_len += best;
        for n in 1..=n_max {
            if cand.len() < n {
                continue;
            }
            let mut seen: Vec<&[String]> = Vec::new();
            for i in 0..=cand.len() - n {
                let g = &cand[i..i + n];
                den[n - 1] += 1;
                if seen.contains(&g) {
                    continue;
                }
                seen.push(g);
                let c = count_occurrences(cand, g);
                let m = refs.iter().map(|r| count_occurrences(r, g)).max().unwrap();
                num[n - 1] += c.min(m);
            }
        }
    }
    let bp = if c_len == 0 {
        0.0
    } else if c_len > r_len {
        1.0
    } else {
        (1.0 - r_len as f64 / c_len as f64).exp()
    };
    (1..=n_max)
        .map(|n| {
            let mut logs = 0.0;
            for k in 0..n {
                if num[k] == 0 {
                    return 0.0;
                }
                logs += (num[k] as f64 / den[k] as f64).ln();
            }
            bp * (logs / n as f64).exp()
        })
        .collect()
}

/// Every one-to-one alignment, scored by (exact, total, -chunks).
pub fn naive_meteor_one(cand: &[String], reference: &[String]) -> f64 {
    let cs: Vec<String> = cand.iter().map(|w| stem(w)).collect();
    let rs: Vec<String> = reference.iter().map(|w| stem(w)).collect();
    let mut best: Option<(usize, usize, i64)> = None;
    let mut assign: Vec<Option<usize>> = vec![None; cand.len()];
    fn rec(
        i: usize,
        cand: &[String],
        reference: &[String],
        cs: &[String],
        rs: &[String],
        assign: &mut Vec<Option<usize>>,
        used: &mut Vec<bool>,
        best: &mut Option<(usize, usize, i64)>,
    ) {
        if i == cand.len() {
            let pairs: Vec<(usize, usize)> = assign.iter().enumerate().filter_map(|(i, a)| a.map(|j| (i, j))).collect();
            let exact = pairs.iter().filter(|&&(i, j)| cand[i] == reference[j]).count();
            let mut chunks = 0i64;
            for (k, &(i, j)) in pairs.iter().enumerate() {
                if k == 0 || !(pairs[k - 1].0 + 1 == i && pairs[k - 1].1 + 1 == j) {
                    chunks += 1;
                }
            }
            let key = (exact, pairs.len(), -chunks);
            if best.is_none_or(|b| key > b) {
                *best = Some(key);
            }
            return;
        }
        rec(i + 1, cand, reference, cs, rs, assign, used, best);
        for j in 0..reference.len() {
            if !used[j] && cs[i] == rs[j] {
                used[j] = true;
                assign[i] = Some(j);
                rec(i + 1, cand, reference, cs, rs, assign, used, best);
                assign[i] = None;
                used[j] = false;
            }
        }
    }
    let mut used = vec![false; reference.len()];
    rec(0, cand, reference, &cs, &rs, &mut assign, &mut used, &mut best);
    let (_, m, neg_chunks) = best.unwrap();
    if m == 0 {
        return 0.0;
    }
    let p = m as f64 / cand.len() as f64;
    let r = m as f64 / reference.len() as f64;
    let f = 10.0 * p * r / (r + 9.0 * p);
    f * (1.0 - 0.5 * ((-neg_chunks) as f64 / m as f64).powi(3))
}

pub fn naive_meteor(cand: &[String], refs: &[Vec<String>]) -> f64 {
    refs.iter().map(|r| naive_meteor_one(cand, r)).fold(0.0, f64::max)
}

/// Longest common subsequence by trying every subsequence of the candidate.
pub fn naive_lcs(a: &[String], b: &[String]) -> usize {
    let mut best = 0;
    for mask in 0u32..(1 << a.len()) {
        let sub: Vec<&String> = (0..a.len()).filter(|i| mask >> i & 1 == 1).map(|i| &a[i]).collect();
        if sub.len() <= best {
            continue;
        }
        let mut it = b.iter();
        if sub.iter().all(|w| it.any(|x| x == *w)) {
            best = sub.len();
        }
    }
    best
}

pub fn naive_rouge(cand: &[String], refs: &[Vec<String>]) -> f64 {
    refs.iter()
        .map(|r| {
            let l = naive_lcs(cand, r) as f64;
            if l == 0.0 {
                return 0.0;
            }
            let (p, rc) = (l / cand.len() as f64, l / r.len() as f64);
            (1.0 + 1.44) * p * rc / (rc + 1.44 * p)
        })
        .fold(0.0, f64::max)
}

pub fn grams(tokens: &[String], n: usize) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    if tokens.len() >= n {
        for i in 0..=tokens.len() - n {
            *out.entry(tokens[i..i + n].join("\u{1}")).or_insert(0.0) += 1.0;
        }
    }
    out
}

pub fn naive_cider(pairs: &[(Vec<String>, Vec<Vec<String>>)]) -> Vec<f64> {
    let big_n = pairs.len() as f64;
    let doc_freq = |g: &str, n: usize| -> f64 {
        pairs
            .iter()
            .filter(|(_, refs)| refs.iter().any(|r| grams(r, n).contains_key(g)))
            .count() as f64
    };
    pairs
        .iter()
        .map(|(cand, refs)| {
            let mut total = 0.0;
            for n in 1..=4 {
                let weigh = |m: BTreeMap<String, f64>| -> BTreeMap<String, f64> {
                    m.into_iter()
                        .map(|(g, c)| {
                            let df = doc_freq(&g, n).max(1.0);
                            let w = c * (big_n / df).ln();
                            (g, w)
                        })
                        .collect()
                };
                let cv = weigh(grams(cand, n));
                let mut s = 0.0;
                for r in refs {
                    let rv = weigh(grams(r, n));
                    let dot: f64 = cv.iter().map(|(g, v)| v * rv.get(g).unwrap_or(&0.0)).sum();
                    let nc = cv.values().map(|v| v * v).sum::<f64>().sqrt();
                    let nr = rv.values().map(|v| v * v).sum::<f64>().sqrt();
                    s += if nc * nr == 0.0 { 0.0 } else { dot / (nc * nr) };
                }
                total += s / refs.len() as f64;
            }
            10.0 * total / 4.0
        })
        .collect()
}
