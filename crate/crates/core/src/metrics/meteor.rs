//! Unigram METEOR with exact and stem matching.
//!
//! Two tokens may align when their stems agree; an exact surface match is
//! preferred. Among alignments the best one maximizes exact matches, then
//! total matches, then minimizes chunks. For up to [`EXHAUSTIVE_MAX_MATCHES`]
//! possible matches this is found by memoized search; otherwise, or if the
//! search outgrows its state budget, a greedy left-to-right aligner is used
//! that still reaches the maximum match counts but may leave extra chunks.

use std::collections::HashMap;

use rust_stemmers::{Algorithm, Stemmer};

use super::EvalPair;
use crate::text::tokenize;

pub const EXHAUSTIVE_MAX_MATCHES: usize = 12;
const STATE_BUDGET: usize = 1 << 20;

/// Snowball English stem of a lowercased token.
pub fn stem(word: &str) -> String {
    Stemmer::create(Algorithm::English).stem(word).into_owned()
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Alignment {
    /// `(candidate index, reference index)`, sorted by candidate index.
    pub pairs: Vec<(usize, usize)>,
    pub exact: usize,
    pub chunks: usize,
}

impl Alignment {
    pub fn matches(&self) -> usize {
        self.pairs.len()
    }

    fn from_pairs(mut pairs: Vec<(usize, usize)>, cand: &[&str], reference: &[&str]) -> Self {
        pairs.sort_unstable();
        let exact = pairs.iter().filter(|&&(i, j)| cand[i] == reference[j]).count();
        let mut chunks = 0;
        let mut last: Option<(usize, usize)> = None;
        for &(i, j) in &pairs {
            if last != Some((i.wrapping_sub(1), j.wrapping_sub(1))) {
                chunks += 1;
            }
            last = Some((i, j));
        }
        Self { pairs, exact, chunks }
    }

    /// METEOR score of this alignment for the given lengths.
    pub fn score(&self, cand_len: usize, ref_len: usize) -> f64 {
        let m = self.matches();
        if m == 0 {
            return 0.0;
        }
        let p = m as f64 / cand_len as f64;
        let r = m as f64 / ref_len as f64;
        let fmean = 10.0 * p * r / (r + 9.0 * p);
        let penalty = 0.5 * (self.chunks as f64 / m as f64).powi(3);
        fmean * (1.0 - penalty)
    }
}

fn max_matches(cand_stems: &[String], ref_stems: &[String]) -> usize {
    let mut counts: HashMap<&str, (usize, usize)> = HashMap::new();
    for s in cand_stems {
        counts.entry(s).or_default().0 += 1;
    }
    for s in ref_stems {
        counts.entry(s).or_default().1 += 1;
    }
    counts.values().map(|&(a, b)| a.min(b)).sum()
}

/// (exact, total, adjacent pairs), compared lexicographically.
type Value = (u32, u32, u32);

struct Search<'a> {
    compat: Vec<Vec<(usize, bool)>>,
    slot: &'a [usize],
    memo: HashMap<(usize, u128, usize), Value>,
}

const NO_PREV: usize = usize::MAX;

impl Search<'_> {
    fn solve(&mut self, i: usize, used: u128, prev: usize) -> Option<Value> {
        if i == self.compat.len() {
            return Some((0, 0, 0));
        }
        if let Some(&v) = self.memo.get(&(i, used, prev)) {
            return Some(v);
        }
        if self.memo.len() >= STATE_BUDGET {
            return None;
        }
        let mut best = self.solve(i + 1, used, NO_PREV)?;
        for k in 0..self.compat[i].len() {
            let (j, exact) = self.compat[i][k];
            let bit = 1u128 << self.slot[j];
            if used & bit != 0 {
                continue;
            }
            let sub = self.solve(i + 1, used | bit, j)?;
            let adj = prev != NO_PREV && prev + 1 == j;
            let v = (sub.0 + exact as u32, sub.1 + 1, sub.2 + adj as u32);
            if v > best {
                best = v;
            }
        }
        self.memo.insert((i, used, prev), best);
        Some(best)
    }

    fn reconstruct(&mut self) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        let (mut used, mut prev) = (0u128, NO_PREV);
        for i in 0..self.compat.len() {
            let target = self.solve(i, used, prev).expect("memoized");
            let skip = self.solve(i + 1, used, NO_PREV).expect("memoized");
            if skip == target {
                prev = NO_PREV;
                continue;
            }
            let mut chosen = None;
            for &(j, exact) in &self.compat[i].clone() {
                let bit = 1u128 << self.slot[j];
                if used & bit != 0 {
                    continue;
                }
                let sub = self.solve(i + 1, used | bit, j).expect("memoized");
                let adj = prev != NO_PREV && prev + 1 == j;
                if (sub.0 + exact as u32, sub.1 + 1, sub.2 + adj as u32) == target {
                    chosen = Some(j);
                    break;
                }
            }
            let j = chosen.expect("the optimum is reachable from some choice");
            pairs.push((i, j));
            used |= 1u128 << self.slot[j];
            prev = j;
        }
        pairs
    }
}

fn exhaustive(cand: &[&str], reference: &[&str], cs: &[String], rs: &[String]) -> Option<Vec<(usize, usize)>> {
    // Only reference positions some candidate token can reach get a bit.
    let mut slot = vec![usize::MAX; reference.len()];
    let mut next = 0;
    let compat: Vec<Vec<(usize, bool)>> = cs
        .iter()
        .enumerate()
        .map(|(i, s)| {
            rs.iter()
                .enumerate()
                .filter(|(_, r)| *r == s)
                .map(|(j, _)| (j, cand[i] == reference[j]))
                .collect()
        })
        .collect();
    for list in &compat {
        for &(j, _) in list {
            if slot[j] == usize::MAX {
                slot[j] = next;
                next += 1;
            }
        }
    }
    if next > 128 {
        return None;
    }
    let mut search = Search {
        compat,
        slot: &slot,
        memo: HashMap::new(),
    };
    search.solve(0, 0, NO_PREV)?;
    Some(search.reconstruct())
}

fn greedy(cand: &[&str], reference: &[&str], cs: &[String], rs: &[String]) -> Vec<(usize, usize)> {
    let mut cand_match: Vec<Option<usize>> = vec![None; cand.len()];
    let mut ref_used = vec![false; reference.len()];
    let stages: [&dyn Fn(usize, usize) -> bool; 2] = [&|i, j| cand[i] == reference[j], &|i, j| cs[i] == rs[j]];
    for same in stages {
        for i in 0..cand.len() {
            if cand_match[i].is_some() {
                continue;
            }
            let follow = i.checked_sub(1).and_then(|p| cand_match[p]).map(|j| j + 1);
            let pick = follow
                .filter(|&j| j < reference.len() && !ref_used[j] && same(i, j))
                .or_else(|| (0..reference.len()).find(|&j| !ref_used[j] && same(i, j)));
            if let Some(j) = pick {
                cand_match[i] = Some(j);
                ref_used[j] = true;
            }
        }
    }
    cand_match
        .iter()
        .enumerate()
        .filter_map(|(i, m)| m.map(|j| (i, j)))
        .collect()
}

/// Best alignment of `cand` against one reference.
pub fn meteor_alignment<S: AsRef<str>>(cand: &[S], reference: &[S]) -> Alignment {
    let cand: Vec<&str> = cand.iter().map(AsRef::as_ref).collect();
    let reference: Vec<&str> = reference.iter().map(AsRef::as_ref).collect();
    let cs: Vec<String> = cand.iter().map(|w| stem(w)).collect();
    let rs: Vec<String> = reference.iter().map(|w| stem(w)).collect();
    let m = max_matches(&cs, &rs);
    if m == 0 {
        return Alignment::default();
    }
    let pairs = if m <= EXHAUSTIVE_MAX_MATCHES {
        exhaustive(&cand, &reference, &cs, &rs).unwrap_or_else(|| greedy(&cand, &reference, &cs, &rs))
    } else {
        greedy(&cand, &reference, &cs, &rs)
    };
    Alignment::from_pairs(pairs, &cand, &reference)
}

/// Best score over the references.
pub fn meteor_tokens<S: AsRef<str>>(cand: &[S], refs: &[Vec<S>]) -> f64 {
    refs.iter()
        .map(|r| meteor_alignment(cand, r).score(cand.len(), r.len()))
        .fold(0.0, f64::max)
}

pub fn meteor(pair: &EvalPair) -> f64 {
    let refs: Vec<Vec<String>> = pair.references.iter().map(|r| tokenize(r)).collect();
    meteor_tokens(&tokenize(&pair.candidate), &refs)
}
