//! Automatic story metrics: corpus BLEU-1..4, METEOR (exact and stem
//! matching), ROUGE-L and CIDEr.
//!
//! Each candidate is a whole story (five segments joined) scored against the
//! whole reference stories. Text goes through [`crate::text::tokenize`] first.

mod bleu;
mod cider;
mod meteor;
mod rouge;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::text::tokenize;

pub use bleu::{bleu, bleu_stats, bleu_tokens, BleuStats};
pub use cider::{cider, cider_tokens, CIDER_MAX_N};
pub use meteor::{meteor, meteor_alignment, meteor_tokens, stem, Alignment, EXHAUSTIVE_MAX_MATCHES};
pub use rouge::{lcs_len, rouge_l, rouge_l_tokens, ROUGE_BETA};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("story {0} has no references")]
    NoReferences(String),
    #[error("BLEU order {0} is outside 1..=4")]
    BleuOrder(usize),
    #[error("CIDEr needs at least 2 stories, got {0}")]
    CiderCorpusTooSmall(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalPair {
    pub story_id: String,
    pub candidate: String,
    pub references: Vec<String>,
}

impl EvalPair {
    pub fn new(story_id: impl Into<String>, candidate: impl Into<String>, references: Vec<String>) -> Self {
        Self {
            story_id: story_id.into(),
            candidate: candidate.into(),
            references,
        }
    }
}

pub(crate) struct Tokenized {
    pub cand: Vec<String>,
    pub refs: Vec<Vec<String>>,
}

pub(crate) fn tokenize_pairs(pairs: &[EvalPair]) -> Result<Vec<Tokenized>, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    pairs
        .iter()
        .map(|p| {
            if p.references.is_empty() {
                return Err(MetricsError::NoReferences(p.story_id.clone()));
            }
            Ok(Tokenized {
                cand: tokenize(&p.candidate),
                refs: p.references.iter().map(|r| tokenize(r)).collect(),
            })
        })
        .collect()
}

/// Counts of every `n`-gram of `tokens`, in a fixed iteration order so float
/// sums over them are reproducible.
pub fn ngram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> BTreeMap<Vec<&str>, usize> {
    let mut out = BTreeMap::new();
    if n == 0 || tokens.len() < n {
        return out;
    }
    for w in tokens.windows(n) {
        *out.entry(w.iter().map(AsRef::as_ref).collect()).or_insert(0) += 1;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoryScores {
    pub story_id: String,
    /// Sentence-level BLEU-1..4 of this story alone.
    pub bleu: [f64; 4],
    pub meteor: f64,
    pub rouge_l: f64,
    pub cider: f64,
}

/// All scores are fractions; CIDEr lies in [0, 10], everything else in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub bleu: [f64; 4],
    pub meteor: f64,
    pub rouge_l: f64,
    pub cider: f64,
    pub per_story: Vec<StoryScores>,
}

pub const TABLE_COLUMNS: [&str; 7] = ["BLEU-1", "BLEU-2", "BLEU-3", "BLEU-4", "METEOR", "ROUGE-L", "CIDEr"];

impl MetricReport {
    /// Corpus scores in column order.
    pub fn columns(&self) -> [f64; 7] {
        [
            self.bleu[0],
            self.bleu[1],
            self.bleu[2],
            self.bleu[3],
            self.meteor,
            self.rouge_l,
            self.cider,
        ]
    }

    /// Scores ×100 with one decimal, e.g. `60.1 | 36.5 | ... | 5.1`.
    pub fn percent_row(&self) -> String {
        self.columns()
            .iter()
            .map(|v| format!("{:.1}", v * 100.0))
            .collect::<Vec<_>>()
            .join(" | ")
    }

    /// Raw fractions with four decimals.
    pub fn fraction_row(&self) -> String {
        self.columns()
            .iter()
            .map(|v| format!("{v:.4}"))
            .collect::<Vec<_>>()
            .join(" | ")
    }

    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "scale    | {}", TABLE_COLUMNS.join(" | "));
        let _ = writeln!(out, "percent  | {}", self.percent_row());
        let _ = writeln!(out, "fraction | {}", self.fraction_row());
        out
    }
}

/// Runs every metric over the corpus.
pub fn evaluate_corpus(pairs: &[EvalPair]) -> Result<MetricReport, MetricsError> {
    let toks = tokenize_pairs(pairs)?;
    let corpus_bleu = bleu::bleu_tokenized(&toks, 4)?;
    let (cider_mean, cider_each) = cider::cider_tokenized(&toks)?;
    let per_story: Vec<StoryScores> = toks
        .par_iter()
        .zip(pairs)
        .zip(&cider_each)
        .map(|((t, p), &c)| {
            let single = bleu::bleu_tokenized(std::slice::from_ref(t), 4).expect("one pair with references");
            StoryScores {
                story_id: p.story_id.clone(),
                bleu: [single[0], single[1], single[2], single[3]],
                meteor: meteor_tokens(&t.cand, &t.refs),
                rouge_l: rouge_l_tokens(&t.cand, &t.refs),
                cider: c,
            }
        })
        .collect();
    let n = per_story.len() as f64;
    Ok(MetricReport {
        bleu: [corpus_bleu[0], corpus_bleu[1], corpus_bleu[2], corpus_bleu[3]],
        meteor: per_story.iter().map(|s| s.meteor).sum::<f64>() / n,
        rouge_l: per_story.iter().map(|s| s.rouge_l).sum::<f64>() / n,
        cider: cider_mean,
        per_story,
    })
}
