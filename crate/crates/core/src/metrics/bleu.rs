use super::{ngram_counts, tokenize_pairs, EvalPair, MetricsError, Tokenized};

/// Corpus-level sufficient statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct BleuStats {
    /// Clipped matches per order 1..=n_max.
    pub matches: Vec<usize>,
    /// Candidate n-gram totals per order.
    pub totals: Vec<usize>,
    pub cand_len: usize,
    pub ref_len: usize,
}

impl BleuStats {
    fn collect(pairs: &[Tokenized], n_max: usize) -> Self {
        let mut s = BleuStats {
            matches: vec![0; n_max],
            totals: vec![0; n_max],
            cand_len: 0,
            ref_len: 0,
        };
        for p in pairs {
            s.cand_len += p.cand.len();
            s.ref_len += closest_ref_len(p.cand.len(), &p.refs);
            for n in 1..=n_max {
                let cand = ngram_counts(&p.cand, n);
                let ref_counts: Vec<_> = p.refs.iter().map(|r| ngram_counts(r, n)).collect();
                for (gram, &c) in &cand {
                    let max_ref = ref_counts.iter().map(|rc| rc.get(gram).copied().unwrap_or(0)).max().unwrap_or(0);
                    s.matches[n - 1] += c.min(max_ref);
                }
                s.totals[n - 1] += p.cand.len().saturating_sub(n - 1);
            }
        }
        s
    }

    /// BLEU-n for every n up to the collected order.
    pub fn scores(&self) -> Vec<f64> {
        let bp = if self.cand_len == 0 {
            0.0
        } else if self.cand_len > self.ref_len {
            1.0
        } else {
            (1.0 - self.ref_len as f64 / self.cand_len as f64).exp()
        };
        let mut log_sum = 0.0;
        let mut out = Vec::with_capacity(self.matches.len());
        let mut zero = false;
        for (k, (&m, &t)) in self.matches.iter().zip(&self.totals).enumerate() {
            if m == 0 || t == 0 {
                zero = true;
            } else {
                log_sum += (m as f64 / t as f64).ln();
            }
            out.push(if zero { 0.0 } else { bp * (log_sum / (k + 1) as f64).exp() });
        }
        out
    }
}

/// Reference length closest to `c`; the shorter one wins ties.
fn closest_ref_len(c: usize, refs: &[Vec<String>]) -> usize {
    refs.iter()
        .map(Vec::len)
        .min_by_key(|&r| (r.abs_diff(c), r))
        .unwrap_or(0)
}

pub(crate) fn bleu_tokenized(pairs: &[Tokenized], n_max: usize) -> Result<Vec<f64>, MetricsError> {
    if !(1..=4).contains(&n_max) {
        return Err(MetricsError::BleuOrder(n_max));
    }
    if pairs.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    Ok(BleuStats::collect(pairs, n_max).scores())
}

/// Clipped match counts and lengths behind [`bleu`].
pub fn bleu_stats(pairs: &[EvalPair], n_max: usize) -> Result<BleuStats, MetricsError> {
    let toks = tokenize_pairs(pairs)?;
    if !(1..=4).contains(&n_max) {
        return Err(MetricsError::BleuOrder(n_max));
    }
    Ok(BleuStats::collect(&toks, n_max))
}

/// Corpus BLEU-1..=`n_max`, unsmoothed.
pub fn bleu(pairs: &[EvalPair], n_max: usize) -> Result<Vec<f64>, MetricsError> {
    bleu_tokenized(&tokenize_pairs(pairs)?, n_max)
}

/// [`bleu`] over pre-tokenized candidates and their reference sets.
pub fn bleu_tokens(cands: &[Vec<String>], refs: &[Vec<Vec<String>>], n_max: usize) -> Result<Vec<f64>, MetricsError> {
    let pairs: Vec<Tokenized> = cands
        .iter()
        .zip(refs)
        .map(|(c, r)| Tokenized {
            cand: c.clone(),
            refs: r.clone(),
        })
        .collect();
    bleu_tokenized(&pairs, n_max)
}
