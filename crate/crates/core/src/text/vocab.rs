use std::collections::HashMap;

use super::TextError;

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;
pub const SPECIAL_TOKENS: [&str; 4] = ["<pad>", "<bos>", "<eos>", "<unk>"];

/// Token ↔ id mapping. Ids 0..3 are reserved for the special tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocab {
    tokens: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
}

impl Vocab {
    /// Tokens with frequency ≥ `min_count` get ids in descending-frequency
    /// order (ties lexicographic) after the reserved ids.
    pub fn build<S: AsRef<str>>(corpus: &[Vec<S>], min_count: u64) -> Self {
        let min_count = min_count.max(1);
        let mut freq: HashMap<&str, u64> = HashMap::new();
        for sentence in corpus {
            for tok in sentence {
                let tok = tok.as_ref();
                if SPECIAL_TOKENS.contains(&tok) {
                    continue;
                }
                *freq.entry(tok).or_default() += 1;
            }
        }
        let mut kept: Vec<(&str, u64)> = freq.into_iter().filter(|&(_, c)| c >= min_count).collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

        let mut tokens: Vec<String> = SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect();
        let mut counts = vec![0; SPECIAL_TOKENS.len()];
        for (tok, c) in kept {
            tokens.push(tok.to_string());
            counts.push(c);
        }
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { tokens, counts, index }
    }

    /// Rebuilds a vocab from its id-ordered tokens, e.g. when loading a checkpoint.
    pub fn from_parts(tokens: Vec<String>, counts: Vec<u64>) -> Result<Self, TextError> {
        if tokens.len() != counts.len() {
            return Err(TextError::InvalidVocab(format!(
                "{} tokens but {} counts",
                tokens.len(),
                counts.len()
            )));
        }
        if tokens.len() < SPECIAL_TOKENS.len()
            || tokens.iter().zip(SPECIAL_TOKENS).any(|(t, s)| t != s)
        {
            return Err(TextError::InvalidVocab("reserved ids 0..3 are not the special tokens".into()));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(TextError::InvalidVocab(format!("duplicate token {t:?}")));
            }
        }
        Ok(Self { tokens, counts, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn count(&self, id: usize) -> u64 {
        self.counts.get(id).copied().unwrap_or(0)
    }

    pub fn ids_of<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    /// Unknown ids render as `<unk>`.
    pub fn tokens_of(&self, ids: &[usize]) -> Vec<&str> {
        ids.iter()
            .map(|&i| self.token(i).unwrap_or(SPECIAL_TOKENS[UNK]))
            .collect()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }
}
