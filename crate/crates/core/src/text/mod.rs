//! Tokenization, vocabulary and skip-gram word embeddings.

mod embedding;
mod skipgram;
mod tokenize;
mod vocab;

pub use embedding::EmbeddingTable;
pub use skipgram::{context_pairs, cosine, initial_embeddings, train_skipgram, SkipGramConfig, SkipGramOutcome};
pub use tokenize::{detokenize, tokenize};
pub use vocab::{Vocab, BOS, EOS, PAD, SPECIAL_TOKENS, UNK};

#[derive(Debug, thiserror::Error)]
pub enum TextError {
    #[error("corpus has {tokens} tokens, fewer than window + 1 = {}", window + 1)]
    CorpusTooShort { tokens: usize, window: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid vocabulary: {0}")]
    InvalidVocab(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
