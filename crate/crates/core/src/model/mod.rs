//! The storytelling network.
//!
//! An encoder LSTM reads the five projected image embeddings in order and its
//! final state becomes the context vector. Five decoder LSTMs with separate
//! weights and output heads all start from that context; decoder `k` takes
//! the projected embedding of image `k` as its first input and then its own
//! previous words. The story is the five segments in image order.

mod decode;
mod loss;
mod params;
mod stack;

use serde::{Deserialize, Serialize};

use crate::numerics::{LstmState, NumericsError};
use crate::text::{Vocab, EOS};

pub use decode::{beam_search, decode_segment, encode_sequence, generate_story, DecodeConfig};
pub use loss::{example_loss, forward_loss, LossSum};
pub use params::{ModelConfig, OutputHead, StoryParams, TensorView};

/// Images per sequence, and therefore decoders per model.
pub const SEGMENTS: usize = 5;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("decoder position {0} is outside 1..=5")]
    InvalidPosition(usize),
    #[error("an image sequence needs exactly 5 images, got {0}")]
    SequenceLength(usize),
    #[error("image {photo_id:?} has dimension {got}, expected {expected}")]
    ImageDim {
        photo_id: String,
        expected: usize,
        got: usize,
    },
    #[error("token id {token} outside vocabulary of size {vocab_size}")]
    TokenOutOfRange { token: usize, vocab_size: usize },
    #[error("reference story has no tokens")]
    EmptyReference,
    #[error("reference story has {0} segments, expected 5")]
    ReferenceSegments(usize),
    #[error("inconsistent model shapes: {0}")]
    Shape(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageEmbedding {
    pub photo_id: String,
    pub values: Vec<f64>,
}

impl ImageEmbedding {
    pub fn new(photo_id: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            photo_id: photo_id.into(),
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Exactly five image embeddings in narrative order.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSequence {
    images: Vec<ImageEmbedding>,
}

impl ImageSequence {
    pub fn new(images: Vec<ImageEmbedding>) -> Result<Self, ModelError> {
        if images.len() != SEGMENTS {
            return Err(ModelError::SequenceLength(images.len()));
        }
        let dim = images[0].dim();
        for img in &images {
            if img.dim() != dim {
                return Err(ModelError::ImageDim {
                    photo_id: img.photo_id.clone(),
                    expected: dim,
                    got: img.dim(),
                });
            }
            if img.values.iter().any(|v| !v.is_finite()) {
                return Err(NumericsError::NonFinite { what: "image embedding" }.into());
            }
        }
        Ok(Self { images })
    }

    pub fn images(&self) -> &[ImageEmbedding] {
        &self.images
    }

    pub fn image(&self, position: usize) -> Result<&ImageEmbedding, ModelError> {
        check_position(position)?;
        Ok(&self.images[position - 1])
    }

    pub fn image_dim(&self) -> usize {
        self.images[0].dim()
    }
}

/// Final encoder state, one `(h, c)` pair per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextVector {
    pub layers: Vec<LstmState>,
}

impl ContextVector {
    pub fn h(&self) -> &[f64] {
        &self.layers.last().expect("context has at least one layer").h
    }

    pub fn c(&self) -> &[f64] {
        &self.layers.last().expect("context has at least one layer").c
    }
}

/// Five decoded token-id segments in image order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Story {
    pub segments: Vec<Vec<usize>>,
}

impl Story {
    pub fn new(segments: Vec<Vec<usize>>) -> Self {
        Self { segments }
    }

    /// Words of each segment, without `<eos>`.
    pub fn segment_texts(&self, vocab: &Vocab) -> Vec<String> {
        self.segments
            .iter()
            .map(|seg| {
                let words: Vec<usize> = seg.iter().copied().filter(|&t| t != EOS).collect();
                vocab.tokens_of(&words).join(" ")
            })
            .collect()
    }

    /// The whole story: segment texts joined in order.
    pub fn text(&self, vocab: &Vocab) -> String {
        self.segment_texts(vocab)
            .into_iter()
            .filter(|s| !s.is_empty())
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn token_count(&self) -> usize {
        self.segments.iter().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoryModel {
    pub config: ModelConfig,
    pub params: StoryParams,
}

impl StoryModel {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let params = StoryParams::init(&config, seed);
        Ok(Self { config, params })
    }

    pub fn zeros(config: ModelConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let params = StoryParams::zeros(&config);
        Ok(Self { config, params })
    }

    pub fn from_parts(config: ModelConfig, params: StoryParams) -> Result<Self, ModelError> {
        config.validate()?;
        params.check_shapes(&config)?;
        Ok(Self { config, params })
    }

    /// Copies a pretrained `vocab_size × embed_dim` table into every decoder
    /// embedding table.
    pub fn set_embeddings(&mut self, table: &crate::numerics::Matrix) -> Result<(), ModelError> {
        if table.rows() != self.config.vocab_size || table.cols() != self.config.embed_dim {
            return Err(ModelError::Shape(format!(
                "embedding table is {}×{}, model expects {}×{}",
                table.rows(),
                table.cols(),
                self.config.vocab_size,
                self.config.embed_dim
            )));
        }
        for m in &mut self.params.embeddings {
            *m = table.clone();
        }
        Ok(())
    }

    pub(crate) fn embedding_for(&self, position: usize) -> &crate::numerics::Matrix {
        let idx = if self.config.share_embeddings { 0 } else { position - 1 };
        &self.params.embeddings[idx]
    }

    pub(crate) fn project_image(&self, img: &ImageEmbedding) -> Result<Vec<f64>, ModelError> {
        if img.dim() != self.config.image_dim {
            return Err(ModelError::ImageDim {
                photo_id: img.photo_id.clone(),
                expected: self.config.image_dim,
                got: img.dim(),
            });
        }
        let mut x = self.params.image_bias.clone();
        self.params.image_proj.matvec_acc(&img.values, &mut x);
        Ok(x)
    }

    /// Decoder starting state derived from the context vector.
    pub(crate) fn decoder_init(&self, ctx: &ContextVector) -> Vec<LstmState> {
        ctx.layers
            .iter()
            .map(|s| LstmState {
                h: s.h.clone(),
                c: if self.config.copy_cell_state {
                    s.c.clone()
                } else {
                    vec![0.0; s.c.len()]
                },
            })
            .collect()
    }

    pub(crate) fn logits(&self, position: usize, h: &[f64]) -> Vec<f64> {
        let head = &self.params.heads[position - 1];
        let mut out = head.b.clone();
        head.w.matvec_acc(h, &mut out);
        out
    }
}

pub(crate) fn check_position(position: usize) -> Result<(), ModelError> {
    if (1..=SEGMENTS).contains(&position) {
        Ok(())
    } else {
        Err(ModelError::InvalidPosition(position))
    }
}
