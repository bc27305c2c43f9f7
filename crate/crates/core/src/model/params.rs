use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::numerics::{LstmParams, Matrix};

use super::{ModelError, SEGMENTS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub image_dim: usize,
    /// Shared input width of images (after projection) and words.
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub vocab_size: usize,
    /// One embedding table for all five decoders, or one each.
    pub share_embeddings: bool,
    /// Seed decoders with the encoder's cell state as well as its hidden state.
    pub copy_cell_state: bool,
    pub freeze_embeddings: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            image_dim: 2048,
            embed_dim: 128,
            hidden_dim: 256,
            num_layers: 1,
            vocab_size: 4,
            share_embeddings: true,
            copy_cell_state: true,
            freeze_embeddings: false,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.image_dim == 0 || self.embed_dim == 0 || self.hidden_dim == 0 || self.num_layers == 0 {
            return Err(ModelError::Shape(
                "image_dim, embed_dim, hidden_dim and num_layers must be positive".into(),
            ));
        }
        if self.vocab_size < crate::text::SPECIAL_TOKENS.len() {
            return Err(ModelError::Shape(format!(
                "vocab_size {} is smaller than the reserved tokens",
                self.vocab_size
            )));
        }
        Ok(())
    }

    pub fn embedding_tables(&self) -> usize {
        if self.share_embeddings {
            1
        } else {
            SEGMENTS
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputHead {
    /// `vocab_size × hidden_dim`
    pub w: Matrix,
    pub b: Vec<f64>,
}

/// Every trainable tensor of the story model. The same layout holds
/// gradients and optimizer moments.
#[derive(Debug, Clone, PartialEq)]
pub struct StoryParams {
    /// `embed_dim × image_dim`
    pub image_proj: Matrix,
    pub image_bias: Vec<f64>,
    /// One entry per layer.
    pub encoder: Vec<LstmParams>,
    /// `SEGMENTS` decoders, one entry per layer each.
    pub decoders: Vec<Vec<LstmParams>>,
    /// One shared table or one per decoder, `vocab_size × embed_dim`.
    pub embeddings: Vec<Matrix>,
    pub heads: Vec<OutputHead>,
}

/// Named view of one tensor, in canonical order.
#[derive(Debug, Clone)]
pub struct TensorView<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a [f64],
}

fn stack_dims(cfg: &ModelConfig, layer: usize) -> (usize, usize) {
    let input = if layer == 0 { cfg.embed_dim } else { cfg.hidden_dim };
    (input, cfg.hidden_dim)
}

impl StoryParams {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let stack = || {
            (0..cfg.num_layers)
                .map(|l| {
                    let (i, h) = stack_dims(cfg, l);
                    LstmParams::zeros(i, h)
                })
                .collect::<Vec<_>>()
        };
        Self {
            image_proj: Matrix::zeros(cfg.embed_dim, cfg.image_dim),
            image_bias: vec![0.0; cfg.embed_dim],
            encoder: stack(),
            decoders: (0..SEGMENTS).map(|_| stack()).collect(),
            embeddings: (0..cfg.embedding_tables())
                .map(|_| Matrix::zeros(cfg.vocab_size, cfg.embed_dim))
                .collect(),
            heads: (0..SEGMENTS)
                .map(|_| OutputHead {
                    w: Matrix::zeros(cfg.vocab_size, cfg.hidden_dim),
                    b: vec![0.0; cfg.vocab_size],
                })
                .collect(),
        }
    }

    /// Seeded initialization. LSTM weights follow [`LstmParams::init`];
    /// projections use `±1/√fan_in`, embeddings `±0.1`, biases zero.
    pub fn init(cfg: &ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rng = &mut rng;
        let fan = |n: usize| 1.0 / (n.max(1) as f64).sqrt();
        let stack = |rng: &mut ChaCha8Rng| {
            (0..cfg.num_layers)
                .map(|l| {
                    let (i, h) = stack_dims(cfg, l);
                    LstmParams::init(i, h, rng)
                })
                .collect::<Vec<_>>()
        };
        let image_proj = Matrix::random_uniform(cfg.embed_dim, cfg.image_dim, fan(cfg.image_dim), rng);
        let encoder = stack(rng);
        let decoders = (0..SEGMENTS).map(|_| stack(rng)).collect();
        let embeddings = (0..cfg.embedding_tables())
            .map(|_| Matrix::random_uniform(cfg.vocab_size, cfg.embed_dim, 0.1, rng))
            .collect();
        let heads = (0..SEGMENTS)
            .map(|_| OutputHead {
                w: Matrix::random_uniform(cfg.vocab_size, cfg.hidden_dim, fan(cfg.hidden_dim), rng),
                b: vec![0.0; cfg.vocab_size],
            })
            .collect();
        Self {
            image_proj,
            image_bias: vec![0.0; cfg.embed_dim],
            encoder,
            decoders,
            embeddings,
            heads,
        }
    }

    pub fn views(&self) -> Vec<TensorView<'_>> {
        fn view<'a>(name: String, shape: Vec<usize>, data: &'a [f64]) -> TensorView<'a> {
            TensorView { name, shape, data }
        }
        fn matrix<'a>(name: String, m: &'a Matrix) -> TensorView<'a> {
            view(name, vec![m.rows(), m.cols()], m.as_slice())
        }
        fn lstm<'a>(out: &mut Vec<TensorView<'a>>, prefix: &str, p: &'a LstmParams) {
            out.push(matrix(format!("{prefix}.w_x"), &p.w_x));
            out.push(matrix(format!("{prefix}.w_h"), &p.w_h));
            out.push(view(format!("{prefix}.b"), vec![p.b.len()], &p.b));
        }

        let mut out = vec![
            matrix("image_proj".into(), &self.image_proj),
            view("image_bias".into(), vec![self.image_bias.len()], &self.image_bias),
        ];
        for (l, p) in self.encoder.iter().enumerate() {
            lstm(&mut out, &format!("encoder.{l}"), p);
        }
        for (k, stack) in self.decoders.iter().enumerate() {
            for (l, p) in stack.iter().enumerate() {
                lstm(&mut out, &format!("decoder.{k}.{l}"), p);
            }
        }
        for (e, m) in self.embeddings.iter().enumerate() {
            out.push(matrix(format!("embedding.{e}"), m));
        }
        for (k, h) in self.heads.iter().enumerate() {
            out.push(matrix(format!("head.{k}.w"), &h.w));
            out.push(view(format!("head.{k}.b"), vec![h.b.len()], &h.b));
        }
        out
    }

    /// Mutable slices in the same order as [`StoryParams::views`].
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![self.image_proj.as_mut_slice(), &mut self.image_bias];
        for p in &mut self.encoder {
            out.extend(p.tensors_mut());
        }
        for stack in &mut self.decoders {
            for p in stack {
                out.extend(p.tensors_mut());
            }
        }
        for m in &mut self.embeddings {
            out.push(m.as_mut_slice());
        }
        for h in &mut self.heads {
            out.push(h.w.as_mut_slice());
            out.push(&mut h.b);
        }
        out
    }

    pub fn num_params(&self) -> usize {
        self.views().iter().map(|v| v.data.len()).sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.num_params());
        for v in self.views() {
            flat.extend_from_slice(v.data);
        }
        flat
    }

    pub fn assign_flat(&mut self, flat: &[f64]) -> Result<(), ModelError> {
        let n = self.num_params();
        if flat.len() != n {
            return Err(ModelError::Shape(format!(
                "flat parameter vector has {} entries, model has {n}",
                flat.len()
            )));
        }
        let mut offset = 0;
        for t in self.tensors_mut() {
            let len = t.len();
            t.copy_from_slice(&flat[offset..offset + len]);
            offset += len;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn add_assign(&mut self, other: &StoryParams) {
        let theirs: Vec<&[f64]> = other.views().into_iter().map(|v| v.data).collect();
        for (mine, src) in self.tensors_mut().into_iter().zip(theirs) {
            crate::numerics::add_assign(mine, src);
        }
    }

    pub fn fill(&mut self, value: f64) {
        for t in self.tensors_mut() {
            t.fill(value);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.views().iter().all(|v| v.data.iter().all(|x| x.is_finite()))
    }

    /// Checks every tensor against the shapes implied by `cfg`.
    pub fn check_shapes(&self, cfg: &ModelConfig) -> Result<(), ModelError> {
        let expected = StoryParams::zeros(cfg);
        let mine = self.views();
        let theirs = expected.views();
        if mine.len() != theirs.len() {
            return Err(ModelError::Shape(format!(
                "expected {} tensors, found {}",
                theirs.len(),
                mine.len()
            )));
        }
        for (a, b) in mine.iter().zip(&theirs) {
            if a.name != b.name || a.shape != b.shape || a.data.len() != b.data.len() {
                return Err(ModelError::Shape(format!(
                    "tensor {} has shape {:?}, expected {} {:?}",
                    a.name, a.shape, b.name, b.shape
                )));
            }
        }
        Ok(())
    }
}
