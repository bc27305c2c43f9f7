use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::numerics::{log_softmax, LstmState};
use crate::text::{BOS, EOS, PAD};

use super::{check_position, stack, ContextVector, ImageEmbedding, ImageSequence, ModelError, Story, StoryModel, SEGMENTS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecodeConfig {
    /// Word budget per segment; `<eos>` does not count against it.
    pub max_len: usize,
    /// 1 is greedy decoding.
    pub beam_width: usize,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            max_len: 30,
            beam_width: 1,
        }
    }
}

/// Runs the encoder over the five projected images from a zero state.
pub fn encode_sequence(model: &StoryModel, seq: &ImageSequence) -> Result<ContextVector, ModelError> {
    let cfg = &model.config;
    let mut states = vec![LstmState::zeros(cfg.hidden_dim); cfg.num_layers];
    for img in seq.images() {
        let x = model.project_image(img)?;
        states = stack::step(&model.params.encoder, &x, &states)?;
    }
    Ok(ContextVector { layers: states })
}

fn emittable(token: usize) -> bool {
    token != PAD && token != BOS
}

/// Highest logit among emittable tokens; the lowest id wins ties.
fn argmax(logits: &[f64]) -> usize {
    let mut best = EOS;
    for (t, &v) in logits.iter().enumerate() {
        if emittable(t) && v > logits[best] {
            best = t;
        }
    }
    best
}

/// Generates the segment for image `position` (1-based).
///
/// The segment ends with `<eos>`, or holds exactly `max_len` words and no
/// `<eos>`.
pub fn decode_segment(
    model: &StoryModel,
    position: usize,
    ctx: &ContextVector,
    img: &ImageEmbedding,
    cfg: &DecodeConfig,
) -> Result<Vec<usize>, ModelError> {
    check_position(position)?;
    if ctx.layers.len() != model.config.num_layers
        || ctx.layers.iter().any(|s| s.hidden_dim() != model.config.hidden_dim)
    {
        return Err(ModelError::Shape("context vector does not match the model".into()));
    }
    if cfg.max_len == 0 {
        return Ok(Vec::new());
    }
    if cfg.beam_width <= 1 {
        greedy(model, position, ctx, img, cfg.max_len)
    } else {
        beam_search(model, position, ctx, img, cfg.max_len, cfg.beam_width)
    }
}

fn greedy(
    model: &StoryModel,
    position: usize,
    ctx: &ContextVector,
    img: &ImageEmbedding,
    max_len: usize,
) -> Result<Vec<usize>, ModelError> {
    let layers = &model.params.decoders[position - 1];
    let embeddings = model.embedding_for(position);
    let mut states = model.decoder_init(ctx);
    let mut x = model.project_image(img)?;
    let mut out = Vec::new();
    let mut words = 0;
    while words < max_len {
        states = stack::step(layers, &x, &states)?;
        let logits = model.logits(position, &states.last().expect("non-empty stack").h);
        let tok = argmax(&logits);
        out.push(tok);
        if tok == EOS {
            break;
        }
        words += 1;
        x = embeddings.row(tok).to_vec();
    }
    Ok(out)
}

struct Hypothesis {
    tokens: Vec<usize>,
    logprob: f64,
    states: Vec<LstmState>,
    logits: Vec<f64>,
    next_logp: Vec<f64>,
}

struct Candidate {
    score: f64,
    logit: f64,
    beam: usize,
    token: usize,
}

fn rank(a: &Candidate, b: &Candidate) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(b.logit.total_cmp(&a.logit))
        .then(a.beam.cmp(&b.beam))
        .then(a.token.cmp(&b.token))
}

/// Beam search over decoder `position`, ranking finished hypotheses by
/// log-probability divided by token count. `decode_segment` routes here
/// when `beam_width > 1`.
pub fn beam_search(
    model: &StoryModel,
    position: usize,
    ctx: &ContextVector,
    img: &ImageEmbedding,
    max_len: usize,
    width: usize,
) -> Result<Vec<usize>, ModelError> {
    check_position(position)?;
    if max_len == 0 {
        return Ok(Vec::new());
    }
    let width = width.max(1);
    let layers = &model.params.decoders[position - 1];
    let embeddings = model.embedding_for(position);
    let expand = |x: &[f64], states: &[LstmState]| -> Result<(Vec<LstmState>, Vec<f64>, Vec<f64>), ModelError> {
        let next = stack::step(layers, x, states)?;
        let logits = model.logits(position, &next.last().expect("non-empty stack").h);
        let logp = log_softmax(&logits);
        Ok((next, logits, logp))
    };

    let (states, logits, next_logp) = expand(&model.project_image(img)?, &model.decoder_init(ctx))?;
    let mut live = vec![Hypothesis {
        tokens: Vec::new(),
        logprob: 0.0,
        states,
        logits,
        next_logp,
    }];
    let mut finished: Vec<(Vec<usize>, f64)> = Vec::new();

    while !live.is_empty() {
        let mut candidates: Vec<Candidate> = Vec::new();
        for (b, hyp) in live.iter().enumerate() {
            for (t, &lp) in hyp.next_logp.iter().enumerate() {
                if emittable(t) {
                    candidates.push(Candidate {
                        score: hyp.logprob + lp,
                        logit: hyp.logits[t],
                        beam: b,
                        token: t,
                    });
                }
            }
        }
        candidates.sort_by(rank);
        candidates.truncate(width);

        let mut next_live = Vec::with_capacity(width);
        for cand in candidates {
            let parent = &live[cand.beam];
            let mut tokens = parent.tokens.clone();
            tokens.push(cand.token);
            if cand.token == EOS || tokens.len() == max_len {
                finished.push((tokens, cand.score));
                continue;
            }
            let (states, logits, next_logp) = expand(embeddings.row(cand.token), &parent.states)?;
            next_live.push(Hypothesis {
                tokens,
                logprob: cand.score,
                states,
                logits,
                next_logp,
            });
        }
        live = next_live;
    }

    let mut best: Option<(Vec<usize>, f64)> = None;
    for (tokens, logprob) in finished {
        let normalized = logprob / tokens.len() as f64;
        if best.as_ref().is_none_or(|(_, s)| normalized > *s) {
            best = Some((tokens, normalized));
        }
    }
    Ok(best.map(|(t, _)| t).unwrap_or_default())
}

/// Encodes once, then runs the five decoders independently from the same context.
pub fn generate_story(model: &StoryModel, seq: &ImageSequence, cfg: &DecodeConfig) -> Result<Story, ModelError> {
    let ctx = encode_sequence(model, seq)?;
    let segments = (1..=SEGMENTS)
        .into_par_iter()
        .map(|pos| decode_segment(model, pos, &ctx, &seq.images()[pos - 1], cfg))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Story::new(segments))
}
