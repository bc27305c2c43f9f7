//! Story records, image-embedding stores, and the synthetic story generator.

mod embeddings;
mod stories;
mod synth;

use serde::{Deserialize, Serialize};

use crate::model::{ImageSequence, ModelError, Story, SEGMENTS};
use crate::text::{tokenize, Vocab, EOS};
use crate::training::TrainingExample;

pub use embeddings::{load_embeddings, save_embeddings, EmbeddingStore, VEMB_MAGIC, VEMB_VERSION};
pub use stories::{load_stories, parse_stories, save_stories, write_stories, DroppedStory, LoadedStories};
pub use synth::{synth_dataset, SynthSpec, SYNTH_CLOSER, SYNTH_OPENER};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("embedding file ends early")]
    Truncated,
    #[error("corrupt embedding file: {0}")]
    Corrupt(String),
    #[error("embedding file version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("photo id {0:?} appears more than once")]
    DuplicatePhoto(String),
    #[error("photo {photo_id:?} has dimension {got}, expected {expected}")]
    DimMismatch {
        photo_id: String,
        expected: usize,
        got: usize,
    },
    #[error("story {story_id}: missing embedding for photo {photo_id:?}")]
    MissingEmbedding { story_id: String, photo_id: String },
    #[error("invalid synthetic dataset spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// One story: five photos and the five text segments written for them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoryRecord {
    pub story_id: String,
    pub photos: Vec<String>,
    pub texts: Vec<String>,
    pub split: Split,
}

impl StoryRecord {
    /// Segment token lists, lowercased and punctuation-split.
    pub fn segment_tokens(&self) -> Vec<Vec<String>> {
        self.texts.iter().map(|t| tokenize(t)).collect()
    }

    /// The reference as token ids, each segment closed with `<eos>`.
    pub fn reference(&self, vocab: &Vocab) -> Story {
        Story::new(
            self.segment_tokens()
                .iter()
                .map(|toks| {
                    let mut ids = vocab.ids_of(toks);
                    ids.push(EOS);
                    ids
                })
                .collect(),
        )
    }

    pub fn full_text(&self) -> String {
        self.texts.join(" ")
    }
}

/// Records belonging to one split, in input order.
pub fn filter_split(records: &[StoryRecord], split: Split) -> Vec<StoryRecord> {
    records.iter().filter(|r| r.split == split).cloned().collect()
}

/// Resolves every photo of `record` against `store`.
pub fn image_sequence(record: &StoryRecord, store: &EmbeddingStore) -> Result<ImageSequence, DataError> {
    debug_assert_eq!(record.photos.len(), SEGMENTS);
    let images = record
        .photos
        .iter()
        .map(|p| {
            store.get(p).ok_or_else(|| DataError::MissingEmbedding {
                story_id: record.story_id.clone(),
                photo_id: p.clone(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ImageSequence::new(images)?)
}

/// Joins records with their embeddings and reference ids. Fails on the first
/// unresolved photo, before any training work starts.
pub fn training_examples(
    records: &[StoryRecord],
    store: &EmbeddingStore,
    vocab: &Vocab,
) -> Result<Vec<TrainingExample>, DataError> {
    records
        .iter()
        .map(|r| {
            Ok(TrainingExample {
                story_id: r.story_id.clone(),
                images: image_sequence(r, store)?,
                reference: r.reference(vocab),
            })
        })
        .collect()
}

/// Vocabulary over all segments of `records`.
pub fn build_vocab(records: &[StoryRecord], min_count: u64) -> Vocab {
    let corpus: Vec<Vec<String>> = records.iter().flat_map(StoryRecord::segment_tokens).collect();
    Vocab::build(&corpus, min_count)
}
