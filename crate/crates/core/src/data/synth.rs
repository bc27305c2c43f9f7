//! Deterministic synthetic stories for desk-scale experiments.
//!
//! Every story has one subject and one object per image. The image embedding
//! for position `p` is the unit-normalized sum of the subject vector, the
//! object vector and a little noise. The text for position `p` comes from a
//! fixed template for that position, so position 1 always opens with
//! [`SYNTH_OPENER`] and position 5 with [`SYNTH_CLOSER`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DataError, EmbeddingStore, Split, StoryRecord};
use crate::model::SEGMENTS;

pub const SYNTH_OPENER: &str = "firstly";
pub const SYNTH_CLOSER: &str = "finally";

const SUBJECTS: [&str; 10] = ["dog", "cat", "girl", "boy", "family", "teacher", "baby", "farmer", "bird", "team"];
const OBJECTS: [&str; 16] = [
    "ball", "cake", "kite", "boat", "book", "hat", "drum", "lamp", "shell", "apple", "map", "key", "bike", "cup",
    "flag", "rock",
];

const TEMPLATES: [&str; SEGMENTS] = [
    "firstly the {s} found a {o} .",
    "the {s} took the {o} home .",
    "then the {s} played with the {o} .",
    "later the {s} shared the {o} .",
    "finally the {s} lost the {o} .",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSpec {
    pub image_dim: usize,
    /// How many subjects to draw from (at most 10).
    pub subjects: usize,
    /// How many objects to draw from (at most 16).
    pub objects: usize,
    /// Uniform noise half-width added to each embedding before normalizing.
    pub noise: f64,
    /// Seeds the subject and object vectors. Datasets with different story
    /// seeds but the same world seed share one visual vocabulary.
    pub world_seed: u64,
    pub val_fraction: f64,
    pub test_fraction: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            image_dim: 32,
            subjects: 6,
            objects: 10,
            noise: 0.05,
            world_seed: 7,
            val_fraction: 0.1,
            test_fraction: 0.1,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |m: &str| Err(DataError::InvalidSpec(m.into()));
        if self.image_dim == 0 {
            return bad("image_dim must be at least 1");
        }
        if !(1..=SUBJECTS.len()).contains(&self.subjects) {
            return bad("subjects must lie in 1..=10");
        }
        if !(1..=OBJECTS.len()).contains(&self.objects) {
            return bad("objects must lie in 1..=16");
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad("noise must be finite and non-negative");
        }
        let (v, t) = (self.val_fraction, self.test_fraction);
        if !(v >= 0.0 && t >= 0.0 && v + t <= 1.0) {
            return bad("val_fraction and test_fraction must be non-negative and sum to at most 1");
        }
        Ok(())
    }
}

fn unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    normalize(v)
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let n = crate::numerics::norm_sq(&v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    v
}

/// `n_stories` stories and their embeddings, fully determined by `seed` and `spec`.
pub fn synth_dataset(seed: u64, n_stories: usize, spec: &SynthSpec) -> Result<(Vec<StoryRecord>, EmbeddingStore), DataError> {
    spec.validate()?;
    if n_stories == 0 {
        return Err(DataError::InvalidSpec("n_stories must be at least 1".into()));
    }
    let mut world = ChaCha8Rng::seed_from_u64(spec.world_seed);
    let subject_vecs: Vec<Vec<f64>> = (0..spec.subjects).map(|_| unit_vector(&mut world, spec.image_dim)).collect();
    let object_vecs: Vec<Vec<f64>> = (0..spec.objects).map(|_| unit_vector(&mut world, spec.image_dim)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(n_stories);
    let mut store = EmbeddingStore::new(spec.image_dim);
    for i in 0..n_stories {
        let story_id = format!("synth{seed}-{i:05}");
        let s = rng.gen_range(0..spec.subjects);
        let mut photos = Vec::with_capacity(SEGMENTS);
        let mut texts = Vec::with_capacity(SEGMENTS);
        for (p, template) in TEMPLATES.iter().enumerate() {
            let o = rng.gen_range(0..spec.objects);
            let values: Vec<f64> = subject_vecs[s]
                .iter()
                .zip(&object_vecs[o])
                .map(|(a, b)| a + b + rng.gen_range(-1.0..=1.0) * spec.noise)
                .collect();
            let photo = format!("{story_id}-{}", p + 1);
            store.insert(photo.clone(), normalize(values).into_iter().map(|x| x as f32).collect())?;
            photos.push(photo);
            texts.push(template.replace("{s}", SUBJECTS[s]).replace("{o}", OBJECTS[o]));
        }
        let u: f64 = rng.gen();
        let split = if u < spec.test_fraction {
            Split::Test
        } else if u < spec.test_fraction + spec.val_fraction {
            Split::Val
        } else {
            Split::Train
        };
        records.push(StoryRecord {
            story_id,
            photos,
            texts,
            split,
        });
    }
    Ok((records, store))
}
