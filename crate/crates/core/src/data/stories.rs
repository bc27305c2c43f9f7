//! Line-delimited JSON story files.
//!
//! Two line shapes are accepted and may be mixed across stories:
//!
//! ```text
//! {"story_id": "s1", "photos": [5 ids], "texts": [5 strings], "split": "train"}
//! {"story_id": "s1", "position": 3, "photo": "p", "text": "...", "split": "train"}
//! ```
//!
//! Per-image lines are grouped by story id and ordered by position. Stories
//! that do not end up with exactly five images are dropped and reported.
//! Export always writes the whole-story shape.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::Deserialize;

use super::{DataError, Split, StoryRecord};
use crate::binio::write_atomic;
use crate::model::SEGMENTS;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DroppedStory {
    pub story_id: String,
    pub images: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LoadedStories {
    pub records: Vec<StoryRecord>,
    pub dropped: Vec<DroppedStory>,
}

impl LoadedStories {
    pub fn warnings(&self) -> Vec<String> {
        self.dropped
            .iter()
            .map(|d| format!("dropped story {}: {} images instead of 5", d.story_id, d.images))
            .collect()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WholeLine {
    story_id: String,
    photos: Vec<String>,
    texts: Vec<String>,
    split: Split,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryLine {
    story_id: String,
    position: usize,
    photo: String,
    text: String,
    split: Split,
}

enum Pending {
    Whole(WholeLine),
    Entries {
        split: Split,
        slots: BTreeMap<usize, (String, String)>,
    },
}

fn parse_err(line: usize, msg: impl Into<String>) -> DataError {
    DataError::Parse { line, msg: msg.into() }
}

pub fn parse_stories<R: Read>(reader: R) -> Result<LoadedStories, DataError> {
    let mut order: Vec<String> = Vec::new();
    let mut pending: HashMap<String, Pending> = HashMap::new();

    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| parse_err(lineno, e.to_string()))?;
        let is_entry = value.get("position").is_some() || value.get("photo").is_some();
        if is_entry {
            let e: EntryLine = serde_json::from_value(value).map_err(|e| parse_err(lineno, e.to_string()))?;
            if !(1..=SEGMENTS).contains(&e.position) {
                return Err(parse_err(lineno, format!("position {} is outside 1..=5", e.position)));
            }
            let slot = pending.entry(e.story_id.clone()).or_insert_with(|| {
                order.push(e.story_id.clone());
                Pending::Entries {
                    split: e.split,
                    slots: BTreeMap::new(),
                }
            });
            match slot {
                Pending::Whole(_) => {
                    return Err(parse_err(lineno, format!("story {} was already given as a whole-story line", e.story_id)))
                }
                Pending::Entries { split, slots } => {
                    if *split != e.split {
                        return Err(parse_err(lineno, format!("story {} has conflicting split tags", e.story_id)));
                    }
                    if slots.insert(e.position, (e.photo, e.text)).is_some() {
                        return Err(parse_err(
                            lineno,
                            format!("story {} repeats position {}", e.story_id, e.position),
                        ));
                    }
                }
            }
        } else {
            let w: WholeLine = serde_json::from_value(value).map_err(|e| parse_err(lineno, e.to_string()))?;
            if w.photos.len() != w.texts.len() {
                return Err(parse_err(
                    lineno,
                    format!("story {} has {} photos but {} texts", w.story_id, w.photos.len(), w.texts.len()),
                ));
            }
            if pending.contains_key(&w.story_id) {
                return Err(parse_err(lineno, format!("story {} appears more than once", w.story_id)));
            }
            order.push(w.story_id.clone());
            pending.insert(w.story_id.clone(), Pending::Whole(w));
        }
    }

    let mut out = LoadedStories::default();
    for id in order {
        let record = match pending.remove(&id).expect("every ordered id is pending") {
            Pending::Whole(w) => StoryRecord {
                story_id: w.story_id,
                photos: w.photos,
                texts: w.texts,
                split: w.split,
            },
            Pending::Entries { split, slots } => {
                let (photos, texts) = slots.into_values().unzip();
                StoryRecord {
                    story_id: id,
                    photos,
                    texts,
                    split,
                }
            }
        };
        if record.photos.len() == SEGMENTS {
            out.records.push(record);
        } else {
            out.dropped.push(DroppedStory {
                story_id: record.story_id,
                images: record.photos.len(),
            });
        }
    }
    Ok(out)
}

pub fn load_stories(path: &Path) -> Result<LoadedStories, DataError> {
    parse_stories(std::fs::File::open(path)?)
}

/// One whole-story JSON object per line.
pub fn write_stories(records: &[StoryRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("story records always serialize"));
        out.push('\n');
    }
    out
}

pub fn save_stories(path: &Path, records: &[StoryRecord]) -> Result<(), DataError> {
    write_atomic(path, write_stories(records).as_bytes())?;
    Ok(())
}
