//! Task assignment, rating validation, the append-only log and aggregation.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

/// The six judged aspects, in order a) to f).
pub const ASPECTS: [(char, &str); 6] = [
    ('a', "the story is focused"),
    ('b', "the story has good structure and coherence"),
    ('c', "would you share this story"),
    ('d', "do you think this story was written by a human"),
    ('e', "the story is visually grounded"),
    ('f', "the story is detailed"),
];

pub const LIKERT_MIN: i64 = 1;
pub const STORY_SEGMENTS: usize = 5;

#[derive(Debug, thiserror::Error)]
pub enum RatingError {
    #[error("the task pool is empty")]
    EmptyPool,
    #[error("unknown task {0:?}")]
    UnknownTask(String),
    #[error("rater id must not be empty")]
    EmptyRater,
    #[error("expected 6 scores (aspects a-f), got {0}")]
    ScoreCount(usize),
    #[error("aspect {aspect}) score {value} is outside 1..={max}")]
    OutOfRange { aspect: char, value: i64, max: i64 },
    #[error("invalid service config: {0}")]
    Config(String),
    #[error("rater {rater_id:?} already rated task {task_id:?} with different scores")]
    Conflict { task_id: String, rater_id: String },
    #[error("no ratings yet")]
    NoRatings,
    #[error("{path}:{line}: {msg}")]
    Input { path: PathBuf, line: usize, msg: String },
    #[error("ratings log {path}:{line} is corrupt: {msg}")]
    CorruptLog { path: PathBuf, line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Model,
    Human,
}

impl Source {
    pub fn label(self) -> &'static str {
        match self {
            Source::Model => "Ours",
            Source::Human => "Human",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingTask {
    pub task_id: String,
    pub story_id: String,
    pub segments: Vec<String>,
    pub source: Source,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub images: Option<Vec<String>>,
}

/// What a rater sees: the task without its source tag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskPayload {
    pub task_id: String,
    pub story_id: String,
    pub segments: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub images: Option<Vec<String>>,
}

impl From<&RatingTask> for TaskPayload {
    fn from(t: &RatingTask) -> Self {
        Self {
            task_id: t.task_id.clone(),
            story_id: t.story_id.clone(),
            segments: t.segments.clone(),
            images: t.images.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum NextTask {
    Task(TaskPayload),
    /// Nothing left for this rater.
    Exhausted,
}

/// A rating as submitted; scores are checked before anything is stored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Submission {
    pub task_id: String,
    pub rater_id: String,
    pub scores: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatingRecord {
    pub task_id: String,
    pub rater_id: String,
    pub scores: [u8; 6],
    pub timestamp_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    pub task_id: String,
    pub rater_id: String,
    pub timestamp_ms: u64,
}

impl From<&RatingRecord> for Ack {
    fn from(r: &RatingRecord) -> Self {
        Self {
            task_id: r.task_id.clone(),
            rater_id: r.rater_id.clone(),
            timestamp_ms: r.timestamp_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSummary {
    pub source: Source,
    pub ratings: usize,
    pub means: [f64; 6],
    /// Sum of the six means.
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    /// Model row first, then human; sources without ratings are omitted.
    pub sources: Vec<SourceSummary>,
}

impl AggregateReport {
    pub fn from_ratings<'a, I>(ratings: I) -> Result<Self, RatingError>
    where
        I: IntoIterator<Item = (Source, &'a [u8; 6])>,
    {
        let mut acc: BTreeMap<Source, (usize, [u64; 6])> = BTreeMap::new();
        for (source, scores) in ratings {
            let e = acc.entry(source).or_insert((0, [0; 6]));
            e.0 += 1;
            for (s, &v) in e.1.iter_mut().zip(scores) {
                *s += v as u64;
            }
        }
        if acc.is_empty() {
            return Err(RatingError::NoRatings);
        }
        let sources = acc
            .into_iter()
            .map(|(source, (n, sums))| {
                let means = sums.map(|s| s as f64 / n as f64);
                SourceSummary {
                    source,
                    ratings: n,
                    means,
                    total: means.iter().sum(),
                }
            })
            .collect();
        Ok(Self { sources })
    }

    pub fn source(&self, source: Source) -> Option<&SourceSummary> {
        self.sources.iter().find(|s| s.source == source)
    }

    /// Rows "Ours" and "Human" with columns a) to f) and the total, three decimals.
    pub fn render_table(&self) -> String {
        let mut out = String::from("      | a)    | b)    | c)    | d)    | e)    | f)    | Total score\n");
        for s in &self.sources {
            let _ = write!(out, "{:<5} |", s.source.label());
            for m in s.means {
                let _ = write!(out, " {m:.3} |");
            }
            let _ = writeln!(out, " {:.3}", s.total);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    /// Ratings wanted per task before it leaves rotation.
    pub raters_per_story: usize,
    /// Top of the Likert scale; scores run from 1.
    pub likert_points: u8,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            raters_per_story: 3,
            likert_points: 5,
        }
    }
}

#[derive(Deserialize)]
struct StoryLine {
    story_id: String,
    texts: Vec<String>,
    #[serde(default)]
    images: Option<Vec<String>>,
}

fn read_story_lines(path: &Path) -> Result<Vec<StoryLine>, RatingError> {
    let file = File::open(path)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let s: StoryLine = serde_json::from_str(&line).map_err(|e| RatingError::Input {
            path: path.to_path_buf(),
            line: i + 1,
            msg: e.to_string(),
        })?;
        if s.texts.len() != STORY_SEGMENTS {
            return Err(RatingError::Input {
                path: path.to_path_buf(),
                line: i + 1,
                msg: format!("story {} has {} segments, expected {STORY_SEGMENTS}", s.story_id, s.texts.len()),
            });
        }
        out.push(s);
    }
    Ok(out)
}

/// Interleaves the two sources (model, human, model, ...) and numbers the
/// tasks in that order, so task ids say nothing about the source.
pub fn build_pool(model: Vec<(String, Vec<String>)>, human: Vec<(String, Vec<String>)>) -> Vec<RatingTask> {
    let tag = |v: Vec<(String, Vec<String>)>, source| -> Vec<RatingTask> {
        v.into_iter()
            .map(|(story_id, segments)| RatingTask {
                task_id: String::new(),
                story_id,
                segments,
                source,
                images: None,
            })
            .collect()
    };
    let mut a = tag(model, Source::Model).into_iter();
    let mut b = tag(human, Source::Human).into_iter();
    let mut pool = Vec::new();
    loop {
        let (x, y) = (a.next(), b.next());
        if x.is_none() && y.is_none() {
            break;
        }
        pool.extend(x);
        pool.extend(y);
    }
    for (i, t) in pool.iter_mut().enumerate() {
        t.task_id = format!("task-{:05}", i + 1);
    }
    pool
}

/// Reads a candidate file and a human-story file, each one JSON object per
/// line with at least `story_id` and `texts`.
pub fn load_pool(candidates: &Path, humans: &Path, limit: Option<usize>) -> Result<Vec<RatingTask>, RatingError> {
    let take = |v: Vec<StoryLine>| -> Vec<StoryLine> { v.into_iter().take(limit.unwrap_or(usize::MAX)).collect() };
    let model = take(read_story_lines(candidates)?);
    let human = take(read_story_lines(humans)?);
    let images: HashMap<(Source, String), Vec<String>> = model
        .iter()
        .filter_map(|s| s.images.clone().map(|i| ((Source::Model, s.story_id.clone()), i)))
        .chain(
            human
                .iter()
                .filter_map(|s| s.images.clone().map(|i| ((Source::Human, s.story_id.clone()), i))),
        )
        .collect();
    let strip = |v: Vec<StoryLine>| v.into_iter().map(|s| (s.story_id, s.texts)).collect();
    let mut pool = build_pool(strip(model), strip(human));
    for t in &mut pool {
        t.images = images.get(&(t.source, t.story_id.clone())).cloned();
    }
    Ok(pool)
}

pub fn validate_scores(scores: &[i64], likert_points: u8) -> Result<[u8; 6], RatingError> {
    let max = likert_points as i64;
    if scores.len() != ASPECTS.len() {
        return Err(RatingError::ScoreCount(scores.len()));
    }
    let mut out = [0u8; 6];
    for (i, &v) in scores.iter().enumerate() {
        if !(LIKERT_MIN..=max).contains(&v) {
            return Err(RatingError::OutOfRange {
                aspect: ASPECTS[i].0,
                value: v,
                max,
            });
        }
        out[i] = v as u8;
    }
    Ok(out)
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Append-only ratings log. Each line is fsynced before the rating is acknowledged.
struct RatingsLog {
    file: File,
}

impl RatingsLog {
    /// Opens (creating if needed) and replays the log. A torn final line,
    /// left by a crash mid-append and therefore never acknowledged, is cut off.
    fn open(path: &Path) -> Result<(Self, Vec<RatingRecord>), RatingError> {
        let mut file = OpenOptions::new().read(true).append(true).create(true).open(path)?;
        let mut text = String::new();
        file.read_to_string(&mut text)?;
        let mut records = Vec::new();
        let mut good_len = 0usize;
        let mut offset = 0usize;
        for (i, chunk) in text.split_inclusive('\n').enumerate() {
            // Records are written with their newline in one call, so a line
            // without one was never acknowledged.
            if !chunk.ends_with('\n') {
                break;
            }
            offset += chunk.len();
            let line = chunk.trim();
            if !line.is_empty() {
                let r = serde_json::from_str(line).map_err(|e| RatingError::CorruptLog {
                    path: path.to_path_buf(),
                    line: i + 1,
                    msg: e.to_string(),
                })?;
                records.push(r);
            }
            good_len = offset;
        }
        if good_len < text.len() {
            file.set_len(good_len as u64)?;
            file.seek(SeekFrom::End(0))?;
            file.sync_all()?;
        }
        Ok((Self { file }, records))
    }

    fn append(&mut self, record: &RatingRecord) -> Result<(), RatingError> {
        let mut line = serde_json::to_string(record).expect("rating records serialize");
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.sync_data()?;
        Ok(())
    }
}

pub struct RatingService {
    config: ServiceConfig,
    tasks: Vec<RatingTask>,
    index: HashMap<String, usize>,
    ratings: HashMap<(usize, String), RatingRecord>,
    order: Vec<(usize, String)>,
    /// Per task: raters who rated it or currently hold it.
    assigned: Vec<HashSet<String>>,
    pending: HashMap<String, usize>,
    last_source: HashMap<String, Source>,
    log: Option<RatingsLog>,
}

impl RatingService {
    /// In-memory service, mainly for tests and simulations.
    pub fn new(tasks: Vec<RatingTask>, config: ServiceConfig) -> Result<Self, RatingError> {
        if tasks.is_empty() {
            return Err(RatingError::EmptyPool);
        }
        if config.raters_per_story == 0 {
            return Err(RatingError::Config("raters_per_story must be at least 1".into()));
        }
        if config.likert_points < 2 {
            return Err(RatingError::Config("likert_points must be at least 2".into()));
        }
        let index: HashMap<String, usize> = tasks.iter().enumerate().map(|(i, t)| (t.task_id.clone(), i)).collect();
        let assigned = vec![HashSet::new(); tasks.len()];
        Ok(Self {
            config,
            tasks,
            index,
            ratings: HashMap::new(),
            order: Vec::new(),
            assigned,
            pending: HashMap::new(),
            last_source: HashMap::new(),
            log: None,
        })
    }

    /// Service backed by the log at `log_path`; existing ratings are replayed.
    pub fn open(tasks: Vec<RatingTask>, config: ServiceConfig, log_path: &Path) -> Result<Self, RatingError> {
        let mut svc = Self::new(tasks, config)?;
        let (log, records) = RatingsLog::open(log_path)?;
        for (i, r) in records.into_iter().enumerate() {
            let Some(&t) = svc.index.get(&r.task_id) else {
                return Err(RatingError::CorruptLog {
                    path: log_path.to_path_buf(),
                    line: i + 1,
                    msg: format!("task {:?} is not in the pool", r.task_id),
                });
            };
            svc.insert(t, r);
        }
        svc.log = Some(log);
        Ok(svc)
    }

    fn insert(&mut self, t: usize, r: RatingRecord) {
        self.assigned[t].insert(r.rater_id.clone());
        if self.pending.get(&r.rater_id) == Some(&t) {
            self.pending.remove(&r.rater_id);
        }
        let key = (t, r.rater_id.clone());
        if !self.ratings.contains_key(&key) {
            self.order.push(key.clone());
        }
        self.ratings.insert(key, r);
    }

    pub fn tasks(&self) -> &[RatingTask] {
        &self.tasks
    }

    pub fn rating_count(&self) -> usize {
        self.ratings.len()
    }

    /// Completed ratings per task, in pool order.
    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.tasks.len()];
        for (t, _) in self.ratings.keys() {
            c[*t] += 1;
        }
        c
    }

    /// The rater's current task, or a fresh one with the fewest raters so far.
    /// Ties go to the source the rater saw less recently, then pool order.
    pub fn next_task(&mut self, rater_id: &str) -> Result<NextTask, RatingError> {
        if rater_id.is_empty() {
            return Err(RatingError::EmptyRater);
        }
        if let Some(&t) = self.pending.get(rater_id) {
            return Ok(NextTask::Task((&self.tasks[t]).into()));
        }
        let prefer = self.last_source.get(rater_id).map(|s| match s {
            Source::Model => Source::Human,
            Source::Human => Source::Model,
        });
        let best = (0..self.tasks.len())
            .filter(|&t| !self.assigned[t].contains(rater_id) && self.assigned[t].len() < self.config.raters_per_story)
            .min_by_key(|&t| (self.assigned[t].len(), Some(self.tasks[t].source) != prefer, t));
        match best {
            None => Ok(NextTask::Exhausted),
            Some(t) => {
                self.assigned[t].insert(rater_id.to_string());
                self.pending.insert(rater_id.to_string(), t);
                self.last_source.insert(rater_id.to_string(), self.tasks[t].source);
                Ok(NextTask::Task((&self.tasks[t]).into()))
            }
        }
    }

    /// Validates, durably appends, then acknowledges. Resubmitting the same
    /// scores returns the original acknowledgement.
    pub fn submit(&mut self, sub: Submission) -> Result<Ack, RatingError> {
        if sub.rater_id.is_empty() {
            return Err(RatingError::EmptyRater);
        }
        let &t = self
            .index
            .get(&sub.task_id)
            .ok_or_else(|| RatingError::UnknownTask(sub.task_id.clone()))?;
        let scores = validate_scores(&sub.scores, self.config.likert_points)?;
        if let Some(existing) = self.ratings.get(&(t, sub.rater_id.clone())) {
            return if existing.scores == scores {
                Ok(existing.into())
            } else {
                Err(RatingError::Conflict {
                    task_id: sub.task_id,
                    rater_id: sub.rater_id,
                })
            };
        }
        let record = RatingRecord {
            task_id: sub.task_id,
            rater_id: sub.rater_id,
            scores,
            timestamp_ms: now_ms(),
        };
        if let Some(log) = self.log.as_mut() {
            log.append(&record)?;
        }
        let ack = Ack::from(&record);
        self.insert(t, record);
        Ok(ack)
    }

    /// Ratings in the order they were accepted.
    pub fn records(&self) -> Vec<&RatingRecord> {
        self.order.iter().map(|k| &self.ratings[k]).collect()
    }

    pub fn aggregate(&self) -> Result<AggregateReport, RatingError> {
        AggregateReport::from_ratings(self.order.iter().map(|k| (self.tasks[k.0].source, &self.ratings[k].scores)))
    }
}
