//! Subcommands of the `storyteller` binary. Each takes a resolved
//! [`RunConfig`], validates its inputs before doing any work, and writes its
//! outputs atomically.

pub mod config;

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use storyteller_core::binio::write_atomic;
use storyteller_core::data::{
    build_vocab, filter_split, image_sequence, load_embeddings, load_stories, save_embeddings, save_stories,
    synth_dataset, training_examples, EmbeddingStore, StoryRecord,
};
use storyteller_core::metrics::{evaluate_corpus, EvalPair, MetricReport};
use storyteller_core::model::{generate_story, StoryModel};
use storyteller_core::numerics::Matrix;
use storyteller_core::text::{tokenize, train_skipgram};
use storyteller_core::training::{
    load_checkpoint, save_checkpoint, train_from, Checkpoint, EpochStats, OptimState,
};
use storyteller_rating::{build_pool, RatingService};

pub use config::RunConfig;
use config::require_file;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad config, missing input or inconsistent inputs. Exit code 2.
    #[error("{0}")]
    Config(String),
    /// Anything that fails once work has started. Exit code 1.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

fn write_out(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    write_atomic(path, bytes).map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))
}

fn prepare_out_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Config(format!("output directory {}: {e}", dir.display())))
}

fn read_records(cfg: &RunConfig, path: &Path, split: storyteller_core::data::Split) -> Result<Vec<StoryRecord>, CliError> {
    let loaded = load_stories(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    for w in loaded.warnings() {
        eprintln!("warning: {w}");
    }
    let mut records = filter_split(&loaded.records, split);
    if let Some(n) = cfg.data.limit {
        records.truncate(n);
    }
    if records.is_empty() {
        return Err(CliError::Config(format!(
            "{} has no {split:?} stories",
            path.display()
        )));
    }
    Ok(records)
}

fn read_embeddings(path: &Path) -> Result<EmbeddingStore, CliError> {
    load_embeddings(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub stories: usize,
    pub vocab_size: usize,
    pub num_params: usize,
    pub final_loss: Option<f64>,
    pub checkpoint: PathBuf,
    pub loss_log: PathBuf,
}

/// Trains on the training split; writes `checkpoint.vstm` and the per-epoch
/// `train_log.jsonl` into the output directory.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainSummary, CliError> {
    cmd_train_with(cfg, |_| {})
}

/// [`cmd_train`] with a progress callback run after every epoch.
pub fn cmd_train_with(cfg: &RunConfig, mut on_epoch: impl FnMut(&EpochStats)) -> Result<TrainSummary, CliError> {
    cfg.validate()?;
    let stories = require_file("paths.stories", cfg.paths.stories.as_deref())?;
    let embeddings = require_file("paths.embeddings", cfg.paths.embeddings.as_deref())?;
    prepare_out_dir(&cfg.out_dir)?;

    let records = read_records(cfg, &stories, cfg.data.train_split)?;
    let store = read_embeddings(&embeddings)?;
    let vocab = build_vocab(&records, cfg.data.min_count);
    let examples = training_examples(&records, &store, &vocab).map_err(|e| CliError::Config(e.to_string()))?;
    let model_cfg = cfg.model.model_config(store.image_dim(), vocab.len());
    let mut model = StoryModel::new(model_cfg, cfg.seed).map_err(|e| CliError::Config(e.to_string()))?;

    if let Some(sg) = &cfg.pretrain {
        let corpus: Vec<Vec<usize>> = records
            .iter()
            .flat_map(|r| r.segment_tokens())
            .map(|toks| vocab.ids_of(&toks))
            .collect();
        let out = train_skipgram(&corpus, vocab.len(), sg).map_err(|e| CliError::Runtime(format!("pretraining: {e}")))?;
        let rows: Vec<f64> = (0..vocab.len()).flat_map(|i| out.table.row(i).to_vec()).collect();
        let table = Matrix::from_vec(vocab.len(), sg.embed_dim, rows).map_err(|e| CliError::Runtime(e.to_string()))?;
        model.set_embeddings(&table).map_err(|e| CliError::Runtime(e.to_string()))?;
    }

    let optim = OptimState::new(&model);
    let mut log = String::new();
    let outcome = train_from(model, optim, &examples, &cfg.train, |s: &EpochStats| {
        on_epoch(s);
        log.push_str(&serde_json::to_string(s).expect("epoch stats serialize"));
        log.push('\n');
    })
    .map_err(|e| CliError::Runtime(format!("training: {e}")))?;

    let num_params = outcome.model.params.num_params();
    let final_loss = outcome.epochs.last().map(|s| s.mean_loss);
    let ckpt = Checkpoint {
        model: outcome.model,
        optim: outcome.optim,
        vocab: vocab.clone(),
        train: cfg.train.clone(),
    };
    let ckpt_path = cfg.out_dir.join("checkpoint.vstm");
    let log_path = cfg.out_dir.join("train_log.jsonl");
    save_checkpoint(&ckpt_path, &ckpt).map_err(|e| CliError::Runtime(format!("{}: {e}", ckpt_path.display())))?;
    write_out(&log_path, log.as_bytes())?;
    Ok(TrainSummary {
        stories: records.len(),
        vocab_size: vocab.len(),
        num_params,
        final_loss,
        checkpoint: ckpt_path,
        loss_log: log_path,
    })
}

/// One generated story as written to the candidates file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateLine {
    pub story_id: String,
    pub texts: Vec<String>,
    #[serde(default)]
    pub concatenated: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateSummary {
    pub stories: usize,
    /// Fraction of stories where some 4-gram occurs in two or more segments.
    pub repeated_4gram_fraction: f64,
    pub repeated_story_ids: Vec<String>,
    pub candidates: PathBuf,
}

/// True when some word 4-gram appears in at least two different segments.
pub fn has_repeated_4gram<S: AsRef<str>>(segments: &[S]) -> bool {
    let mut seen: HashMap<Vec<String>, usize> = HashMap::new();
    for (k, seg) in segments.iter().enumerate() {
        let toks = tokenize(seg.as_ref());
        let grams: HashSet<&[String]> = toks.windows(4).collect();
        for g in grams {
            match seen.get(g) {
                Some(&other) if other != k => return true,
                Some(_) => {}
                None => {
                    seen.insert(g.to_vec(), k);
                }
            }
        }
    }
    false
}

/// Generates a story for every evaluation-split record; writes
/// `candidates.jsonl` and `generate_summary.json`.
pub fn cmd_generate(cfg: &RunConfig) -> Result<GenerateSummary, CliError> {
    cfg.validate()?;
    let stories = require_file("paths.stories", cfg.paths.stories.as_deref())?;
    let embeddings = require_file("paths.embeddings", cfg.paths.embeddings.as_deref())?;
    let ckpt_path = cfg.checkpoint_path();
    let ckpt_path = require_file("paths.checkpoint", Some(&ckpt_path))?;
    prepare_out_dir(&cfg.out_dir)?;

    let ckpt = load_checkpoint(&ckpt_path).map_err(|e| CliError::Config(format!("{}: {e}", ckpt_path.display())))?;
    if ckpt.vocab.len() != ckpt.model.config.vocab_size {
        return Err(CliError::Config(format!(
            "{}: vocabulary has {} tokens but the model expects {}",
            ckpt_path.display(),
            ckpt.vocab.len(),
            ckpt.model.config.vocab_size
        )));
    }
    let records = read_records(cfg, &stories, cfg.data.eval_split)?;
    let store = read_embeddings(&embeddings)?;
    if store.image_dim() != ckpt.model.config.image_dim {
        return Err(CliError::Config(format!(
            "{} holds {}-dim embeddings but the checkpoint expects {}",
            embeddings.display(),
            store.image_dim(),
            ckpt.model.config.image_dim
        )));
    }
    let seqs = records
        .iter()
        .map(|r| image_sequence(r, &store))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Config(e.to_string()))?;

    let lines = records
        .par_iter()
        .zip(&seqs)
        .map(|(r, seq)| {
            let story = generate_story(&ckpt.model, seq, &cfg.decode)
                .map_err(|e| CliError::Runtime(format!("story {}: {e}", r.story_id)))?;
            Ok(CandidateLine {
                story_id: r.story_id.clone(),
                texts: story.segment_texts(&ckpt.vocab),
                concatenated: story.text(&ckpt.vocab),
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let repeated: Vec<String> = lines
        .iter()
        .filter(|l| has_repeated_4gram(&l.texts))
        .map(|l| l.story_id.clone())
        .collect();
    let mut out = String::new();
    for l in &lines {
        out.push_str(&serde_json::to_string(l).expect("candidate lines serialize"));
        out.push('\n');
    }
    let path = cfg.out_dir.join("candidates.jsonl");
    let summary = GenerateSummary {
        stories: lines.len(),
        repeated_4gram_fraction: repeated.len() as f64 / lines.len() as f64,
        repeated_story_ids: repeated,
        candidates: path.clone(),
    };
    write_out(&path, out.as_bytes())?;
    write_out(
        &cfg.out_dir.join("generate_summary.json"),
        serde_json::to_string_pretty(&summary).expect("summary serializes").as_bytes(),
    )?;
    Ok(summary)
}

pub fn read_candidates(path: &Path) -> Result<Vec<CandidateLine>, CliError> {
    let file = File::open(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        if line.trim().is_empty() {
            continue;
        }
        let c: CandidateLine = serde_json::from_str(&line)
            .map_err(|e| CliError::Config(format!("{}:{}: {e}", path.display(), i + 1)))?;
        if !ids.insert(c.story_id.clone()) {
            return Err(CliError::Config(format!(
                "{}:{}: duplicate story id {}",
                path.display(),
                i + 1,
                c.story_id
            )));
        }
        out.push(c);
    }
    Ok(out)
}

/// Scores candidates against the evaluation split; writes `report.json` and
/// `report.txt`. Candidate and reference ids must match exactly.
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<MetricReport, CliError> {
    cfg.validate()?;
    let stories = require_file("paths.stories", cfg.paths.stories.as_deref())?;
    let cand_path = require_file("paths.candidates", Some(&cfg.candidates_path()))?;
    prepare_out_dir(&cfg.out_dir)?;

    let records = read_records(cfg, &stories, cfg.data.eval_split)?;
    let cands = read_candidates(&cand_path)?;
    let by_id: HashMap<&str, &CandidateLine> = cands.iter().map(|c| (c.story_id.as_str(), c)).collect();
    let ref_ids: BTreeSet<&str> = records.iter().map(|r| r.story_id.as_str()).collect();
    let missing: Vec<&str> = ref_ids.iter().filter(|id| !by_id.contains_key(*id)).copied().collect();
    let extra: BTreeSet<&str> = by_id.keys().filter(|id| !ref_ids.contains(*id)).copied().collect();
    if !missing.is_empty() || !extra.is_empty() {
        let extra: Vec<&str> = extra.into_iter().collect();
        return Err(CliError::Config(format!(
            "candidate ids do not match the {:?} references; missing: [{}]; extra: [{}]",
            cfg.data.eval_split,
            missing.join(", "),
            extra.join(", ")
        )));
    }
    let pairs: Vec<EvalPair> = records
        .iter()
        .map(|r| {
            let c = by_id[r.story_id.as_str()];
            EvalPair::new(r.story_id.clone(), c.texts.join(" "), vec![r.full_text()])
        })
        .collect();
    let report = evaluate_corpus(&pairs).map_err(|e| CliError::Config(e.to_string()))?;
    write_out(
        &cfg.out_dir.join("report.json"),
        serde_json::to_string_pretty(&report).expect("reports serialize").as_bytes(),
    )?;
    write_out(&cfg.out_dir.join("report.txt"), report.render_table().as_bytes())?;
    Ok(report)
}

/// Writes a synthetic `stories.jsonl` and `embeddings.vemb` into the output directory.
pub fn cmd_synth_data(cfg: &RunConfig) -> Result<(PathBuf, PathBuf), CliError> {
    cfg.validate()?;
    prepare_out_dir(&cfg.out_dir)?;
    let (records, store) =
        synth_dataset(cfg.seed, cfg.synth.stories, &cfg.synth.spec).map_err(|e| CliError::Config(e.to_string()))?;
    let stories = cfg.out_dir.join("stories.jsonl");
    let embeddings = cfg.out_dir.join("embeddings.vemb");
    save_stories(&stories, &records).map_err(|e| CliError::Runtime(format!("{}: {e}", stories.display())))?;
    save_embeddings(&embeddings, &store).map_err(|e| CliError::Runtime(format!("{}: {e}", embeddings.display())))?;
    Ok((stories, embeddings))
}

/// Builds the blind rating pool: generated candidates and the human stories
/// for the same ids from the evaluation split.
pub fn rating_service(cfg: &RunConfig) -> Result<RatingService, CliError> {
    cfg.validate()?;
    let stories = require_file("paths.stories", cfg.paths.stories.as_deref())?;
    let cand_path = require_file("paths.candidates", Some(&cfg.candidates_path()))?;
    if let Some(dir) = &cfg.paths.static_dir {
        if !dir.is_dir() {
            return Err(CliError::Config(format!("paths.static_dir: {} is not a directory", dir.display())));
        }
    }
    let log = cfg.ratings_log_path();
    if let Some(parent) = log.parent() {
        prepare_out_dir(parent)?;
    }
    let records = read_records(cfg, &stories, cfg.data.eval_split)?;
    let humans: HashMap<&str, &StoryRecord> = records.iter().map(|r| (r.story_id.as_str(), r)).collect();
    let take = cfg.ratings.stories_per_source.unwrap_or(usize::MAX);
    let cands: Vec<CandidateLine> = read_candidates(&cand_path)?
        .into_iter()
        .filter(|c| humans.contains_key(c.story_id.as_str()))
        .take(take)
        .collect();
    let model: Vec<(String, Vec<String>)> = cands.iter().map(|c| (c.story_id.clone(), c.texts.clone())).collect();
    let human: Vec<(String, Vec<String>)> = cands
        .iter()
        .map(|c| (c.story_id.clone(), humans[c.story_id.as_str()].texts.clone()))
        .collect();
    RatingService::open(build_pool(model, human), cfg.ratings.service.clone(), &log)
        .map_err(|e| CliError::Config(e.to_string()))
}

pub fn cmd_serve_ratings(cfg: &RunConfig) -> Result<(), CliError> {
    let svc = rating_service(cfg)?;
    eprintln!("serving {} rating tasks on http://{}", svc.tasks().len(), cfg.ratings.addr);
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    rt.block_on(storyteller_rating::http::serve(svc, cfg.ratings.addr, cfg.paths.static_dir.clone()))
        .map_err(|e| CliError::Runtime(format!("server on {}: {e}", cfg.ratings.addr)))
}
