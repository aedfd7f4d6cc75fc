//! Transport-free rating service: sessions, masked batch delivery,
//! server-side replay accounting, rating ingestion into an append-only log,
//! training modules and progress. The HTTP layer maps these calls 1:1.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::phones::{Subtype, Target};
use crate::ratings::{
    advance_training, make_batches, record_batch_completed, score_module, write_ratings, BatchItem,
    Flag, ModuleResult, PoolItem, RaterProgress, RatingRecord, Stage, TrainingModule, BATCH_SIZE,
    MAX_REPLAYS,
};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("unknown or missing session token")]
    Unauthorized,
    #[error("{0}")]
    Forbidden(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("log: {0}")]
    Log(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ServiceError>;

/// Expert answer key for one training module.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleKey {
    pub target: Target,
    pub module: TrainingModule,
    pub items: Vec<TrainingItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingItem {
    pub audio_ref: String,
    pub target_word: String,
    pub expert_score: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceConfig {
    pub seed: u64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    pub pool: Vec<PoolItem>,
    #[serde(default)]
    pub modules: Vec<ModuleKey>,
}

fn default_batch_size() -> usize {
    BATCH_SIZE
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub token: String,
    pub rater_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchInfo {
    pub batch_id: String,
    pub target: Target,
    pub total: usize,
    pub rated: usize,
}

/// What the rater sees for one item. Speaker and timepoint never appear.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemPayload {
    pub batch_id: String,
    pub index: usize,
    pub total: usize,
    pub file_id: String,
    pub audio_ref: String,
    pub target_word: String,
    pub target: Target,
    pub replay_limit: u8,
    pub replays_used: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CurrentItem {
    Item(ItemPayload),
    BatchComplete { batch_id: String, total: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayStatus {
    pub replays_used: u8,
    pub replay_limit: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingSubmission {
    pub submission_id: String,
    pub file_id: String,
    pub score: u8,
    #[serde(default)]
    pub subtype: Option<Subtype>,
    #[serde(default)]
    pub flags: Vec<Flag>,
    #[serde(default)]
    pub lengthened: bool,
    #[serde(default)]
    pub comment: String,
    /// Client-side count; checked but the server's own count is recorded.
    #[serde(default)]
    pub replay_count: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitOutcome {
    pub submission_id: String,
    pub file_id: String,
    pub accepted: bool,
    /// The record replaces an earlier rating of the same file by this rater.
    pub supersedes: bool,
    pub replay_count: u8,
    pub batch_complete: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleItemPayload {
    pub index: usize,
    pub audio_ref: String,
    pub target_word: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulePayload {
    pub target: Target,
    pub module: TrainingModule,
    pub item_count: usize,
    pub items: Vec<ModuleItemPayload>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleSubmission {
    pub target: Target,
    pub answers: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleOutcome {
    pub result: ModuleResult,
    pub progress: TargetProgress,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetProgress {
    pub target: Target,
    #[serde(flatten)]
    pub stage: Stage,
    pub certified: bool,
    pub batches_completed: u32,
    pub maintenance_due: bool,
    pub current_module: Option<TrainingModule>,
}

impl TargetProgress {
    fn new(target: Target, p: &RaterProgress) -> Self {
        Self {
            target,
            stage: p.stage,
            certified: p.certified(),
            batches_completed: p.batches_completed,
            maintenance_due: p.maintenance_due,
            current_module: p.current_module(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub rater_id: String,
    pub targets: Vec<TargetProgress>,
    pub active_batch: Option<BatchInfo>,
    pub ratings_submitted: usize,
}

/// One line of the append-only log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LogEvent {
    Rating {
        submission_id: String,
        target: Target,
        supersedes: bool,
        record: RatingRecord,
    },
    Module {
        rater_id: String,
        target: Target,
        result: ModuleResult,
    },
    BatchCompleted {
        rater_id: String,
        target: Target,
        batch_id: String,
    },
}

#[derive(Debug, Clone)]
struct ActiveBatch {
    id: String,
    target: Target,
    items: Vec<BatchItem>,
    rated: Vec<bool>,
    replays: Vec<u8>,
}

impl ActiveBatch {
    fn cursor(&self) -> Option<usize> {
        self.rated.iter().position(|r| !r)
    }

    fn info(&self) -> BatchInfo {
        BatchInfo {
            batch_id: self.id.clone(),
            target: self.target,
            total: self.items.len(),
            rated: self.rated.iter().filter(|r| **r).count(),
        }
    }
}

#[derive(Debug, Clone, Default)]
struct RaterState {
    progress: BTreeMap<Target, RaterProgress>,
    batch: Option<ActiveBatch>,
    rated: HashSet<String>,
    submitted: usize,
}

impl RaterState {
    fn progress(&self, t: Target) -> RaterProgress {
        self.progress.get(&t).copied().unwrap_or_default()
    }
}

pub struct RatingService {
    config: ServiceConfig,
    batches: BTreeMap<Target, Vec<Vec<BatchItem>>>,
    sessions: HashMap<String, String>,
    raters: HashMap<String, RaterState>,
    submissions: HashMap<String, SubmitOutcome>,
    records: Vec<RatingRecord>,
    token_rng: ChaCha8Rng,
    log: Option<File>,
    log_path: Option<PathBuf>,
}

impl std::fmt::Debug for RatingService {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RatingService")
            .field("pool", &self.config.pool.len())
            .field("records", &self.records.len())
            .field("log_path", &self.log_path)
            .finish()
    }
}

impl RatingService {
    /// In-memory service with no persistent log.
    pub fn new(config: ServiceConfig) -> Result<Self> {
        if config.batch_size == 0 {
            return Err(ServiceError::Validation(
                "batch_size must be positive".into(),
            ));
        }
        let mut seen = HashSet::new();
        for p in &config.pool {
            if !seen.insert(p.file_id.as_str()) {
                return Err(ServiceError::Validation(format!(
                    "duplicate file_id `{}` in pool",
                    p.file_id
                )));
            }
        }
        for k in &config.modules {
            if k.items.len() != k.module.item_count() {
                return Err(ServiceError::Validation(format!(
                    "module {:?} for /{}/ has {} items, expected {}",
                    k.module,
                    k.target,
                    k.items.len(),
                    k.module.item_count()
                )));
            }
            if let Some(s) = k.items.iter().find(|i| !(1..=5).contains(&i.expert_score)) {
                return Err(ServiceError::Validation(format!(
                    "expert score {} outside 1..=5",
                    s.expert_score
                )));
            }
        }
        let mut batches = BTreeMap::new();
        for t in Target::ALL {
            let pool: Vec<PoolItem> = config
                .pool
                .iter()
                .filter(|p| p.target == t)
                .cloned()
                .collect();
            batches.insert(
                t,
                make_batches(&pool, config.batch_size, config.seed ^ t as u64),
            );
        }
        Ok(Self {
            token_rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
            batches,
            sessions: HashMap::new(),
            raters: HashMap::new(),
            submissions: HashMap::new(),
            records: Vec::new(),
            log: None,
            log_path: None,
        })
    }

    /// Service backed by a JSONL log. Existing events are replayed to
    /// restore ratings, submission ids and training progress.
    pub fn open(config: ServiceConfig, log_path: &Path) -> Result<Self> {
        let mut svc = Self::new(config)?;
        if log_path.exists() {
            let f = BufReader::new(File::open(log_path)?);
            for (i, line) in f.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let ev: LogEvent = serde_json::from_str(&line)
                    .map_err(|e| ServiceError::Log(format!("line {}: {e}", i + 1)))?;
                svc.apply(&ev);
            }
        }
        svc.log = Some(
            OpenOptions::new()
                .create(true)
                .append(true)
                .open(log_path)?,
        );
        svc.log_path = Some(log_path.to_path_buf());
        Ok(svc)
    }

    fn apply(&mut self, ev: &LogEvent) {
        match ev {
            LogEvent::Rating {
                submission_id,
                supersedes,
                record,
                ..
            } => {
                let st = self.raters.entry(record.rater_id.clone()).or_default();
                st.rated.insert(record.file_id.clone());
                st.submitted += 1;
                self.submissions.insert(
                    submission_id.clone(),
                    SubmitOutcome {
                        submission_id: submission_id.clone(),
                        file_id: record.file_id.clone(),
                        accepted: true,
                        supersedes: *supersedes,
                        replay_count: record.replay_count,
                        batch_complete: false,
                    },
                );
                self.records.push(record.clone());
            }
            LogEvent::Module {
                rater_id,
                target,
                result,
            } => {
                let st = self.raters.entry(rater_id.clone()).or_default();
                let p = st.progress(*target);
                st.progress.insert(*target, advance_training(p, result));
            }
            LogEvent::BatchCompleted {
                rater_id, target, ..
            } => {
                let st = self.raters.entry(rater_id.clone()).or_default();
                let p = st.progress(*target);
                st.progress.insert(*target, record_batch_completed(p));
            }
        }
    }

    fn append(&mut self, ev: LogEvent) -> Result<()> {
        if let Some(f) = self.log.as_mut() {
            let mut line =
                serde_json::to_string(&ev).map_err(|e| ServiceError::Log(e.to_string()))?;
            line.push('\n');
            f.write_all(line.as_bytes())?;
            f.flush()?;
        }
        self.apply(&ev);
        Ok(())
    }

    pub fn open_session(&mut self, rater_id: &str) -> Result<SessionInfo> {
        if rater_id.trim().is_empty() {
            return Err(ServiceError::Validation(
                "rater_id must be non-empty".into(),
            ));
        }
        let token = format!(
            "{:016x}{:016x}",
            self.token_rng.random::<u64>(),
            self.token_rng.random::<u64>()
        );
        self.sessions.insert(token.clone(), rater_id.to_string());
        self.raters.entry(rater_id.to_string()).or_default();
        Ok(SessionInfo {
            token,
            rater_id: rater_id.to_string(),
        })
    }

    pub fn rater_of(&self, token: &str) -> Result<&str> {
        self.sessions
            .get(token)
            .map(String::as_str)
            .ok_or(ServiceError::Unauthorized)
    }

    fn state(&self, token: &str) -> Result<(&str, &RaterState)> {
        let rater = self.rater_of(token)?;
        Ok((rater, &self.raters[rater]))
    }

    fn state_mut(&mut self, token: &str) -> Result<(String, &mut RaterState)> {
        let rater = self.rater_of(token)?.to_string();
        let st = self
            .raters
            .get_mut(&rater)
            .expect("session rater has state");
        Ok((rater, st))
    }

    /// Returns the active batch if it still has unrated items, otherwise
    /// assigns the next batch for `target`.
    pub fn next_batch(&mut self, token: &str, target: Target) -> Result<BatchInfo> {
        let (rater, st) = self.state(token)?;
        if let Some(b) = &st.batch {
            if b.cursor().is_some() {
                if b.target != target {
                    return Err(ServiceError::Conflict(format!(
                        "batch {} for /{}/ is still open",
                        b.id, b.target
                    )));
                }
                return Ok(b.info());
            }
        }
        let p = st.progress(target);
        if !p.certified() {
            return Err(ServiceError::Forbidden(format!(
                "rater {rater} is not certified for /{target}/"
            )));
        }
        if p.maintenance_due {
            return Err(ServiceError::Forbidden(format!(
                "maintenance module due for /{target}/"
            )));
        }
        // First batch, in seeded order, with any file this rater has not rated.
        let all = &self.batches[&target];
        let Some((k, items)) = all
            .iter()
            .enumerate()
            .find(|(_, b)| b.iter().any(|i| !st.rated.contains(&i.file_id)))
        else {
            return Err(ServiceError::NotFound(format!(
                "no unrated files left for /{target}/"
            )));
        };
        let items: Vec<BatchItem> = items
            .iter()
            .filter(|i| !st.rated.contains(&i.file_id))
            .cloned()
            .collect();
        let n = items.len();
        let batch = ActiveBatch {
            id: format!("{target}-{:04}", k + 1),
            target,
            items,
            rated: vec![false; n],
            replays: vec![0; n],
        };
        let info = batch.info();
        self.state_mut(token)?.1.batch = Some(batch);
        Ok(info)
    }

    pub fn current_item(&self, token: &str) -> Result<CurrentItem> {
        let (_, st) = self.state(token)?;
        let b = st
            .batch
            .as_ref()
            .ok_or_else(|| ServiceError::NotFound("no batch assigned".into()))?;
        Ok(match b.cursor() {
            None => CurrentItem::BatchComplete {
                batch_id: b.id.clone(),
                total: b.items.len(),
            },
            Some(i) => {
                let it = &b.items[i];
                CurrentItem::Item(ItemPayload {
                    batch_id: b.id.clone(),
                    index: i + 1,
                    total: b.items.len(),
                    file_id: it.file_id.clone(),
                    audio_ref: it.audio_ref.clone(),
                    target_word: it.target_word.clone(),
                    target: it.target,
                    replay_limit: MAX_REPLAYS,
                    replays_used: b.replays[i],
                })
            }
        })
    }

    /// Counts one replay of the current item; refuses past the limit.
    pub fn replay(&mut self, token: &str) -> Result<ReplayStatus> {
        let (_, st) = self.state_mut(token)?;
        let b = st
            .batch
            .as_mut()
            .ok_or_else(|| ServiceError::NotFound("no batch assigned".into()))?;
        let i = b
            .cursor()
            .ok_or_else(|| ServiceError::Conflict("batch complete".into()))?;
        if b.replays[i] >= MAX_REPLAYS {
            return Err(ServiceError::Conflict(format!(
                "replay limit of {MAX_REPLAYS} reached"
            )));
        }
        b.replays[i] += 1;
        Ok(ReplayStatus {
            replays_used: b.replays[i],
            replay_limit: MAX_REPLAYS,
        })
    }

    /// Accepts a rating for the current item, or a superseding rating for an
    /// item already rated in the active batch. A repeated submission id
    /// returns the stored outcome without touching the log.
    pub fn submit_rating(&mut self, token: &str, sub: RatingSubmission) -> Result<SubmitOutcome> {
        let rater = self.rater_of(token)?.to_string();
        if let Some(prev) = self.submissions.get(&sub.submission_id) {
            if self
                .records
                .iter()
                .any(|r| r.rater_id == rater && r.file_id == prev.file_id)
            {
                return Ok(prev.clone());
            }
            return Err(ServiceError::Conflict(
                "submission id belongs to another rater".into(),
            ));
        }
        if sub.submission_id.trim().is_empty() {
            return Err(ServiceError::Validation(
                "submission_id must be non-empty".into(),
            ));
        }
        let st = &self.raters[&rater];
        let b = st
            .batch
            .as_ref()
            .ok_or_else(|| ServiceError::NotFound("no batch assigned".into()))?;
        let pos = b
            .items
            .iter()
            .position(|i| i.file_id == sub.file_id)
            .ok_or_else(|| {
                ServiceError::Validation(format!(
                    "file `{}` is not in the active batch",
                    sub.file_id
                ))
            })?;
        let supersedes = b.rated[pos];
        if !supersedes && b.cursor() != Some(pos) {
            return Err(ServiceError::Validation(format!(
                "file `{}` is not the current item",
                sub.file_id
            )));
        }
        if let Some(c) = sub.replay_count {
            if c > MAX_REPLAYS {
                return Err(ServiceError::Validation(format!(
                    "replay count {c} exceeds {MAX_REPLAYS}"
                )));
            }
        }
        let target = b.target;
        let record = RatingRecord {
            rater_id: rater.clone(),
            file_id: sub.file_id.clone(),
            score: sub.score,
            subtype: sub.subtype,
            flags: sub.flags.iter().copied().collect(),
            lengthened: sub.lengthened,
            comment: sub.comment.clone(),
            replay_count: b.replays[pos],
        };
        record
            .validate(Some(target))
            .map_err(|e| ServiceError::Validation(e.to_string()))?;

        self.append(LogEvent::Rating {
            submission_id: sub.submission_id.clone(),
            target,
            supersedes,
            record,
        })?;
        let st = self.raters.get_mut(&rater).expect("rater state");
        let b = st.batch.as_mut().expect("active batch");
        let was_open = b.cursor().is_some();
        b.rated[pos] = true;
        let batch_complete = was_open && b.cursor().is_none();
        let batch_id = b.id.clone();
        if batch_complete {
            self.append(LogEvent::BatchCompleted {
                rater_id: rater.clone(),
                target,
                batch_id,
            })?;
        }
        let out = self
            .submissions
            .get_mut(&sub.submission_id)
            .expect("just recorded");
        out.batch_complete = batch_complete;
        Ok(out.clone())
    }

    /// The module the rater must take next for `target`, without answers.
    pub fn training_module(&self, token: &str, target: Target) -> Result<ModulePayload> {
        let (_, st) = self.state(token)?;
        let module = st
            .progress(target)
            .current_module()
            .ok_or_else(|| ServiceError::NotFound(format!("no module due for /{target}/")))?;
        let key = self.key(target, module)?;
        Ok(ModulePayload {
            target,
            module,
            item_count: key.items.len(),
            items: key
                .items
                .iter()
                .enumerate()
                .map(|(i, it)| ModuleItemPayload {
                    index: i + 1,
                    audio_ref: it.audio_ref.clone(),
                    target_word: it.target_word.clone(),
                })
                .collect(),
        })
    }

    fn key(&self, target: Target, module: TrainingModule) -> Result<&ModuleKey> {
        self.config
            .modules
            .iter()
            .find(|k| k.target == target && k.module == module)
            .ok_or_else(|| {
                ServiceError::NotFound(format!("no answer key for {module:?} on /{target}/"))
            })
    }

    pub fn submit_module(&mut self, token: &str, sub: ModuleSubmission) -> Result<ModuleOutcome> {
        let (rater, st) = self.state(token)?;
        let rater = rater.to_string();
        let module = st
            .progress(sub.target)
            .current_module()
            .ok_or_else(|| ServiceError::NotFound(format!("no module due for /{}/", sub.target)))?;
        let expert: Vec<u8> = self
            .key(sub.target, module)?
            .items
            .iter()
            .map(|i| i.expert_score)
            .collect();
        let result = score_module(module, &sub.answers, &expert)
            .map_err(|e| ServiceError::Validation(e.to_string()))?;
        self.append(LogEvent::Module {
            rater_id: rater.clone(),
            target: sub.target,
            result,
        })?;
        let p = self.raters[&rater].progress(sub.target);
        Ok(ModuleOutcome {
            result,
            progress: TargetProgress::new(sub.target, &p),
        })
    }

    pub fn progress(&self, token: &str) -> Result<Progress> {
        let (rater, st) = self.state(token)?;
        Ok(Progress {
            rater_id: rater.to_string(),
            targets: Target::ALL
                .iter()
                .map(|&t| TargetProgress::new(t, &st.progress(t)))
                .collect(),
            active_batch: st.batch.as_ref().map(ActiveBatch::info),
            ratings_submitted: st.submitted,
        })
    }

    /// Every accepted record in log order, superseded ones included.
    pub fn records(&self) -> &[RatingRecord] {
        &self.records
    }

    pub fn export_csv(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        write_ratings(&mut buf, &self.records).map_err(|e| ServiceError::Log(e.to_string()))?;
        Ok(buf)
    }
}
