//! The two-stage bootstrapping loop over a dataset directory.
//!
//! Stage 1 generates rooms, keeps the playable-novel ones and queues the most
//! repairable failures as tickets for a human to fix. Stage 2 repeatedly
//! fine-tunes, generates and keeps the playable-novel rooms with no human in
//! the loop. A [`Pipeline`] owns its directory exclusively through a lock file
//! and persists after every mutation.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{fingerprint, BackendError, GenerationRequest, Generator, ModelRef};
use crate::config::{ConfigError, PipelineConfig};
use crate::constraints::{rank_repairable, validate, PlayabilityReport};
use crate::dataset::{write_atomic, AugmentSummary, Dataset, DatasetError, Provenance, FINETUNE_FILE};
use crate::level::Grid;
use crate::metrics::{aggregate_round, classify, novelty, Classification, NoveltyResult, RoundStats};
use crate::prompting::{build_prompt, PromptSpec};

pub const STATE_FILE: &str = "state.json";
pub const TICKETS_FILE: &str = "tickets.json";
pub const REPORT_FILE: &str = "report.csv";
pub const LOCK_FILE: &str = ".lock";
/// Copies of the exact records each model was trained on, by fingerprint.
pub const MODELS_DIR: &str = "models";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("dataset {0} is in use by another run (remove the lock file if that run is gone)")]
    Locked(PathBuf),
    #[error("{0} already holds a dataset")]
    AlreadyInitialized(PathBuf),
    #[error("no such ticket {0}")]
    UnknownTicket(String),
    #[error("ticket {ticket_id} is already {status}")]
    TicketClosed { ticket_id: String, status: TicketStatus },
    #[error("ticket {ticket_id}: repaired room is {found:?}, the ticket's room is {expected:?}")]
    SizeMismatch {
        ticket_id: String,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("{file}: {reason}")]
    StateCorrupt { file: PathBuf, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TicketStatus {
    Pending,
    Repaired,
    Discarded,
}

impl std::fmt::Display for TicketStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TicketStatus::Pending => "pending",
            TicketStatus::Repaired => "repaired",
            TicketStatus::Discarded => "discarded",
        })
    }
}

/// A generated room queued for manual repair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairTicket {
    pub ticket_id: String,
    pub original_grid: Grid,
    pub report: PlayabilityReport,
    pub status: TicketStatus,
    pub repaired_grid: Option<Grid>,
    /// Stage-1 round that produced the room.
    #[serde(default)]
    pub round: u32,
}

/// Progress that is not derivable from the dataset itself.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineState {
    pub model: Option<ModelRef>,
    pub stage1_rounds: u32,
    /// Rooms added in stage 1, directly or through repair.
    pub stage1_accepted: usize,
    pub stage2_rounds: u32,
    pub next_ticket: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubmitOutcome {
    pub accepted: bool,
    pub report: PlayabilityReport,
    pub novelty: NoveltyResult,
    pub entry_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage1Outcome {
    pub stats: RoundStats,
    pub added: Vec<String>,
    pub tickets: Vec<String>,
}

/// Fixes queued rooms during an unattended stage-1 loop.
pub trait Repairer {
    /// A repaired version of the ticket's room, or `None` to discard it.
    fn repair(&mut self, ticket: &RepairTicket, dataset: &Dataset) -> Option<Grid>;
}

/// Exclusive hold on a dataset directory, released on drop.
#[derive(Debug)]
struct DirLock {
    path: PathBuf,
}

impl DirLock {
    fn acquire(dir: &Path) -> Result<DirLock, PipelineError> {
        let path = dir.join(LOCK_FILE);
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(DirLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(PipelineError::Locked(dir.to_path_buf())),
            Err(e) => Err(io_err(&path)(e)),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Mixes a run seed with a round number and a purpose tag.
pub fn derive_seed(seed: u64, round: u32, purpose: u64) -> u64 {
    let mut z = seed ^ (u64::from(round) << 32) ^ purpose.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const SPEC_SEED: u64 = 1;
const GENERATION_SEED: u64 = 2;
const STAGE1_TAG: u32 = 1 << 31;

/// Completions for `specs`, one per spec and in spec order.
///
/// Identical prompts are batched into one request with `n` set to their
/// multiplicity.
pub fn generate_for_specs(
    backend: &dyn Generator,
    model: &ModelRef,
    specs: &[PromptSpec],
    temperature: f64,
    seed: u64,
) -> Result<Vec<String>, BackendError> {
    let mut groups: Vec<(String, &PromptSpec, Vec<usize>)> = Vec::new();
    let mut by_prompt: HashMap<String, usize> = HashMap::new();
    for (i, spec) in specs.iter().enumerate() {
        let prompt = build_prompt(spec);
        match by_prompt.get(&prompt) {
            Some(&g) => groups[g].2.push(i),
            None => {
                by_prompt.insert(prompt.clone(), groups.len());
                groups.push((prompt, spec, vec![i]));
            }
        }
    }
    let mut out = vec![String::new(); specs.len()];
    for (prompt, spec, slots) in groups {
        let mut request = GenerationRequest::new(model.clone(), prompt, spec.width, spec.height);
        request.temperature = temperature;
        request.n = slots.len();
        request.seed = Some(seed);
        let texts = backend.generate(&request)?;
        if texts.len() != slots.len() {
            return Err(BackendError::BadResponse(format!(
                "asked for {} completions, got {}",
                slots.len(),
                texts.len()
            )));
        }
        for (slot, text) in slots.into_iter().zip(texts) {
            out[slot] = text;
        }
    }
    Ok(out)
}

/// Classifies a batch in parallel against a fixed view of the dataset.
pub fn classify_batch(
    texts: &[String],
    specs: &[PromptSpec],
    snapshot: &[(&str, &Grid)],
    config: &PipelineConfig,
) -> Vec<Classification> {
    texts
        .par_iter()
        .zip(specs.par_iter())
        .map(|(text, spec)| classify(text, spec, snapshot.iter().copied(), config))
        .collect()
}

pub struct Pipeline {
    dir: PathBuf,
    dataset: Dataset,
    state: PipelineState,
    tickets: Vec<RepairTicket>,
    _lock: DirLock,
}

impl std::fmt::Debug for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Pipeline")
            .field("dir", &self.dir)
            .field("entries", &self.dataset.len())
            .field("state", &self.state)
            .finish()
    }
}

fn read_json<T: for<'de> Deserialize<'de> + Default>(path: &Path) -> Result<T, PipelineError> {
    match fs::read_to_string(path) {
        Ok(text) => serde_json::from_str(&text).map_err(|e| PipelineError::StateCorrupt {
            file: path.to_path_buf(),
            reason: e.to_string(),
        }),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(T::default()),
        Err(e) => Err(io_err(path)(e)),
    }
}

impl Pipeline {
    /// Creates a dataset directory holding `rooms` as handmade entries.
    /// Rooms identical to an earlier one are skipped.
    pub fn init(dir: &Path, rooms: Vec<Grid>, config: PipelineConfig) -> Result<Pipeline, PipelineError> {
        config.validate()?;
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let lock = DirLock::acquire(dir)?;
        if dir.join(crate::dataset::MANIFEST_FILE).exists() {
            return Err(PipelineError::AlreadyInitialized(dir.to_path_buf()));
        }
        let mut dataset = Dataset::new(config);
        for grid in rooms {
            dataset.add_if_new(grid, Provenance::Handmade, 0)?;
        }
        let pipeline = Pipeline {
            dir: dir.to_path_buf(),
            dataset,
            state: PipelineState::default(),
            tickets: Vec::new(),
            _lock: lock,
        };
        pipeline.save()?;
        Ok(pipeline)
    }

    pub fn open(dir: &Path) -> Result<Pipeline, PipelineError> {
        let lock = DirLock::acquire(dir)?;
        let dataset = Dataset::load(dir)?;
        dataset.config.validate()?;
        Ok(Pipeline {
            state: read_json(&dir.join(STATE_FILE))?,
            tickets: read_json(&dir.join(TICKETS_FILE))?,
            dir: dir.to_path_buf(),
            dataset,
            _lock: lock,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.dataset.config
    }

    pub fn state(&self) -> &PipelineState {
        &self.state
    }

    pub fn tickets(&self) -> &[RepairTicket] {
        &self.tickets
    }

    pub fn ticket(&self, id: &str) -> Option<&RepairTicket> {
        self.tickets.iter().find(|t| t.ticket_id == id)
    }

    pub fn pending_tickets(&self) -> impl Iterator<Item = &RepairTicket> {
        self.tickets.iter().filter(|t| t.status == TicketStatus::Pending)
    }

    /// Replaces the stored configuration; persisted on the next save.
    pub fn set_config(&mut self, config: PipelineConfig) -> Result<(), PipelineError> {
        config.validate()?;
        self.dataset.config = config;
        self.save()
    }

    pub fn save(&self) -> Result<(), PipelineError> {
        self.dataset.save(&self.dir)?;
        let state = serde_json::to_string_pretty(&self.state).expect("state serializes");
        write_atomic(&self.dir.join(STATE_FILE), state.as_bytes())?;
        let tickets = serde_json::to_string_pretty(&self.tickets).expect("tickets serialize");
        write_atomic(&self.dir.join(TICKETS_FILE), tickets.as_bytes())?;
        Ok(())
    }

    /// Trains on the current records, continuing from the current model.
    pub fn fine_tune(&mut self, backend: &dyn Generator, epochs: u32) -> Result<ModelRef, PipelineError> {
        let records = self.dataset.finetune_jsonl();
        let models = self.dir.join(MODELS_DIR);
        fs::create_dir_all(&models).map_err(io_err(&models))?;
        let snapshot = models.join(format!("{}.jsonl", fingerprint(records.as_bytes())));
        write_atomic(&snapshot, records.as_bytes())?;
        let model = backend.fine_tune(self.state.model.as_ref(), &snapshot, epochs)?;
        log::info!("trained {} on {} records", model.handle, self.dataset.len());
        self.state.model = Some(model.clone());
        self.save()?;
        Ok(model)
    }

    /// A model trained on the current records: the stored one when it is up
    /// to date, otherwise a continuation of it trained for `epochs`.
    fn ready_model(&mut self, backend: &dyn Generator, epochs: u32) -> Result<ModelRef, PipelineError> {
        let current = fingerprint(self.dataset.finetune_jsonl().as_bytes());
        match self.state.model.clone() {
            Some(model) if model.trained_on == current => {
                let snapshot = self.dir.join(MODELS_DIR).join(format!("{current}.jsonl"));
                if snapshot.exists() {
                    backend.restore(&model, &snapshot)?;
                }
                Ok(model)
            }
            _ => self.fine_tune(backend, epochs),
        }
    }

    fn generate_round(
        &self,
        backend: &dyn Generator,
        model: &ModelRef,
        round: u32,
    ) -> Result<(Vec<PromptSpec>, Vec<String>), PipelineError> {
        let config = &self.dataset.config;
        let specs = self
            .dataset
            .sample_specs(config.gen_per_round, derive_seed(config.seed, round, SPEC_SEED))?;
        let texts = generate_for_specs(
            backend,
            model,
            &specs,
            config.temperature,
            derive_seed(config.seed, round, GENERATION_SEED),
        )?;
        Ok((specs, texts))
    }

    /// Adds the playable-novel rooms of a batch in order. Each one must also
    /// be novel against the rooms added before it in the same batch.
    fn add_batch(&mut self, results: &[Classification], provenance: Provenance, round: u32) -> Result<Vec<String>, PipelineError> {
        let fraction = self.dataset.config.novelty_fraction;
        let mut added: Vec<(String, Grid)> = Vec::new();
        for result in results.iter().filter(|r| r.playable_novel) {
            let grid = result.grid.as_ref().expect("playable rooms are parsed");
            if !novelty(grid, added.iter().map(|(id, g)| (id.as_str(), g)), fraction).is_novel {
                continue;
            }
            if self.dataset.add_if_new(grid.clone(), provenance.clone(), round)? {
                let id = self.dataset.entries().last().expect("just added").id.clone();
                added.push((id, grid.clone()));
            }
        }
        Ok(added.into_iter().map(|(id, _)| id).collect())
    }

    /// One stage-1 round: retrain if the dataset grew, generate, keep
    /// playable-novel rooms and queue the `repair_per_round` most repairable
    /// failures as tickets.
    pub fn stage1_round(&mut self, backend: &dyn Generator) -> Result<Stage1Outcome, PipelineError> {
        let config = self.dataset.config.clone();
        let model = self.ready_model(backend, config.stage1_epochs)?;
        let round = self.state.stage1_rounds + 1;
        let (specs, texts) = self.generate_round(backend, &model, round | STAGE1_TAG)?;
        let results = {
            let snapshot: Vec<(&str, &Grid)> = self.dataset.levels().collect();
            classify_batch(&texts, &specs, &snapshot, &config)
        };
        let added = self.add_batch(&results, Provenance::Generated, 0)?;

        let failing: Vec<&Classification> = results.iter().filter(|r| r.parse_ok && !r.playable()).collect();
        let picked = rank_repairable(
            failing.iter().map(|r| r.report.as_ref().expect("parsed rooms have a report")),
            config.repair_per_round,
        );
        let mut tickets = Vec::new();
        for i in picked {
            let ticket_id = format!("t{:05}", self.state.next_ticket);
            self.state.next_ticket += 1;
            self.tickets.push(RepairTicket {
                ticket_id: ticket_id.clone(),
                original_grid: failing[i].grid.clone().expect("parsed"),
                report: failing[i].report.clone().expect("parsed"),
                status: TicketStatus::Pending,
                repaired_grid: None,
                round,
            });
            tickets.push(ticket_id);
        }
        if results.iter().all(|r| !r.parse_ok) {
            log::warn!("stage-1 round {round}: no completion parsed");
        }

        let mut stats = aggregate_round(&results, round, config.seed);
        stats.n_added = added.len();
        self.state.stage1_rounds = round;
        self.state.stage1_accepted += added.len();
        self.save()?;
        Ok(Stage1Outcome { stats, added, tickets })
    }

    fn pending_mut(&mut self, ticket_id: &str) -> Result<&mut RepairTicket, PipelineError> {
        let ticket = self
            .tickets
            .iter_mut()
            .find(|t| t.ticket_id == ticket_id)
            .ok_or_else(|| PipelineError::UnknownTicket(ticket_id.to_string()))?;
        if ticket.status != TicketStatus::Pending {
            return Err(PipelineError::TicketClosed {
                ticket_id: ticket_id.to_string(),
                status: ticket.status,
            });
        }
        Ok(ticket)
    }

    /// Diagnostics for a candidate repair without committing it.
    pub fn preview_repair(&self, ticket_id: &str, grid: &Grid) -> Result<(PlayabilityReport, NoveltyResult), PipelineError> {
        let ticket = self
            .ticket(ticket_id)
            .ok_or_else(|| PipelineError::UnknownTicket(ticket_id.to_string()))?;
        let expected = (ticket.original_grid.width(), ticket.original_grid.height());
        let found = (grid.width(), grid.height());
        if expected != found {
            return Err(PipelineError::SizeMismatch {
                ticket_id: ticket_id.to_string(),
                expected,
                found,
            });
        }
        Ok((
            validate(grid),
            novelty(grid, self.dataset.levels(), self.dataset.config.novelty_fraction),
        ))
    }

    /// Adds a repaired room if it is playable and novel, closing the ticket.
    /// Otherwise the ticket stays pending and the diagnostics are returned.
    pub fn submit_repair(&mut self, ticket_id: &str, grid: Grid) -> Result<SubmitOutcome, PipelineError> {
        self.pending_mut(ticket_id)?;
        let report = validate(&grid);
        let novelty = novelty(&grid, self.dataset.levels(), self.dataset.config.novelty_fraction);
        if !(report.passed() && novelty.is_novel) {
            return Ok(SubmitOutcome {
                accepted: false,
                report,
                novelty,
                entry_id: None,
            });
        }
        self.dataset.add_if_new(grid.clone(), Provenance::Repaired, 0)?;
        let entry_id = self.dataset.entries().last().map(|e| e.id.clone());
        let ticket = self.pending_mut(ticket_id)?;
        ticket.status = TicketStatus::Repaired;
        ticket.repaired_grid = Some(grid);
        self.state.stage1_accepted += 1;
        self.save()?;
        Ok(SubmitOutcome {
            accepted: true,
            report,
            novelty,
            entry_id,
        })
    }

    pub fn discard(&mut self, ticket_id: &str) -> Result<(), PipelineError> {
        self.pending_mut(ticket_id)?.status = TicketStatus::Discarded;
        self.save()
    }

    /// Stage-1 rounds until `stage1_target_new` rooms have been accepted since
    /// the call started, or `max_rounds` rounds ran. Each round's tickets are
    /// handed to `repairer` before the next round.
    pub fn run_stage1(
        &mut self,
        backend: &dyn Generator,
        repairer: &mut dyn Repairer,
        max_rounds: u32,
    ) -> Result<Vec<Stage1Outcome>, PipelineError> {
        let start = self.state.stage1_accepted;
        let target = self.dataset.config.stage1_target_new;
        let mut outcomes = Vec::new();
        while self.state.stage1_accepted - start < target && (outcomes.len() as u32) < max_rounds {
            let outcome = self.stage1_round(backend)?;
            for id in &outcome.tickets {
                let ticket = self.ticket(id).expect("ticket just created").clone();
                match repairer.repair(&ticket, &self.dataset) {
                    Some(grid) => {
                        if !self.submit_repair(id, grid)?.accepted {
                            self.discard(id)?;
                        }
                    }
                    None => self.discard(id)?,
                }
            }
            outcomes.push(outcome);
        }
        Ok(outcomes)
    }

    /// Expands the dataset with the canonical transform set.
    pub fn augment(&mut self) -> Result<AugmentSummary, PipelineError> {
        let summary = self.dataset.augment_all(0);
        self.save()?;
        Ok(summary)
    }

    /// One stage-2 round: retrain, generate, and add every playable-novel room.
    /// The round's statistics are appended to the report.
    pub fn stage2_round(&mut self, backend: &dyn Generator) -> Result<RoundStats, PipelineError> {
        let config = self.dataset.config.clone();
        let round = self.state.stage2_rounds + 1;
        let model = self.fine_tune(backend, config.stage2_epochs)?;
        let (specs, texts) = self.generate_round(backend, &model, round)?;
        let results = {
            let snapshot: Vec<(&str, &Grid)> = self.dataset.levels().collect();
            classify_batch(&texts, &specs, &snapshot, &config)
        };
        let added = self.add_batch(&results, Provenance::Generated, round)?;
        let mut stats = aggregate_round(&results, round, config.seed);
        stats.n_added = added.len();
        self.state.stage2_rounds = round;
        self.append_report(&stats)?;
        self.save()?;
        log::info!(
            "stage-2 round {round}: {} playable-novel of {}, {} added",
            stats.n_playable_novel,
            stats.n_generated,
            stats.n_added
        );
        Ok(stats)
    }

    pub fn run_stage2(&mut self, backend: &dyn Generator, rounds: usize) -> Result<Vec<RoundStats>, PipelineError> {
        (0..rounds).map(|_| self.stage2_round(backend)).collect()
    }

    fn append_report(&self, stats: &RoundStats) -> Result<(), PipelineError> {
        let path = self.dir.join(REPORT_FILE);
        let mut text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => format!("{}\n", RoundStats::CSV_HEADER),
            Err(e) => return Err(io_err(&path)(e)),
        };
        text.push_str(&stats.csv_row());
        text.push('\n');
        write_atomic(&path, text.as_bytes())?;
        Ok(())
    }

    pub fn records_path(&self) -> PathBuf {
        self.dir.join(FINETUNE_FILE)
    }
}

/// Stage-2 rows from a dataset directory's report; empty if none was written.
pub fn read_report(dir: &Path) -> Result<Vec<RoundStats>, PipelineError> {
    let path = dir.join(REPORT_FILE);
    let text = match fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(&path)(e)),
    };
    text.lines()
        .skip(1)
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            RoundStats::parse_csv_row(line).ok_or_else(|| PipelineError::StateCorrupt {
                file: path.clone(),
                reason: format!("line {}: {line:?}", i + 2),
            })
        })
        .collect()
}

/// Per-round mean and range of the playable-novel count across runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundSummary {
    pub round: u32,
    pub runs: usize,
    pub mean_playable_novel: f64,
    pub min_playable_novel: usize,
    pub max_playable_novel: usize,
    pub mean_accuracy: f64,
}

pub fn summarize_rounds(rows: &[RoundStats]) -> Vec<RoundSummary> {
    let mut by_round: std::collections::BTreeMap<u32, Vec<&RoundStats>> = Default::default();
    for row in rows {
        by_round.entry(row.round_index).or_default().push(row);
    }
    by_round
        .into_iter()
        .map(|(round, rows)| {
            let n = rows.len() as f64;
            RoundSummary {
                round,
                runs: rows.len(),
                mean_playable_novel: rows.iter().map(|r| r.n_playable_novel as f64).sum::<f64>() / n,
                min_playable_novel: rows.iter().map(|r| r.n_playable_novel).min().unwrap_or(0),
                max_playable_novel: rows.iter().map(|r| r.n_playable_novel).max().unwrap_or(0),
                mean_accuracy: rows.iter().map(|r| r.mean_accuracy).sum::<f64>() / n,
            }
        })
        .collect()
}
