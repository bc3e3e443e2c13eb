//! The level store: provenance-tracked entries, augmentation, dedup,
//! prompt sampling and on-disk persistence.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::PipelineConfig;
use crate::constraints::validate;
use crate::level::{
    flip_horizontal, flip_vertical, parse_level, rotate90, serialize_level, swap_patterns, tile_census, CensusError,
    Grid, TransformError,
};
use crate::prompting::{derive_spec, make_record, PromptSpec};

pub const LEVELS_DIR: &str = "levels";
pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const FINETUNE_FILE: &str = "finetune.jsonl";
pub const CONFIG_FILE: &str = "config.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    FlipH,
    FlipV,
    Rot90,
    Swap,
    SwapFlipH,
    SwapFlipV,
}

impl Transform {
    /// Applied to every source room, in this order, after the room itself.
    pub const CANONICAL: [Transform; 6] = [
        Transform::FlipH,
        Transform::FlipV,
        Transform::Rot90,
        Transform::Swap,
        Transform::SwapFlipH,
        Transform::SwapFlipV,
    ];

    pub fn apply(self, grid: &Grid) -> Result<Grid, TransformError> {
        let swap = |g: &Grid| match tile_census(g) {
            Ok(census) => swap_patterns(g, &census),
            Err(_) => g.clone(),
        };
        Ok(match self {
            Transform::FlipH => flip_horizontal(grid),
            Transform::FlipV => flip_vertical(grid),
            Transform::Rot90 => rotate90(grid)?,
            Transform::Swap => swap(grid),
            Transform::SwapFlipH => swap(&flip_horizontal(grid)),
            Transform::SwapFlipV => swap(&flip_vertical(grid)),
        })
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Transform::FlipH => "flip_h",
            Transform::FlipV => "flip_v",
            Transform::Rot90 => "rot90",
            Transform::Swap => "swap",
            Transform::SwapFlipH => "swap_flip_h",
            Transform::SwapFlipV => "swap_flip_v",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Handmade,
    Repaired,
    Generated,
    Augmented { transform: Transform, parent: String },
}

impl Provenance {
    pub fn is_augmented(&self) -> bool {
        matches!(self, Provenance::Augmented { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetEntry {
    pub id: String,
    pub grid: Grid,
    pub spec: PromptSpec,
    pub provenance: Provenance,
    pub round_added: u32,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest line {line}: {reason}")]
    ManifestCorrupt { line: usize, reason: String },
    #[error("level file {file}: {reason}")]
    LevelFileUnparseable { file: PathBuf, reason: String },
    #[error("room cannot be described by a prompt: {0}")]
    Census(#[from] CensusError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestLine {
    id: String,
    file: String,
    provenance: Provenance,
    round_added: u32,
}

/// What one `augment_all` pass did.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AugmentSummary {
    pub added: usize,
    pub duplicates: usize,
    pub dropped_unplayable: usize,
    pub relocation_failures: Vec<(String, TransformError)>,
}

/// Ordered, duplicate-free collection of rooms.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    entries: Vec<DatasetEntry>,
    seen: HashSet<Grid>,
    pub config: PipelineConfig,
}

impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries && self.config == other.config
    }
}

impl Dataset {
    pub fn new(config: PipelineConfig) -> Dataset {
        Dataset {
            config,
            ..Default::default()
        }
    }

    pub fn entries(&self) -> &[DatasetEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&DatasetEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn contains(&self, grid: &Grid) -> bool {
        self.seen.contains(grid)
    }

    /// `(id, grid)` pairs, the view novelty checks run against.
    pub fn levels(&self) -> impl Iterator<Item = (&str, &Grid)> {
        self.entries.iter().map(|e| (e.id.as_str(), &e.grid))
    }

    fn next_id(&self) -> String {
        format!("r{:05}", self.entries.len())
    }

    /// Appends `grid` unless an identical room is already stored.
    pub fn add_if_new(&mut self, grid: Grid, provenance: Provenance, round: u32) -> Result<bool, DatasetError> {
        if self.seen.contains(&grid) {
            return Ok(false);
        }
        let spec = derive_spec(&grid)?;
        self.seen.insert(grid.clone());
        self.entries.push(DatasetEntry {
            id: self.next_id(),
            grid,
            spec,
            provenance,
            round_added: round,
        });
        Ok(true)
    }

    /// Expands every non-augmented entry with the canonical transform set.
    ///
    /// Variants that duplicate an existing room are skipped. Variants that
    /// stop passing validation, or whose doors cannot be respaced after
    /// rotation, are dropped with a warning. Augmented entries are never
    /// augmented again, so repeated passes add nothing new.
    pub fn augment_all(&mut self, round: u32) -> AugmentSummary {
        let mut summary = AugmentSummary::default();
        let sources: Vec<(String, Grid)> = self
            .entries
            .iter()
            .filter(|e| !e.provenance.is_augmented())
            .map(|e| (e.id.clone(), e.grid.clone()))
            .collect();

        for (parent, grid) in sources {
            for transform in Transform::CANONICAL {
                let variant = match transform.apply(&grid) {
                    Ok(v) => v,
                    Err(e) => {
                        log::warn!("{parent}: {transform} skipped: {e}");
                        summary.relocation_failures.push((parent.clone(), e));
                        continue;
                    }
                };
                if self.seen.contains(&variant) {
                    summary.duplicates += 1;
                    continue;
                }
                if !validate(&variant).passed() {
                    log::warn!("{parent}: {transform} variant fails validation, dropped");
                    summary.dropped_unplayable += 1;
                    continue;
                }
                let provenance = Provenance::Augmented {
                    transform,
                    parent: parent.clone(),
                };
                match self.add_if_new(variant, provenance, round) {
                    Ok(true) => summary.added += 1,
                    Ok(false) => summary.duplicates += 1,
                    Err(e) => {
                        log::warn!("{parent}: {transform} variant has no prompt: {e}");
                        summary.dropped_unplayable += 1;
                    }
                }
            }
        }
        summary
    }

    /// `n` specs drawn uniformly, with replacement, from the entries.
    pub fn sample_specs(&self, n: usize, rng_seed: u64) -> Result<Vec<PromptSpec>, DatasetError> {
        if self.entries.is_empty() {
            return Err(DatasetError::EmptyDataset);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let len = self.entries.len() as u64;
        Ok((0..n)
            .map(|_| self.entries[rng.random_range(0..len) as usize].spec.clone())
            .collect())
    }

    /// The fine-tune file contents, one record per entry.
    pub fn finetune_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let record = make_record(&e.grid).expect("entries always have a census");
            out.push_str(&record.to_json_line());
            out.push('\n');
        }
        out
    }

    pub fn save(&self, dir: &Path) -> Result<(), DatasetError> {
        let levels = dir.join(LEVELS_DIR);
        fs::create_dir_all(&levels).map_err(io_err(&levels))?;

        let mut manifest = String::new();
        for e in &self.entries {
            let file = format!("{LEVELS_DIR}/{}.lvl", e.id);
            let path = dir.join(&file);
            fs::write(&path, serialize_level(&e.grid, false)).map_err(io_err(&path))?;
            let line = ManifestLine {
                id: e.id.clone(),
                file,
                provenance: e.provenance.clone(),
                round_added: e.round_added,
            };
            manifest.push_str(&serde_json::to_string(&line).expect("manifest line serializes"));
            manifest.push('\n');
        }
        write_atomic(&dir.join(MANIFEST_FILE), manifest.as_bytes())?;
        write_atomic(&dir.join(FINETUNE_FILE), self.finetune_jsonl().as_bytes())?;
        let config = serde_json::to_string_pretty(&self.config).expect("config serializes");
        write_atomic(&dir.join(CONFIG_FILE), config.as_bytes())?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Dataset, DatasetError> {
        let config_path = dir.join(CONFIG_FILE);
        let config = match fs::read_to_string(&config_path) {
            Ok(text) => serde_json::from_str(&text).map_err(|e| DatasetError::ManifestCorrupt {
                line: 0,
                reason: format!("{CONFIG_FILE}: {e}"),
            })?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => PipelineConfig::default(),
            Err(e) => return Err(io_err(&config_path)(e)),
        };

        let manifest_path = dir.join(MANIFEST_FILE);
        let manifest = fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
        let mut dataset = Dataset::new(config);
        for (i, line) in manifest.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let entry: ManifestLine = serde_json::from_str(line).map_err(|e| DatasetError::ManifestCorrupt {
                line: i + 1,
                reason: e.to_string(),
            })?;
            let file = dir.join(&entry.file);
            let unparseable = |reason: String| DatasetError::LevelFileUnparseable {
                file: file.clone(),
                reason,
            };
            let text = fs::read_to_string(&file).map_err(|e| unparseable(e.to_string()))?;
            let grid = parse_level(&text).map_err(|e| unparseable(e.to_string()))?;
            let spec = derive_spec(&grid).map_err(|e| unparseable(e.to_string()))?;
            if !dataset.seen.insert(grid.clone()) {
                return Err(DatasetError::ManifestCorrupt {
                    line: i + 1,
                    reason: format!("{} duplicates an earlier level", entry.id),
                });
            }
            if dataset.get(&entry.id).is_some() {
                return Err(DatasetError::ManifestCorrupt {
                    line: i + 1,
                    reason: format!("duplicate id {}", entry.id),
                });
            }
            dataset.entries.push(DatasetEntry {
                id: entry.id,
                grid,
                spec,
                provenance: entry.provenance,
                round_added: entry.round_added,
            });
        }
        Ok(dataset)
    }
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), DatasetError> {
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(bytes).map_err(io_err(&tmp))?;
    f.sync_all().map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}
