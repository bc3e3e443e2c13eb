//! Novelty, prompt accuracy, playable-novel classification and per-round
//! aggregation.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::PipelineConfig;
use crate::constraints::{validate, PlayabilityReport};
use crate::dataset::Dataset;
use crate::level::{parse_level, swap_patterns, tile_census, CensusError, Grid};
use crate::prompting::PromptSpec;

/// Hamming distance between rooms; rooms of different sizes are incomparable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Distance {
    Cells(usize),
    Incomparable,
}

impl Distance {
    /// Incomparable rooms meet any threshold.
    pub fn meets(self, threshold_cells: usize) -> bool {
        match self {
            Distance::Cells(d) => d >= threshold_cells,
            Distance::Incomparable => true,
        }
    }
}

impl Ord for Distance {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Distance::Cells(a), Distance::Cells(b)) => a.cmp(b),
            (Distance::Cells(_), Distance::Incomparable) => Ordering::Less,
            (Distance::Incomparable, Distance::Cells(_)) => Ordering::Greater,
            (Distance::Incomparable, Distance::Incomparable) => Ordering::Equal,
        }
    }
}

impl PartialOrd for Distance {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Distance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Distance::Cells(d) => write!(f, "{d}"),
            Distance::Incomparable => f.write_str("INCOMPARABLE"),
        }
    }
}

impl Serialize for Distance {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Distance::Cells(d) => s.serialize_u64(*d as u64),
            Distance::Incomparable => s.serialize_str("INCOMPARABLE"),
        }
    }
}

impl<'de> Deserialize<'de> for Distance {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Cells(usize),
            Tag(String),
        }
        match Raw::deserialize(d)? {
            Raw::Cells(n) => Ok(Distance::Cells(n)),
            Raw::Tag(t) if t == "INCOMPARABLE" => Ok(Distance::Incomparable),
            Raw::Tag(t) => Err(serde::de::Error::custom(format!("unknown distance {t:?}"))),
        }
    }
}

pub fn hamming_distance(a: &Grid, b: &Grid) -> Distance {
    if a.width() != b.width() || a.height() != b.height() {
        return Distance::Incomparable;
    }
    Distance::Cells(a.cells().iter().zip(b.cells()).filter(|(x, y)| x != y).count())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoveltyResult {
    pub min_distance_raw: Distance,
    pub min_distance_swapped: Distance,
    pub threshold_cells: usize,
    pub is_novel: bool,
    pub nearest_entry_id: Option<String>,
}

/// `ceil(fraction * cells)`, computed so that exact products are not bumped up
/// by float noise.
pub fn threshold_cells(fraction: f64, cells: usize) -> usize {
    let exact = fraction * cells as f64;
    let rounded = exact.round();
    if (exact - rounded).abs() < 1e-9 {
        rounded as usize
    } else {
        exact.ceil() as usize
    }
}

fn nearest<'a>(candidate: &Grid, levels: &[(&'a str, &'a Grid)]) -> (Distance, Option<&'a str>) {
    levels
        .iter()
        .map(|&(id, g)| (hamming_distance(candidate, g), id))
        .min_by_key(|&(d, _)| d)
        .map_or((Distance::Incomparable, None), |(d, id)| {
            (d, (d != Distance::Incomparable).then_some(id))
        })
}

/// Novelty of `candidate` against `levels`, checked as is and again with its
/// pattern tiles swapped.
pub fn novelty<'a>(
    candidate: &Grid,
    levels: impl IntoIterator<Item = (&'a str, &'a Grid)>,
    novelty_fraction: f64,
) -> NoveltyResult {
    assert!(
        novelty_fraction > 0.0 && novelty_fraction <= 1.0,
        "novelty fraction must be in (0, 1]"
    );
    let levels: Vec<(&str, &Grid)> = levels.into_iter().collect();
    let threshold = threshold_cells(novelty_fraction, candidate.area());

    let (raw, raw_id) = nearest(candidate, &levels);
    let (swapped, swapped_id) = match tile_census(candidate) {
        Ok(census) if census.pattern_tiles.len() == 2 => nearest(&swap_patterns(candidate, &census), &levels),
        _ => (raw, raw_id),
    };
    let nearest_entry_id = if swapped < raw { swapped_id } else { raw_id };
    NoveltyResult {
        min_distance_raw: raw,
        min_distance_swapped: swapped,
        threshold_cells: threshold,
        is_novel: raw.meets(threshold) && swapped.meets(threshold),
        nearest_entry_id: nearest_entry_id.map(str::to_owned),
    }
}

pub fn is_novel(candidate: &Grid, dataset: &Dataset, novelty_fraction: f64) -> NoveltyResult {
    novelty(candidate, dataset.levels(), novelty_fraction)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AccuracyError {
    #[error("prompt asks for 0% pattern tiles; accuracy is undefined")]
    ZeroPromptPercent,
    #[error(transparent)]
    Census(#[from] CensusError),
}

/// `1 - |P - G| / P` for prompt percentage `P` and generated percentage `G`.
/// Not clamped; it goes negative once `G > 2P`.
pub fn accuracy(spec: &PromptSpec, generated: &Grid) -> Result<f64, AccuracyError> {
    let prompt = spec.percent_pattern_tiles;
    if prompt == 0.0 {
        return Err(AccuracyError::ZeroPromptPercent);
    }
    let got = tile_census(generated)?.percent_pattern;
    Ok(1.0 - (prompt - got).abs() / prompt)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub parse_ok: bool,
    pub parse_error: Option<String>,
    #[serde(skip)]
    pub grid: Option<Grid>,
    pub report: Option<PlayabilityReport>,
    pub novelty: Option<NoveltyResult>,
    pub accuracy: Option<f64>,
    pub playable_novel: bool,
}

impl Classification {
    pub fn playable(&self) -> bool {
        self.report.as_ref().is_some_and(|r| r.passed())
    }

    pub fn novel(&self) -> bool {
        self.novelty.as_ref().is_some_and(|n| n.is_novel)
    }
}

/// Parses, validates and novelty-checks one completion.
///
/// Novelty is measured for every parsed room so that round statistics can
/// count novel rooms independently, but only rooms that pass all constraints
/// can be playable-novel.
pub fn classify<'a>(
    candidate_text: &str,
    spec: &PromptSpec,
    levels: impl IntoIterator<Item = (&'a str, &'a Grid)>,
    config: &PipelineConfig,
) -> Classification {
    let grid = match parse_level(candidate_text) {
        Ok(g) => g,
        Err(e) => {
            return Classification {
                parse_ok: false,
                parse_error: Some(e.to_string()),
                grid: None,
                report: None,
                novelty: None,
                accuracy: None,
                playable_novel: false,
            }
        }
    };
    let report = validate(&grid);
    let novelty = novelty(&grid, levels, config.novelty_fraction);
    let playable_novel = report.passed() && novelty.is_novel;
    Classification {
        parse_ok: true,
        parse_error: None,
        accuracy: accuracy(spec, &grid).ok(),
        grid: Some(grid),
        report: Some(report),
        novelty: Some(novelty),
        playable_novel,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundStats {
    pub round_index: u32,
    pub seed: u64,
    pub n_generated: usize,
    pub n_parsed: usize,
    pub n_playable: usize,
    pub n_novel: usize,
    pub n_playable_novel: usize,
    pub mean_accuracy: f64,
    /// Rooms actually added; can trail `n_playable_novel` when two candidates
    /// of the same round are too close to each other.
    #[serde(default)]
    pub n_added: usize,
}

impl RoundStats {
    pub const CSV_HEADER: &'static str =
        "round,seed,n_generated,n_parsed,n_playable,n_novel,n_playable_novel,mean_accuracy";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{:.6}",
            self.round_index,
            self.seed,
            self.n_generated,
            self.n_parsed,
            self.n_playable,
            self.n_novel,
            self.n_playable_novel,
            self.mean_accuracy
        )
    }

    pub fn parse_csv_row(line: &str) -> Option<RoundStats> {
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 8 {
            return None;
        }
        Some(RoundStats {
            round_index: f[0].parse().ok()?,
            seed: f[1].parse().ok()?,
            n_generated: f[2].parse().ok()?,
            n_parsed: f[3].parse().ok()?,
            n_playable: f[4].parse().ok()?,
            n_novel: f[5].parse().ok()?,
            n_playable_novel: f[6].parse().ok()?,
            mean_accuracy: f[7].parse().ok()?,
            n_added: 0,
        })
    }
}

/// Counts over one round. Accuracy is averaged over parsed rooms with a
/// defined accuracy, each clamped at zero.
pub fn aggregate_round(results: &[Classification], round_index: u32, seed: u64) -> RoundStats {
    let accuracies: Vec<f64> = results.iter().filter_map(|r| r.accuracy).map(|a| a.max(0.0)).collect();
    let mean_accuracy = if accuracies.is_empty() {
        0.0
    } else {
        accuracies.iter().sum::<f64>() / accuracies.len() as f64
    };
    RoundStats {
        round_index,
        seed,
        n_generated: results.len(),
        n_parsed: results.iter().filter(|r| r.parse_ok).count(),
        n_playable: results.iter().filter(|r| r.playable()).count(),
        n_novel: results.iter().filter(|r| r.novel()).count(),
        n_playable_novel: results.iter().filter(|r| r.playable_novel).count(),
        mean_accuracy,
        n_added: 0,
    }
}
