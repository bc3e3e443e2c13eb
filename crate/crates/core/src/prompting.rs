//! The controllable prompt and prompt/completion fine-tune records.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::level::{parse_level, serialize_level, tile_census, CensusError, Grid, LevelError, Tile, TERMINATOR};

/// Marks the end of a prompt.
pub const PROMPT_END: &str = "->";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub width: usize,
    pub height: usize,
    pub base_tile: Tile,
    pub border_tile: Tile,
    pub pattern_tiles: Vec<Tile>,
    pub percent_pattern_tiles: f64,
}

impl PromptSpec {
    /// The percentage as written into the prompt, rounded half up.
    pub fn rendered_percent(&self) -> u64 {
        (self.percent_pattern_tiles + 0.5).floor() as u64
    }

    /// Same spec with the percentage replaced by its rendered integer.
    pub fn rounded(&self) -> PromptSpec {
        PromptSpec {
            percent_pattern_tiles: self.rendered_percent() as f64,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("prompt diverges from the template at byte {position}: expected {expected}")]
    TemplateMismatch { position: usize, expected: String },
}

pub fn derive_spec(grid: &Grid) -> Result<PromptSpec, CensusError> {
    let census = tile_census(grid)?;
    Ok(PromptSpec {
        width: grid.width(),
        height: grid.height(),
        base_tile: census.base_tile,
        border_tile: census.border_tile,
        pattern_tiles: census.pattern_tiles,
        percent_pattern_tiles: census.percent_pattern,
    })
}

pub fn build_prompt(spec: &PromptSpec) -> String {
    let patterns = match spec.pattern_tiles[..] {
        [] => "There are 0 pattern tiles, ".to_string(),
        [p0] => format!("There is 1 pattern tile, \"{p0}\", "),
        [p0, p1, ..] => format!("There are 2 pattern tiles, \"{p0}\" and \"{p1}\", "),
    };
    format!(
        "The size of the level is {}x{}, the base tile is \"{}\", and the border tile is \"{}\". {patterns}\
         \"F\" is the water tile, \"J\" is the door tile, and the percentage of pattern tiles is {}%.{PROMPT_END}",
        spec.width,
        spec.height,
        spec.base_tile,
        spec.border_tile,
        spec.rendered_percent(),
    )
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl Cursor<'_> {
    fn rest(&self) -> &str {
        &self.text[self.pos..]
    }

    fn mismatch(&self, offset: usize, expected: impl Into<String>) -> PromptError {
        PromptError::TemplateMismatch {
            position: self.pos + offset,
            expected: expected.into(),
        }
    }

    fn literal(&mut self, lit: &str) -> Result<(), PromptError> {
        let same = self
            .rest()
            .bytes()
            .zip(lit.bytes())
            .take_while(|(a, b)| a == b)
            .count();
        if same < lit.len() {
            return Err(self.mismatch(same, format!("{lit:?}")));
        }
        self.pos += lit.len();
        Ok(())
    }

    fn number(&mut self) -> Result<u64, PromptError> {
        let digits = self.rest().bytes().take_while(u8::is_ascii_digit).count();
        let value = self.rest()[..digits]
            .parse()
            .map_err(|_| self.mismatch(0, "a number"))?;
        self.pos += digits;
        Ok(value)
    }

    fn quoted_tile(&mut self, accept: fn(Tile) -> bool, what: &str) -> Result<Tile, PromptError> {
        self.literal("\"")?;
        let tile = self
            .rest()
            .chars()
            .next()
            .and_then(Tile::from_char)
            .filter(|&t| accept(t))
            .ok_or_else(|| self.mismatch(0, what))?;
        self.pos += 1;
        self.literal("\"")?;
        Ok(tile)
    }
}

/// Recovers a [`PromptSpec`] from prompt text. The percentage comes back as
/// the rendered integer.
pub fn parse_prompt(text: &str) -> Result<PromptSpec, PromptError> {
    let mut cur = Cursor { text, pos: 0 };
    cur.literal("The size of the level is ")?;
    let width = cur.number()? as usize;
    cur.literal("x")?;
    let height = cur.number()? as usize;
    cur.literal(", the base tile is ")?;
    let base_tile = cur.quoted_tile(Tile::is_walkable, "a walkable tile")?;
    cur.literal(", and the border tile is ")?;
    let border_tile = cur.quoted_tile(Tile::is_wall, "a wall tile")?;
    cur.literal(". There ")?;

    let mut pattern_tiles = Vec::new();
    if cur.rest().starts_with("is") {
        cur.literal("is 1 pattern tile, ")?;
        pattern_tiles.push(cur.quoted_tile(Tile::is_walkable, "a walkable tile")?);
        cur.literal(", ")?;
    } else {
        cur.literal("are ")?;
        if cur.rest().starts_with('0') {
            cur.literal("0 pattern tiles, ")?;
        } else {
            cur.literal("2 pattern tiles, ")?;
            pattern_tiles.push(cur.quoted_tile(Tile::is_walkable, "a walkable tile")?);
            cur.literal(" and ")?;
            pattern_tiles.push(cur.quoted_tile(Tile::is_walkable, "a walkable tile")?);
            cur.literal(", ")?;
        }
    }

    cur.literal("\"F\" is the water tile, \"J\" is the door tile, and the percentage of pattern tiles is ")?;
    let percent = cur.number()?;
    cur.literal("%.")?;
    cur.literal(PROMPT_END)?;
    if !cur.rest().is_empty() {
        return Err(cur.mismatch(0, "end of prompt"));
    }
    Ok(PromptSpec {
        width,
        height,
        base_tile,
        border_tile,
        pattern_tiles,
        percent_pattern_tiles: percent as f64,
    })
}

/// One line of the fine-tune file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinetuneRecord {
    pub prompt: String,
    pub completion: String,
}

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("malformed JSON record: {0}")]
    MalformedJson(String),
    #[error("record is missing string field {0:?}")]
    MissingField(&'static str),
    #[error("prompt does not match the template: {0}")]
    Prompt(#[from] PromptError),
    #[error("completion is not a level: {0}")]
    CompletionUnparseable(String),
}

impl FinetuneRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("two string fields always serialize")
    }

    /// The level carried by the completion.
    pub fn level(&self) -> Result<Grid, RecordError> {
        completion_level(&self.completion)
    }
}

fn completion_level(completion: &str) -> Result<Grid, RecordError> {
    let body = completion
        .strip_prefix(' ')
        .and_then(|c| c.strip_suffix(TERMINATOR))
        .ok_or_else(|| RecordError::CompletionUnparseable(format!("expected \" <level>{TERMINATOR}\"")))?;
    parse_level(body).map_err(|e: LevelError| RecordError::CompletionUnparseable(e.to_string()))
}

pub fn make_record(grid: &Grid) -> Result<FinetuneRecord, CensusError> {
    let spec = derive_spec(grid)?;
    Ok(FinetuneRecord {
        prompt: build_prompt(&spec),
        completion: format!(" {}", serialize_level(grid, true)),
    })
}

pub fn parse_record(json_line: &str) -> Result<FinetuneRecord, RecordError> {
    let value: serde_json::Value =
        serde_json::from_str(json_line).map_err(|e| RecordError::MalformedJson(e.to_string()))?;
    let field = |name: &'static str| {
        value
            .get(name)
            .and_then(|v| v.as_str())
            .map(str::to_owned)
            .ok_or(RecordError::MissingField(name))
    };
    let record = FinetuneRecord {
        prompt: field("prompt")?,
        completion: field("completion")?,
    };
    parse_prompt(&record.prompt)?;
    completion_level(&record.completion)?;
    Ok(record)
}
