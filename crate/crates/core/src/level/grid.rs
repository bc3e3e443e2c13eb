use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use super::Tile;

/// Level terminator appended after the final row of a completion.
pub const TERMINATOR: &str = ". XUT";

/// Smallest side length that admits a border ring around a 2x2 interior.
pub const MIN_SIDE: usize = 4;

/// `(row, col)` cell coordinate.
pub type Pos = (usize, usize);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LevelError {
    #[error("level text contains no rows")]
    Empty,
    #[error("ragged rows: row {row} has {found} cells, expected {expected}")]
    RaggedRows {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("illegal symbol {ch:?} at row {row}, col {col}")]
    IllegalSymbol { row: usize, col: usize, ch: char },
    #[error("level is {width}x{height}; both sides must be at least {MIN_SIDE}")]
    TooSmall { width: usize, height: usize },
}

/// A rectangular room of tiles, stored row-major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Grid {
    width: usize,
    height: usize,
    cells: Vec<Tile>,
}

impl Grid {
    pub fn new(width: usize, height: usize, cells: Vec<Tile>) -> Result<Grid, LevelError> {
        if width < MIN_SIDE || height < MIN_SIDE {
            return Err(LevelError::TooSmall { width, height });
        }
        assert_eq!(cells.len(), width * height, "cell count must equal width * height");
        Ok(Grid {
            width,
            height,
            cells,
        })
    }

    /// A room of `fill` surrounded by a one-cell ring of `border`.
    pub fn bordered(width: usize, height: usize, border: Tile, fill: Tile) -> Result<Grid, LevelError> {
        let cells = (0..height)
            .flat_map(|r| {
                (0..width).map(move |c| {
                    if r == 0 || c == 0 || r + 1 == height || c + 1 == width {
                        border
                    } else {
                        fill
                    }
                })
            })
            .collect();
        Grid::new(width, height, cells)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn area(&self) -> usize {
        self.width * self.height
    }

    pub fn cells(&self) -> &[Tile] {
        &self.cells
    }

    pub fn get(&self, (row, col): Pos) -> Tile {
        self.cells[row * self.width + col]
    }

    pub fn set(&mut self, (row, col): Pos, tile: Tile) {
        self.cells[row * self.width + col] = tile;
    }

    pub fn row(&self, row: usize) -> &[Tile] {
        &self.cells[row * self.width..(row + 1) * self.width]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Tile]> {
        self.cells.chunks(self.width)
    }

    pub fn positions(&self) -> impl Iterator<Item = Pos> + '_ {
        (0..self.height).flat_map(move |r| (0..self.width).map(move |c| (r, c)))
    }

    pub fn is_border(&self, (row, col): Pos) -> bool {
        row == 0 || col == 0 || row + 1 == self.height || col + 1 == self.width
    }

    pub fn is_corner(&self, (row, col): Pos) -> bool {
        (row == 0 || row + 1 == self.height) && (col == 0 || col + 1 == self.width)
    }

    pub fn interior_len(&self) -> usize {
        (self.width - 2) * (self.height - 2)
    }

    /// In-bounds neighbours in the 4-neighbourhood.
    pub fn neighbors4(&self, (row, col): Pos) -> impl Iterator<Item = Pos> {
        let (h, w) = (self.height as isize, self.width as isize);
        [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)]
            .into_iter()
            .map(move |(dr, dc)| (row as isize + dr, col as isize + dc))
            .filter(move |&(r, c)| r >= 0 && c >= 0 && r < h && c < w)
            .map(|(r, c)| (r as usize, c as usize))
    }

    /// In-bounds neighbours in the 8-neighbourhood.
    pub fn neighbors8(&self, (row, col): Pos) -> impl Iterator<Item = Pos> {
        let (h, w) = (self.height as isize, self.width as isize);
        (-1isize..=1)
            .flat_map(|dr| (-1isize..=1).map(move |dc| (dr, dc)))
            .filter(|&d| d != (0, 0))
            .map(move |(dr, dc)| (row as isize + dr, col as isize + dc))
            .filter(move |&(r, c)| r >= 0 && c >= 0 && r < h && c < w)
            .map(|(r, c)| (r as usize, c as usize))
    }

    pub fn count(&self, tile: Tile) -> usize {
        self.cells.iter().filter(|&&t| t == tile).count()
    }

    /// Same-position cells mapped through `f`.
    pub fn map_tiles(&self, f: impl Fn(Tile) -> Tile) -> Grid {
        Grid {
            width: self.width,
            height: self.height,
            cells: self.cells.iter().map(|&t| f(t)).collect(),
        }
    }
}

/// Parses level text: newline-separated rows of alphabet characters.
///
/// Surrounding whitespace and one trailing `". XUT"` are stripped first.
pub fn parse_level(text: &str) -> Result<Grid, LevelError> {
    let mut body = text.trim();
    if let Some(stripped) = body.strip_suffix(TERMINATOR) {
        body = stripped.trim_end();
    }
    if body.is_empty() {
        return Err(LevelError::Empty);
    }

    let mut width = 0;
    let mut height = 0;
    let mut cells = Vec::with_capacity(body.len());
    for (row, line) in body.split('\n').enumerate() {
        let before = cells.len();
        for (col, ch) in line.chars().enumerate() {
            let tile = Tile::from_char(ch).ok_or(LevelError::IllegalSymbol { row, col, ch })?;
            cells.push(tile);
        }
        let found = cells.len() - before;
        if row == 0 {
            width = found;
        } else if found != width {
            return Err(LevelError::RaggedRows {
                row,
                expected: width,
                found,
            });
        }
        height += 1;
    }
    Grid::new(width, height, cells)
}

/// Renders the canonical level text: every row followed by `\n`, optionally
/// followed by the terminator.
pub fn serialize_level(grid: &Grid, with_terminator: bool) -> String {
    let mut out = String::with_capacity(grid.area() + grid.height() + TERMINATOR.len());
    for row in grid.rows() {
        out.extend(row.iter().map(|t| t.as_char()));
        out.push('\n');
    }
    if with_terminator {
        out.push_str(TERMINATOR);
    }
    out
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_level(self, false))
    }
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Grid {}x{}", self.width, self.height)?;
        f.write_str(&serialize_level(self, false))
    }
}

impl FromStr for Grid {
    type Err = LevelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_level(s)
    }
}

impl Serialize for Grid {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&serialize_level(self, false))
    }
}

impl<'de> Deserialize<'de> for Grid {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_level(&text).map_err(serde::de::Error::custom)
    }
}
