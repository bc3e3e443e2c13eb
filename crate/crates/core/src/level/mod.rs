//! Tile alphabet, the [`Grid`] room type, its text format, and the
//! structural transforms used for augmentation.

mod census;
pub(crate) mod grid;
mod tile;
mod transform;

pub use census::{tile_census, CensusError, TileCensus};
pub use grid::{parse_level, serialize_level, Grid, LevelError, Pos, MIN_SIDE, TERMINATOR};
pub use tile::{Tile, TileClass};
pub use transform::{flip_horizontal, flip_vertical, rotate90, rotate90_raw, swap_patterns, TransformError};
