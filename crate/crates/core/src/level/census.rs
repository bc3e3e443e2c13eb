use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Grid, Tile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum CensusError {
    #[error("room has no walkable tiles")]
    NoWalkableTiles,
    #[error("room has no wall tile on its border")]
    NoBorderWall,
}

/// Tile counts and the prompt-facing roles derived from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileCensus {
    pub counts: BTreeMap<Tile, usize>,
    pub base_tile: Tile,
    pub pattern_tiles: Vec<Tile>,
    pub border_tile: Tile,
    /// Pattern cells as a percentage of every cell, border included.
    pub percent_pattern: f64,
}

impl TileCensus {
    pub fn count(&self, tile: Tile) -> usize {
        self.counts.get(&tile).copied().unwrap_or(0)
    }
}

fn tally(tiles: impl Iterator<Item = Tile>) -> [usize; 7] {
    let mut counts = [0usize; 7];
    for t in tiles {
        counts[t.index()] += 1;
    }
    counts
}

/// Candidates present in `counts`, most frequent first, alphabetical on ties.
fn ranked(candidates: &[Tile], counts: &[usize; 7]) -> Vec<Tile> {
    let mut present: Vec<Tile> = candidates.iter().copied().filter(|t| counts[t.index()] > 0).collect();
    present.sort_by(|a, b| counts[b.index()].cmp(&counts[a.index()]).then(a.cmp(b)));
    present
}

pub fn tile_census(grid: &Grid) -> Result<TileCensus, CensusError> {
    let counts = tally(grid.cells().iter().copied());
    let mut walkable = ranked(&Tile::WALKABLE, &counts);
    if walkable.is_empty() {
        return Err(CensusError::NoWalkableTiles);
    }
    let base_tile = walkable.remove(0);

    let border_counts = tally(grid.positions().filter(|&p| grid.is_border(p)).map(|p| grid.get(p)));
    let border_tile = *ranked(&Tile::WALLS, &border_counts)
        .first()
        .ok_or(CensusError::NoBorderWall)?;

    let pattern_cells: usize = walkable.iter().map(|t| counts[t.index()]).sum();
    Ok(TileCensus {
        counts: Tile::ALL
            .iter()
            .filter(|t| counts[t.index()] > 0)
            .map(|&t| (t, counts[t.index()]))
            .collect(),
        base_tile,
        pattern_tiles: walkable,
        border_tile,
        percent_pattern: 100.0 * pattern_cells as f64 / grid.area() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::level::parse_level;

    /// 8 wide, 12 high, all-E border: A=30, B=20, C=10 in the 60 interior cells.
    pub(crate) fn census_fixture() -> Grid {
        let mut g = Grid::bordered(8, 12, Tile::E, Tile::A).unwrap();
        let interior: Vec<_> = g.positions().filter(|&p| !g.is_border(p)).collect();
        for (i, &p) in interior.iter().enumerate() {
            let t = match i {
                0..=19 => Tile::B,
                20..=29 => Tile::C,
                _ => Tile::A,
            };
            g.set(p, t);
        }
        g
    }

    #[test]
    fn counts_roles_and_percentage() {
        let c = tile_census(&census_fixture()).unwrap();
        assert_eq!(c.count(Tile::A), 30);
        assert_eq!(c.count(Tile::B), 20);
        assert_eq!(c.count(Tile::C), 10);
        assert_eq!(c.count(Tile::E), 36);
        assert_eq!(c.counts.values().sum::<usize>(), 96);
        assert_eq!(c.base_tile, Tile::A);
        assert_eq!(c.pattern_tiles, vec![Tile::B, Tile::C]);
        assert_eq!(c.border_tile, Tile::E);
        assert_eq!(c.percent_pattern, 31.25);
    }

    #[test]
    fn single_walkable_symbol_has_no_patterns() {
        let c = tile_census(&Grid::bordered(6, 6, Tile::Hash, Tile::A).unwrap()).unwrap();
        assert_eq!(c.base_tile, Tile::A);
        assert!(c.pattern_tiles.is_empty());
        assert_eq!(c.percent_pattern, 0.0);
        assert_eq!(c.border_tile, Tile::Hash);
    }

    #[test]
    fn ties_break_alphabetically() {
        // 7x7 interior = 25 cells, border E=16 and #=8 split
        let mut g = Grid::bordered(7, 7, Tile::E, Tile::A).unwrap();
        let interior: Vec<_> = g.positions().filter(|&p| !g.is_border(p)).collect();
        for &p in &interior[..12] {
            g.set(p, Tile::B);
        }
        for &p in &interior[12..24] {
            g.set(p, Tile::C);
        }
        // A=1, B=12, C=12 -> B wins the tie over C
        let c = tile_census(&g).unwrap();
        assert_eq!(c.base_tile, Tile::B);
        assert_eq!(c.pattern_tiles, vec![Tile::C, Tile::A]);

        // A=B=2 inside, E=#=6 on the border
        let g = parse_level("EE##\n#AB#\nEBAE\nEE##").unwrap();
        let c = tile_census(&g).unwrap();
        assert_eq!(c.base_tile, Tile::A);
        assert_eq!(c.border_tile, Tile::E);
    }

    #[test]
    fn errors() {
        assert_eq!(
            tile_census(&Grid::bordered(4, 4, Tile::E, Tile::F).unwrap()),
            Err(CensusError::NoWalkableTiles)
        );
        assert_eq!(
            tile_census(&Grid::bordered(4, 4, Tile::J, Tile::A).unwrap()),
            Err(CensusError::NoBorderWall)
        );
    }
}
