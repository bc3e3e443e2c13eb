use thiserror::Error;

use super::{tile_census, Grid, Pos, Tile, TileCensus};
use crate::constraints::{find_doors, Wall};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransformError {
    #[error("cannot respace door {junctions:?} on the {wall:?} wall of the rotated room")]
    DoorRelocationFailed { wall: Wall, junctions: [Pos; 2] },
}

pub fn flip_horizontal(grid: &Grid) -> Grid {
    let (w, h) = (grid.width(), grid.height());
    let cells = (0..h).flat_map(|r| (0..w).map(move |c| (r, w - 1 - c))).map(|p| grid.get(p)).collect();
    Grid::new(w, h, cells).expect("dimensions preserved")
}

pub fn flip_vertical(grid: &Grid) -> Grid {
    let (w, h) = (grid.width(), grid.height());
    let cells = (0..h).flat_map(|r| (0..w).map(move |c| (h - 1 - r, c))).map(|p| grid.get(p)).collect();
    Grid::new(w, h, cells).expect("dimensions preserved")
}

/// Clockwise quarter turn without any door adjustment: `(r, c) -> (c, h-1-r)`.
pub fn rotate90_raw(grid: &Grid) -> Grid {
    let (w, h) = (grid.width(), grid.height());
    // output has h columns and w rows; output (r', c') reads input (h-1-c', r')
    let cells = (0..w).flat_map(|r| (0..h).map(move |c| (h - 1 - c, r))).map(|p| grid.get(p)).collect();
    Grid::new(h, w, cells).expect("sides swapped")
}

fn rotate_pos(grid: &Grid, (r, c): Pos) -> Pos {
    (c, grid.height() - 1 - r)
}

/// Clockwise quarter turn that keeps doors legal.
///
/// A door on a side wall becomes a door on a top/bottom wall and needs the
/// other junction spacing. The junction nearer the origin stays put and the
/// other moves to the new span, with the cells between set to the base tile
/// and the vacated cells set to the border tile. If that would run into a
/// corner, the far junction is held instead and the door grows back toward
/// the origin.
pub fn rotate90(grid: &Grid) -> Result<Grid, TransformError> {
    let doors = find_doors(grid).doors;
    let mut out = rotate90_raw(grid);
    if doors.is_empty() {
        return Ok(out);
    }

    let census: Option<TileCensus> = tile_census(grid).ok();
    let base = census.as_ref().map_or(Tile::A, |c| c.base_tile);
    let border = census.as_ref().map_or(Tile::E, |c| c.border_tile);

    for door in &doors {
        let [a, b] = door.junctions.map(|p| rotate_pos(grid, p));
        let wall = Wall::of(&out, a).expect("rotated door stays on a wall");
        let along = |p: Pos| match wall {
            Wall::Top | Wall::Bottom => p.1,
            Wall::Left | Wall::Right => p.0,
        };
        let (near, far) = if along(a) <= along(b) {
            (along(a), along(b))
        } else {
            (along(b), along(a))
        };
        let span = wall.orientation().span();
        let last = wall.len(&out) - 2;

        let (start, end) = if near + span <= last {
            (near, near + span)
        } else if far > span {
            (far - span, far)
        } else {
            return Err(TransformError::DoorRelocationFailed { wall, junctions: [a, b] });
        };

        let old: Vec<usize> = (near..=far).collect();
        let clash = (start..=end)
            .filter(|k| !old.contains(k))
            .any(|k| out.get(wall.cell(&out, k)) == Tile::J);
        if clash {
            return Err(TransformError::DoorRelocationFailed { wall, junctions: [a, b] });
        }

        for &k in &old {
            out.set(wall.cell(&out, k), border);
        }
        out.set(wall.cell(&out, start), Tile::J);
        out.set(wall.cell(&out, end), Tile::J);
        for k in start + 1..end {
            out.set(wall.cell(&out, k), base);
        }
    }
    Ok(out)
}

/// Exchanges the two pattern tiles. Rooms with fewer than two patterns are returned as is.
pub fn swap_patterns(grid: &Grid, census: &TileCensus) -> Grid {
    match census.pattern_tiles[..] {
        [p0, p1] => grid.map_tiles(|t| {
            if t == p0 {
                p1
            } else if t == p1 {
                p0
            } else {
                t
            }
        }),
        _ => grid.clone(),
    }
}
