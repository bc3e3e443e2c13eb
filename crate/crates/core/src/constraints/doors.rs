use serde::{Deserialize, Serialize};

use crate::level::{Grid, Pos, Tile};

/// Junction separation on left/right walls: one gap cell between the pair.
pub const VERTICAL_DOOR_SPAN: usize = 2;
/// Junction separation on top/bottom walls: two gap cells between the pair.
pub const HORIZONTAL_DOOR_SPAN: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Wall {
    Top,
    Bottom,
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Vertical,
    Horizontal,
}

impl Orientation {
    pub fn span(self) -> usize {
        match self {
            Orientation::Vertical => VERTICAL_DOOR_SPAN,
            Orientation::Horizontal => HORIZONTAL_DOOR_SPAN,
        }
    }
}

impl Wall {
    pub const ALL: [Wall; 4] = [Wall::Top, Wall::Bottom, Wall::Left, Wall::Right];

    pub fn orientation(self) -> Orientation {
        match self {
            Wall::Left | Wall::Right => Orientation::Vertical,
            Wall::Top | Wall::Bottom => Orientation::Horizontal,
        }
    }

    /// Number of cells along this wall, corners included.
    pub fn len(self, grid: &Grid) -> usize {
        match self.orientation() {
            Orientation::Vertical => grid.height(),
            Orientation::Horizontal => grid.width(),
        }
    }

    /// Cell at offset `along` on this wall.
    pub fn cell(self, grid: &Grid, along: usize) -> Pos {
        match self {
            Wall::Top => (0, along),
            Wall::Bottom => (grid.height() - 1, along),
            Wall::Left => (along, 0),
            Wall::Right => (along, grid.width() - 1),
        }
    }

    /// The wall a non-corner border cell sits on.
    pub fn of(grid: &Grid, (row, col): Pos) -> Option<Wall> {
        if grid.is_corner((row, col)) {
            return None;
        }
        if row == 0 {
            Some(Wall::Top)
        } else if row + 1 == grid.height() {
            Some(Wall::Bottom)
        } else if col == 0 {
            Some(Wall::Left)
        } else if col + 1 == grid.width() {
            Some(Wall::Right)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Door {
    pub wall: Wall,
    pub junctions: [Pos; 2],
    pub gap_cells: Vec<Pos>,
    pub orientation: Orientation,
}

impl Door {
    /// Junctions and gap cells.
    pub fn cells(&self) -> impl Iterator<Item = Pos> + '_ {
        self.junctions.iter().copied().chain(self.gap_cells.iter().copied())
    }
}

/// Result of pairing the junction tiles of a room.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DoorScan {
    pub doors: Vec<Door>,
    /// Junction tiles that could not be part of a legal door.
    pub offending: Vec<Pos>,
}

/// Pairs every junction tile into doors.
///
/// Along each wall, two consecutive junctions are linked when they sit exactly
/// the wall's span apart with only walkable tiles between. A maximal run of
/// linked junctions pairs up front to back when its length is even; a run of
/// odd length has no consistent pairing and all of its junctions are offending,
/// as are interior and corner junctions. The rule reads the same from either
/// end of a wall, so mirrored rooms get mirrored doors.
pub fn find_doors(grid: &Grid) -> DoorScan {
    let mut scan = DoorScan::default();

    for p in grid.positions() {
        if grid.get(p) == Tile::J && (!grid.is_border(p) || grid.is_corner(p)) {
            scan.offending.push(p);
        }
    }

    for wall in Wall::ALL {
        let span = wall.orientation().span();
        let along: Vec<usize> = (1..wall.len(grid) - 1)
            .filter(|&i| grid.get(wall.cell(grid, i)) == Tile::J)
            .collect();
        let linked = |i: usize| {
            let (start, end) = (along[i], along[i + 1]);
            end - start == span && (start + 1..end).all(|k| grid.get(wall.cell(grid, k)).is_walkable())
        };

        let mut run_start = 0;
        for i in 0..along.len() {
            if i + 1 < along.len() && linked(i) {
                continue;
            }
            let run = &along[run_start..=i];
            if run.len().is_multiple_of(2) {
                for pair in run.chunks(2) {
                    let (start, end) = (pair[0], pair[1]);
                    scan.doors.push(Door {
                        wall,
                        junctions: [wall.cell(grid, start), wall.cell(grid, end)],
                        gap_cells: (start + 1..end).map(|k| wall.cell(grid, k)).collect(),
                        orientation: wall.orientation(),
                    });
                }
            } else {
                scan.offending.extend(run.iter().map(|&k| wall.cell(grid, k)));
            }
            run_start = i + 1;
        }
    }

    scan.offending.sort_unstable();
    scan
}
