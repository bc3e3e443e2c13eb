//! Playability validation for rooms.
//!
//! Seven constraints, `C1`..`C7`:
//!
//! * `C1` walkable tiles are a strict majority of the interior.
//! * `C2` obstacles bordering the door-connected 2-wide path keep their
//!   distance from other obstacle clusters.
//! * `C3` water may cluster (a permission; it never fails on its own).
//! * `C4` walls are one tile thick: no 2x2 block of wall tiles.
//! * `C5` one walkable tile strictly dominates the others.
//! * `C6` junction tiles form legal doors, and with two or more doors at
//!   least one pair is connected through the 2-wide path.
//! * `C7` both sides are even.

mod doors;
mod region;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::level::{Grid, Pos, Tile};

pub use doors::{find_doors, Door, DoorScan, Orientation, Wall, HORIZONTAL_DOOR_SPAN, VERTICAL_DOOR_SPAN};
pub(crate) use region::label_components;
pub use region::{wide_walkable_mask, wide_walkable_region, CellMask};

/// Minimum Chebyshev distance between distinct obstacle clusters along the path.
pub const MIN_OBSTACLE_SEPARATION: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ConstraintId {
    C1,
    C2,
    C3,
    C4,
    C5,
    C6,
    C7,
}

impl ConstraintId {
    pub const ALL: [ConstraintId; 7] = [
        ConstraintId::C1,
        ConstraintId::C2,
        ConstraintId::C3,
        ConstraintId::C4,
        ConstraintId::C5,
        ConstraintId::C6,
        ConstraintId::C7,
    ];
}

impl fmt::Display for ConstraintId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintResult {
    pub id: ConstraintId,
    pub pass: bool,
    pub cells: Vec<Pos>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlayabilityReport {
    pub verdict: Verdict,
    pub constraints: Vec<ConstraintResult>,
    pub doors: Vec<Door>,
    /// Offending cells summed over failed constraints. Zero iff the room passes.
    pub repairability: usize,
    /// Every door pair is connected. Reported only; `C6` needs a single pair.
    pub all_doors_connected: bool,
}

impl PlayabilityReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn constraint(&self, id: ConstraintId) -> &ConstraintResult {
        &self.constraints[id as usize]
    }

    pub fn failed(&self) -> impl Iterator<Item = ConstraintId> + '_ {
        self.constraints.iter().filter(|c| !c.pass).map(|c| c.id)
    }

    pub fn failed_count(&self) -> usize {
        self.failed().count()
    }
}

fn result(id: ConstraintId, mut cells: Vec<Pos>, ok: &str, fail: String) -> ConstraintResult {
    cells.sort_unstable();
    cells.dedup();
    let pass = cells.is_empty();
    ConstraintResult {
        id,
        pass,
        cells,
        message: if pass { ok.to_string() } else { fail },
    }
}

fn interior(grid: &Grid) -> impl Iterator<Item = Pos> + '_ {
    grid.positions().filter(move |&p| !grid.is_border(p))
}

fn check_pattern_majority(grid: &Grid) -> ConstraintResult {
    let walkable = interior(grid).filter(|&p| grid.get(p).is_walkable()).count();
    let total = grid.interior_len();
    let cells = if 2 * walkable > total {
        Vec::new()
    } else {
        interior(grid).filter(|&p| !grid.get(p).is_walkable()).collect()
    };
    result(
        ConstraintId::C1,
        cells,
        "walkable tiles make up most of the interior",
        format!("only {walkable} of {total} interior cells are walkable"),
    )
}

/// Unwalkable 4-connected clusters; every cluster touching the border ring is one cluster.
fn obstacle_clusters(grid: &Grid) -> Vec<Option<usize>> {
    let mask = CellMask::from_fn(grid, |p| grid.get(p).is_unwalkable());
    let (mut labels, n) = label_components(grid, &mask);
    let mut on_border = vec![false; n];
    for p in grid.positions().filter(|&p| grid.is_border(p)) {
        if let Some(l) = labels[p.0 * grid.width() + p.1] {
            on_border[l] = true;
        }
    }
    for l in labels.iter_mut().flatten() {
        if on_border[*l] {
            *l = usize::MAX;
        }
    }
    labels
}

/// Wide-region cells whose component contains a cell of some door.
fn door_connected_path(grid: &Grid, region: &CellMask, labels: &[Option<usize>], doors: &[Door]) -> CellMask {
    let w = grid.width();
    let touched: Vec<usize> = doors
        .iter()
        .flat_map(|d| d.cells())
        .filter_map(|p| labels[p.0 * w + p.1])
        .collect();
    CellMask::from_fn(grid, |p| {
        region.contains(p) && labels[p.0 * w + p.1].is_some_and(|l| touched.contains(&l))
    })
}

fn check_obstacle_separation(grid: &Grid, path: &CellMask) -> ConstraintResult {
    let w = grid.width();
    let clusters = obstacle_clusters(grid);
    let near_path = |p: Pos| {
        !grid.is_border(p) && grid.get(p).is_unwalkable() && grid.neighbors8(p).any(|q| path.contains(q))
    };
    let reach = MIN_OBSTACLE_SEPARATION as isize - 1;
    let mut cells = Vec::new();
    for p in grid.positions().filter(|&p| near_path(p)) {
        for dr in -reach..=reach {
            for dc in -reach..=reach {
                let (r, c) = (p.0 as isize + dr, p.1 as isize + dc);
                if r < 0 || c < 0 || r >= grid.height() as isize || c >= w as isize {
                    continue;
                }
                let q = (r as usize, c as usize);
                if q != p && near_path(q) && clusters[p.0 * w + p.1] != clusters[q.0 * w + q.1] {
                    cells.push(p);
                }
            }
        }
    }
    let n = cells.len();
    result(
        ConstraintId::C2,
        cells,
        "obstacles along the path are separated",
        format!("{n} obstacle cells crowd another cluster next to the path"),
    )
}

fn check_thin_walls(grid: &Grid) -> ConstraintResult {
    let mut cells = Vec::new();
    for r in 0..grid.height() - 1 {
        for c in 0..grid.width() - 1 {
            let block = [(r, c), (r, c + 1), (r + 1, c), (r + 1, c + 1)];
            if block.iter().all(|&p| grid.get(p).is_wall()) {
                cells.extend(block);
            }
        }
    }
    result(
        ConstraintId::C4,
        cells,
        "walls are a single tile thick",
        "walls form 2x2 blocks".to_string(),
    )
}

fn check_tile_roles(grid: &Grid) -> ConstraintResult {
    let counts: Vec<(Tile, usize)> = Tile::WALKABLE.iter().map(|&t| (t, grid.count(t))).collect();
    let max = counts.iter().map(|&(_, n)| n).max().unwrap_or(0);
    let tied: Vec<Tile> = counts.iter().filter(|&&(_, n)| n == max).map(|&(t, _)| t).collect();
    let (cells, message) = if max == 0 {
        (interior(grid).collect(), "no walkable tiles to pick a base from".to_string())
    } else if tied.len() > 1 {
        let names: String = tied.iter().map(|t| t.as_char()).collect();
        (
            grid.positions().filter(|&p| tied.contains(&grid.get(p))).collect(),
            format!("no single base tile: {names} tie at {max}"),
        )
    } else {
        (Vec::new(), String::new())
    };
    result(ConstraintId::C5, cells, "one base tile with supporting patterns", message)
}

fn check_doors(grid: &Grid, scan: &DoorScan, labels: &[Option<usize>]) -> (ConstraintResult, bool) {
    let w = grid.width();
    let components: Vec<Vec<usize>> = scan
        .doors
        .iter()
        .map(|d| d.cells().filter_map(|p| labels[p.0 * w + p.1]).collect())
        .collect();
    let linked = |i: usize, j: usize| components[i].iter().any(|l| components[j].contains(l));
    let n = scan.doors.len();
    let pairs = || (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j)));
    let any_linked = pairs().any(|(i, j)| linked(i, j));
    let all_linked = pairs().all(|(i, j)| linked(i, j));

    let mut cells = scan.offending.clone();
    let mut message = format!("{} junction tiles do not form legal doors", scan.offending.len());
    if n >= 2 && !any_linked {
        cells.extend(scan.doors.iter().flat_map(|d| d.junctions));
        message = if scan.offending.is_empty() {
            format!("none of the {n} doors connect through a 2-wide path")
        } else {
            format!("{message}; none of the {n} doors connect")
        };
    }
    (result(ConstraintId::C6, cells, "doors are legal and connected", message), all_linked)
}

fn check_parity(grid: &Grid) -> ConstraintResult {
    let mut cells = Vec::new();
    if !grid.width().is_multiple_of(2) {
        cells.extend((0..grid.height()).map(|r| (r, grid.width() - 1)));
    }
    if !grid.height().is_multiple_of(2) {
        cells.extend((0..grid.width()).map(|c| (grid.height() - 1, c)));
    }
    result(
        ConstraintId::C7,
        cells,
        "both sides are even",
        format!("{}x{} has an odd side", grid.width(), grid.height()),
    )
}

/// Checks a room against all seven constraints.
pub fn validate(grid: &Grid) -> PlayabilityReport {
    let scan = find_doors(grid);
    let region = wide_walkable_mask(grid);
    let (labels, _) = label_components(grid, &region);
    let path = door_connected_path(grid, &region, &labels, &scan.doors);
    let (c6, all_doors_connected) = check_doors(grid, &scan, &labels);

    let constraints = vec![
        check_pattern_majority(grid),
        check_obstacle_separation(grid, &path),
        result(ConstraintId::C3, Vec::new(), "water may cluster", String::new()),
        check_thin_walls(grid),
        check_tile_roles(grid),
        c6,
        check_parity(grid),
    ];
    let repairability = constraints.iter().filter(|c| !c.pass).map(|c| c.cells.len()).sum();
    PlayabilityReport {
        verdict: if constraints.iter().all(|c| c.pass) {
            Verdict::Pass
        } else {
            Verdict::Fail
        },
        constraints,
        doors: scan.doors,
        repairability,
        all_doors_connected,
    }
}

/// Indices of the `k` failing reports that look cheapest to fix by hand.
///
/// Ordered by repairability, then by number of failed constraints, then by
/// input order. Passing reports are skipped.
pub fn rank_repairable<'a>(reports: impl IntoIterator<Item = &'a PlayabilityReport>, k: usize) -> Vec<usize> {
    let mut failing: Vec<(usize, &PlayabilityReport)> =
        reports.into_iter().enumerate().filter(|(_, r)| !r.passed()).collect();
    failing.sort_by_key(|&(i, r)| (r.repairability, r.failed_count(), i));
    failing.into_iter().take(k).map(|(i, _)| i).collect()
}

/// The `k` failing rooms that look cheapest to fix, see [`rank_repairable`].
pub fn repairability_rank(reports: &[(Grid, PlayabilityReport)], k: usize) -> Vec<&Grid> {
    rank_repairable(reports.iter().map(|(_, r)| r), k)
        .into_iter()
        .map(|i| &reports[i].0)
        .collect()
}
