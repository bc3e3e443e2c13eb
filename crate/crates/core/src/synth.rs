//! Seeded generator of handmade-style rooms, used to build fixtures and
//! starter datasets when no hand-authored rooms are at hand.

use std::collections::HashSet;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::constraints::{validate, HORIZONTAL_DOOR_SPAN, VERTICAL_DOOR_SPAN};
use crate::dataset::Transform;
use crate::level::{tile_census, Grid, Tile};

const SIDES: [usize; 5] = [8, 10, 12, 14, 16];

/// One random room; may fail validation.
pub fn random_room(rng: &mut ChaCha8Rng) -> Grid {
    let width = *SIDES.choose(rng).expect("nonempty");
    let height = *SIDES.choose(rng).expect("nonempty");
    let border = if rng.random_bool(0.8) { Tile::E } else { Tile::Hash };
    let mut walkable = Tile::WALKABLE.to_vec();
    let base = walkable.remove(rng.random_range(0..3));
    let mut g = Grid::bordered(width, height, border, base).expect("sides are at least 8");

    // Pattern tiles in small blobs, kept below the base count.
    let interior = g.interior_len();
    for &pattern in &walkable {
        let target = rng.random_range(interior / 20..interior / 5);
        let mut placed = 0;
        while placed < target {
            let (r, c) = (rng.random_range(1..height - 1), rng.random_range(1..width - 1));
            for (dr, dc) in [(0, 0), (0, 1), (1, 0)] {
                let (r, c) = (r + dr, c + dc);
                if r < height - 1 && c < width - 1 && g.get((r, c)) == base {
                    g.set((r, c), pattern);
                    placed += 1;
                }
            }
        }
    }

    // A few obstacles away from the walls.
    for _ in 0..rng.random_range(0..3) {
        let tile = if rng.random_bool(0.5) { Tile::F } else { border };
        let (r, c) = (rng.random_range(2..height - 3), rng.random_range(2..width - 3));
        g.set((r, c), tile);
        if rng.random_bool(0.5) {
            g.set((r, c + 1), tile);
        }
    }

    // Doors on distinct walls.
    let mut walls = vec![0u8, 1, 2, 3];
    for _ in 0..rng.random_range(0..3) {
        let wall = walls.remove(rng.random_range(0..walls.len()));
        let (along, span) = if wall < 2 {
            (width, HORIZONTAL_DOOR_SPAN)
        } else {
            (height, VERTICAL_DOOR_SPAN)
        };
        let start = rng.random_range(2..along - 2 - span);
        let at = |i: usize| match wall {
            0 => (0, i),
            1 => (height - 1, i),
            2 => (i, 0),
            _ => (i, width - 1),
        };
        g.set(at(start), Tile::J);
        g.set(at(start + span), Tile::J);
        for i in start + 1..start + span {
            g.set(at(i), base);
        }
    }
    g
}

/// Whether every canonical transform of `room` is valid, new, and distinct.
fn augments_cleanly(room: &Grid, seen: &mut HashSet<Grid>) -> bool {
    let mut variants = vec![room.clone()];
    for t in Transform::CANONICAL {
        match t.apply(room) {
            Ok(v) if validate(&v).passed() => variants.push(v),
            _ => return false,
        }
    }
    let fresh: HashSet<&Grid> = variants.iter().collect();
    if fresh.len() != variants.len() || variants.iter().any(|v| seen.contains(v)) {
        return false;
    }
    seen.extend(variants);
    true
}

/// `n` distinct playable rooms with two pattern tiles each, whose canonical
/// augmentations are all playable and pairwise distinct across the set.
/// Deterministic in `seed`.
pub fn two_pattern_rooms(n: usize, seed: u64) -> Vec<Grid> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut rooms = Vec::with_capacity(n);
    while rooms.len() < n {
        let room = random_room(&mut rng);
        let two_patterns = tile_census(&room).is_ok_and(|c| c.pattern_tiles.len() == 2);
        if two_patterns && validate(&room).passed() && augments_cleanly(&room, &mut seen) {
            rooms.push(room);
        }
    }
    rooms
}
