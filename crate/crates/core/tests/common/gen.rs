//! Seeded random inputs for the integration suites.

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use roomforge::level::{Grid, Tile};
use roomforge::prompting::PromptSpec;

pub fn uniform_grid(rng: &mut ChaCha8Rng, width: usize, height: usize, alphabet: &[Tile]) -> Grid {
    let cells = (0..width * height).map(|_| *alphabet.choose(rng).unwrap()).collect();
    Grid::new(width, height, cells).unwrap()
}

/// A walled room with mostly walkable interior, some obstacles and junctions
/// sprinkled on the walls, so every constraint both passes and fails often.
pub fn roomlike_grid(rng: &mut ChaCha8Rng, width: usize, height: usize) -> Grid {
    let border = if rng.random_bool(0.8) { Tile::E } else { Tile::Hash };
    let base = *Tile::WALKABLE.choose(rng).unwrap();
    let mut g = Grid::bordered(width, height, border, base).unwrap();
    let obstacle_rate = rng.random_range(0.0..0.35);
    let pattern_rate = rng.random_range(0.0..0.4);
    let junction_rate = rng.random_range(0.0..0.3);
    for r in 0..height {
        for c in 0..width {
            let p = (r, c);
            if g.is_border(p) {
                if rng.random_bool(junction_rate) {
                    g.set(p, Tile::J);
                } else if rng.random_bool(junction_rate) {
                    g.set(p, *Tile::WALKABLE.choose(rng).unwrap());
                } else if rng.random_bool(0.05) {
                    g.set(p, Tile::F);
                }
            } else if rng.random_bool(obstacle_rate) {
                g.set(p, *[Tile::E, Tile::Hash, Tile::F].choose(rng).unwrap());
            } else if rng.random_bool(pattern_rate) {
                g.set(p, *Tile::WALKABLE.choose(rng).unwrap());
            } else if rng.random_bool(0.01) {
                g.set(p, Tile::J);
            }
        }
    }
    g
}

/// Random grid of random size with all seven tiles.
pub fn any_grid(rng: &mut ChaCha8Rng, max_side: usize) -> Grid {
    let (w, h) = (rng.random_range(4..=max_side), rng.random_range(4..=max_side));
    if rng.random_bool(0.5) {
        uniform_grid(rng, w, h, &Tile::ALL)
    } else {
        roomlike_grid(rng, w, h)
    }
}

/// Random prompt spec, percentage already at its rendered integer value.
pub fn any_spec(rng: &mut ChaCha8Rng) -> PromptSpec {
    let mut walkable = Tile::WALKABLE.to_vec();
    let base = walkable.remove(rng.random_range(0..3));
    let n_patterns = rng.random_range(0..=2);
    if rng.random_bool(0.5) {
        walkable.reverse();
    }
    walkable.truncate(n_patterns);
    PromptSpec {
        width: rng.random_range(4..=40),
        height: rng.random_range(4..=40),
        base_tile: base,
        border_tile: *Tile::WALLS.choose(rng).unwrap(),
        pattern_tiles: walkable,
        percent_pattern_tiles: rng.random_range(0..=100u32) as f64,
    }
}
