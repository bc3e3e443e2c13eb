use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::{fingerprint, read_records, BackendError, BackendKind, GenerationRequest, Generator, ModelRef};
use crate::level::{serialize_level, tile_census, Grid, Tile};
use crate::prompting::{parse_prompt, PromptSpec};

/// Tile roles relative to a room's own census, so rooms with different
/// palettes share statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Role {
    Base,
    Pattern0,
    Pattern1,
    Border,
    OtherWall,
    Water,
    Junction,
}

const ROLES: [Role; 7] = [
    Role::Base,
    Role::Pattern0,
    Role::Pattern1,
    Role::Border,
    Role::OtherWall,
    Role::Water,
    Role::Junction,
];

/// Role index, or 7 for "outside the room".
type Slot = u8;
const OUTSIDE: Slot = 7;

fn edge_kind(i: usize, len: usize) -> u8 {
    if i == 0 {
        0
    } else if i + 1 == len {
        2
    } else {
        1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Context {
    row_kind: u8,
    col_kind: u8,
    left: [Slot; 2],
    up: [Slot; 2],
}

impl Context {
    fn at(roles: &[Vec<Slot>], width: usize, height: usize, r: usize, c: usize) -> Context {
        let get = |r: Option<usize>, c: Option<usize>| match (r, c) {
            (Some(r), Some(c)) => roles[r][c],
            _ => OUTSIDE,
        };
        Context {
            row_kind: edge_kind(r, height),
            col_kind: edge_kind(c, width),
            left: [get(Some(r), c.checked_sub(2)), get(Some(r), c.checked_sub(1))],
            up: [get(r.checked_sub(2), Some(c)), get(r.checked_sub(1), Some(c))],
        }
    }

    /// Keys from most to least specific.
    fn backoff(self) -> [(u8, Context); 3] {
        let near = Context {
            left: [OUTSIDE, self.left[1]],
            up: [OUTSIDE, self.up[1]],
            ..self
        };
        let position = Context {
            left: [OUTSIDE; 2],
            up: [OUTSIDE; 2],
            ..self
        };
        [(0, self), (1, near), (2, position)]
    }
}

type Counts = [u64; 7];

/// Order-2 Markov chain over tile roles: each cell is drawn given the two
/// cells to its left, the two above, and whether it sits on an edge row or
/// column. Falls back to shorter contexts when a context was never seen.
#[derive(Debug, Default)]
struct TileChain {
    table: HashMap<(u8, Context), Counts>,
    overall: Counts,
}

fn roles_of(grid: &Grid) -> Option<Vec<Vec<Slot>>> {
    let census = tile_census(grid).ok()?;
    let role = |t: Tile| -> Role {
        if t == census.base_tile {
            Role::Base
        } else if census.pattern_tiles.first() == Some(&t) {
            Role::Pattern0
        } else if census.pattern_tiles.get(1) == Some(&t) {
            Role::Pattern1
        } else if t == census.border_tile {
            Role::Border
        } else if t.is_wall() {
            Role::OtherWall
        } else if t == Tile::F {
            Role::Water
        } else {
            Role::Junction
        }
    };
    Some(
        grid.rows()
            .map(|row| row.iter().map(|&t| role(t) as Slot).collect())
            .collect(),
    )
}

impl TileChain {
    fn train<'a>(grids: impl IntoIterator<Item = &'a Grid>) -> TileChain {
        let mut chain = TileChain::default();
        for grid in grids {
            let Some(roles) = roles_of(grid) else { continue };
            for r in 0..grid.height() {
                for c in 0..grid.width() {
                    let next = roles[r][c] as usize;
                    let ctx = Context::at(&roles, grid.width(), grid.height(), r, c);
                    for key in ctx.backoff() {
                        chain.table.entry(key).or_insert([0; 7])[next] += 1;
                    }
                    chain.overall[next] += 1;
                }
            }
        }
        chain
    }

    fn counts(&self, ctx: Context) -> &Counts {
        ctx.backoff()
            .iter()
            .find_map(|key| self.table.get(key))
            .unwrap_or(&self.overall)
    }

    /// Integer-only draw: each seen role weighs `4000 * count`, plus an even
    /// share of `temperature_milli * total` spread over the seen roles.
    fn draw(&self, ctx: Context, temperature_milli: u64, rng: &mut ChaCha8Rng) -> Role {
        let counts = self.counts(ctx);
        let total: u64 = counts.iter().sum();
        let seen = counts.iter().filter(|&&n| n > 0).count() as u64;
        if total == 0 {
            return Role::Base;
        }
        let smoothing = temperature_milli * total / seen;
        let weights: Vec<u64> = counts.iter().map(|&n| if n > 0 { 4000 * n + smoothing } else { 0 }).collect();
        let mut pick = rng.random_range(0..weights.iter().sum::<u64>());
        for (i, &w) in weights.iter().enumerate() {
            if pick < w {
                return ROLES[i];
            }
            pick -= w;
        }
        unreachable!("pick is below the weight total")
    }

    fn sample(&self, spec: &PromptSpec, temperature_milli: u64, rng: &mut ChaCha8Rng) -> Grid {
        let (w, h) = (spec.width, spec.height);
        let mut roles = vec![vec![OUTSIDE; w]; h];
        for r in 0..h {
            for c in 0..w {
                let ctx = Context::at(&roles, w, h, r, c);
                roles[r][c] = self.draw(ctx, temperature_milli, rng) as Slot;
            }
        }
        let patterns = &spec.pattern_tiles;
        let p0 = patterns.first().copied().unwrap_or(spec.base_tile);
        let p1 = patterns.get(1).copied().unwrap_or(p0);
        let other_wall = if spec.border_tile == Tile::E { Tile::Hash } else { Tile::E };
        let cells = roles
            .iter()
            .flatten()
            .map(|&slot| match ROLES[slot as usize] {
                Role::Base => spec.base_tile,
                Role::Pattern0 => p0,
                Role::Pattern1 => p1,
                Role::Border => spec.border_tile,
                Role::OtherWall => other_wall,
                Role::Water => Tile::F,
                Role::Junction => Tile::J,
            })
            .collect();
        Grid::new(w, h, cells).expect("prompt sizes are at least 4x4")
    }
}

/// Offline stand-in for a fine-tuned model.
///
/// Training builds a [`TileChain`] from the records' levels; generation parses
/// the templated prompt and samples a room of the requested size and palette.
/// Output is a pure function of the training file and the request.
#[derive(Debug, Default)]
pub struct MockBackend {
    models: Mutex<HashMap<String, Arc<TileChain>>>,
}

impl MockBackend {
    pub fn new() -> MockBackend {
        MockBackend::default()
    }
}

fn sample_seed(request: &GenerationRequest, index: usize) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(request.model.handle.as_bytes());
    h.update([0]);
    h.update(request.prompt.as_bytes());
    h.update([0]);
    h.update(request.seed.unwrap_or(0).to_le_bytes());
    h.update((index as u64).to_le_bytes());
    h.finalize().into()
}

fn load_chain(records_path: &Path) -> Result<(String, Arc<TileChain>), BackendError> {
    let bytes = std::fs::read(records_path)?;
    let grids = read_records(&bytes)?
        .iter()
        .enumerate()
        .map(|(i, r)| {
            r.level().map_err(|e| BackendError::RecordsInvalid {
                line: i + 1,
                reason: e.to_string(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((fingerprint(&bytes), Arc::new(TileChain::train(&grids))))
}

impl Generator for MockBackend {
    fn fine_tune(&self, base: Option<&ModelRef>, records_path: &Path, epochs: u32) -> Result<ModelRef, BackendError> {
        let (trained_on, chain) = load_chain(records_path)?;
        let handle = format!("mock-{}", &trained_on[..16]);
        self.models
            .lock()
            .expect("model table poisoned")
            .entry(handle.clone())
            .or_insert(chain);
        Ok(ModelRef {
            backend_kind: BackendKind::Mock,
            handle,
            trained_on,
            epochs,
            parent: base.map(|b| b.handle.clone()),
        })
    }

    fn restore(&self, model: &ModelRef, records_path: &Path) -> Result<(), BackendError> {
        if self.models.lock().expect("model table poisoned").contains_key(&model.handle) {
            return Ok(());
        }
        let (trained_on, chain) = load_chain(records_path)?;
        if trained_on != model.trained_on {
            return Err(BackendError::Config(format!(
                "{} holds records {trained_on}, model {} was trained on {}",
                records_path.display(),
                model.handle,
                model.trained_on
            )));
        }
        self.models
            .lock()
            .expect("model table poisoned")
            .insert(model.handle.clone(), chain);
        Ok(())
    }

    fn generate(&self, request: &GenerationRequest) -> Result<Vec<String>, BackendError> {
        if request.n == 0 {
            return Ok(Vec::new());
        }
        let chain = self
            .models
            .lock()
            .expect("model table poisoned")
            .get(&request.model.handle)
            .cloned()
            .ok_or_else(|| BackendError::UnknownModel(request.model.handle.clone()))?;
        let spec = parse_prompt(&request.prompt)?;
        let temperature_milli = (request.temperature.max(0.0) * 1000.0).round() as u64;
        Ok((0..request.n)
            .map(|i| {
                let mut rng = ChaCha8Rng::from_seed(sample_seed(request, i));
                let grid = chain.sample(&spec, temperature_milli, &mut rng);
                let text = format!(" {}", serialize_level(&grid, false));
                text.chars().take(request.max_tokens).collect()
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Dataset, Provenance};
    use crate::fixtures::PASSING_ROOM;
    use crate::level::parse_level;
    use crate::prompting::{build_prompt, derive_spec};

    fn write_records(dir: &Path, grids: &[Grid]) -> std::path::PathBuf {
        let mut d = Dataset::default();
        for g in grids {
            d.add_if_new(g.clone(), Provenance::Handmade, 0).unwrap();
        }
        let path = dir.join("finetune.jsonl");
        std::fs::write(&path, d.finetune_jsonl()).unwrap();
        path
    }

    #[test]
    fn training_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_records(dir.path(), &[parse_level(PASSING_ROOM).unwrap()]);
        let backend = MockBackend::new();
        let a = backend.fine_tune(None, &path, 5).unwrap();
        let b = MockBackend::new().fine_tune(None, &path, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.epochs, 5);
        let c = backend.fine_tune(Some(&a), &path, 2).unwrap();
        assert_eq!(c.parent.as_deref(), Some(a.handle.as_str()));
    }

    #[test]
    fn restore_rebuilds_a_model_in_a_fresh_instance() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_records(dir.path(), &[parse_level(PASSING_ROOM).unwrap()]);
        let first = MockBackend::new();
        let model = first.fine_tune(None, &path, 5).unwrap();
        let spec = derive_spec(&parse_level(PASSING_ROOM).unwrap()).unwrap();
        let req = GenerationRequest::new(model.clone(), build_prompt(&spec), 12, 10);
        let second = MockBackend::new();
        second.restore(&model, &path).unwrap();
        assert_eq!(second.generate(&req).unwrap(), first.generate(&req).unwrap());

        let other = write_records(dir.path(), &[Grid::bordered(8, 8, Tile::E, Tile::A).unwrap()]);
        assert!(matches!(MockBackend::new().restore(&model, &other), Err(BackendError::Config(_))));
    }

    #[test]
    fn malformed_records_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(&path, "{\"prompt\":1}\n").unwrap();
        assert!(matches!(
            MockBackend::new().fine_tune(None, &path, 5),
            Err(BackendError::RecordsInvalid { line: 1, .. })
        ));
    }

    #[test]
    fn open_rooms_generate_parseable_rooms_of_the_right_size() {
        let dir = tempfile::tempdir().unwrap();
        let mut rooms = Vec::new();
        for i in 0..6 {
            let mut g = Grid::bordered(8, 8, Tile::E, Tile::A).unwrap();
            g.set((1 + i, 1 + i % 3), Tile::B);
            rooms.push(g);
        }
        let path = write_records(dir.path(), &rooms);
        let backend = MockBackend::new();
        let model = backend.fine_tune(None, &path, 5).unwrap();
        let spec = derive_spec(&rooms[0]).unwrap();
        let mut req = GenerationRequest::new(model, build_prompt(&spec), 8, 8);
        req.n = 20;
        let out = backend.generate(&req).unwrap();
        assert_eq!(out.len(), 20);
        for text in &out {
            assert!(text.starts_with(' '));
            let g = parse_level(text).unwrap();
            assert_eq!((g.width(), g.height()), (8, 8));
        }
        assert_eq!(backend.generate(&req).unwrap(), out);
        req.seed = Some(1);
        assert_ne!(backend.generate(&req).unwrap(), out);
        req.n = 0;
        assert!(backend.generate(&req).unwrap().is_empty());
    }

    #[test]
    fn untemplated_prompt_and_unknown_model() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_records(dir.path(), &[parse_level(PASSING_ROOM).unwrap()]);
        let backend = MockBackend::new();
        let model = backend.fine_tune(None, &path, 5).unwrap();
        let req = GenerationRequest::new(model.clone(), "make me a room->".into(), 8, 8);
        assert!(matches!(backend.generate(&req), Err(BackendError::MockSpecUnparseable(_))));
        let other = MockBackend::new();
        let spec = derive_spec(&parse_level(PASSING_ROOM).unwrap()).unwrap();
        let req = GenerationRequest::new(model, build_prompt(&spec), 12, 10);
        assert!(matches!(other.generate(&req), Err(BackendError::UnknownModel(_))));
    }

    #[test]
    fn palette_follows_the_prompt() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_records(dir.path(), &[parse_level(PASSING_ROOM).unwrap()]);
        let backend = MockBackend::new();
        let model = backend.fine_tune(None, &path, 5).unwrap();
        let spec = PromptSpec {
            width: 12,
            height: 10,
            base_tile: Tile::C,
            border_tile: Tile::Hash,
            pattern_tiles: vec![Tile::A],
            percent_pattern_tiles: 2.0,
        };
        let mut req = GenerationRequest::new(model, build_prompt(&spec), 12, 10);
        req.n = 5;
        for text in backend.generate(&req).unwrap() {
            let g = parse_level(&text).unwrap();
            assert!(g.count(Tile::C) > g.count(Tile::A));
            assert_eq!(g.count(Tile::B), 0);
            assert_eq!(g.get((9, 0)), Tile::Hash);
        }
    }

    #[test]
    fn short_token_budget_truncates() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_records(dir.path(), &[parse_level(PASSING_ROOM).unwrap()]);
        let backend = MockBackend::new();
        let model = backend.fine_tune(None, &path, 5).unwrap();
        let spec = derive_spec(&parse_level(PASSING_ROOM).unwrap()).unwrap();
        let mut req = GenerationRequest::new(model, build_prompt(&spec), 12, 10);
        req.max_tokens = 30;
        let out = backend.generate(&req).unwrap();
        assert_eq!(out[0].chars().count(), 30);
        assert!(parse_level(&out[0]).is_err());
    }
}
