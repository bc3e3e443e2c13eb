use std::collections::{BTreeSet, VecDeque};

use crate::level::{Grid, Pos};

/// Row-major boolean cell mask over a grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellMask {
    width: usize,
    bits: Vec<bool>,
}

impl CellMask {
    pub fn empty(grid: &Grid) -> CellMask {
        CellMask {
            width: grid.width(),
            bits: vec![false; grid.area()],
        }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(Pos) -> bool) -> CellMask {
        CellMask {
            width: grid.width(),
            bits: grid.positions().map(f).collect(),
        }
    }

    pub fn contains(&self, (r, c): Pos) -> bool {
        self.bits[r * self.width + c]
    }

    pub fn insert(&mut self, (r, c): Pos) {
        self.bits[r * self.width + c] = true;
    }

    pub fn len(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn iter(&self) -> impl Iterator<Item = Pos> + '_ {
        let w = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i / w, i % w))
    }
}

/// Traversable cells covered by at least one fully traversable 2x2 block.
pub fn wide_walkable_mask(grid: &Grid) -> CellMask {
    let mut mask = CellMask::empty(grid);
    for r in 0..grid.height() - 1 {
        for c in 0..grid.width() - 1 {
            let block = [(r, c), (r, c + 1), (r + 1, c), (r + 1, c + 1)];
            if block.iter().all(|&p| grid.get(p).is_traversable()) {
                for p in block {
                    mask.insert(p);
                }
            }
        }
    }
    mask
}

/// The 2-wide path region: a 2x2 morphological opening of the traversable cells.
pub fn wide_walkable_region(grid: &Grid) -> BTreeSet<Pos> {
    wide_walkable_mask(grid).iter().collect()
}

/// 4-connected component labels for the cells of `mask`, in scan order.
pub(crate) fn label_components(grid: &Grid, mask: &CellMask) -> (Vec<Option<usize>>, usize) {
    let w = grid.width();
    let mut labels = vec![None; grid.area()];
    let mut next = 0;
    let mut queue = VecDeque::new();
    for start in mask.iter() {
        if labels[start.0 * w + start.1].is_some() {
            continue;
        }
        labels[start.0 * w + start.1] = Some(next);
        queue.push_back(start);
        while let Some(p) = queue.pop_front() {
            for q in grid.neighbors4(p) {
                if mask.contains(q) && labels[q.0 * w + q.1].is_none() {
                    labels[q.0 * w + q.1] = Some(next);
                    queue.push_back(q);
                }
            }
        }
        next += 1;
    }
    (labels, next)
}
