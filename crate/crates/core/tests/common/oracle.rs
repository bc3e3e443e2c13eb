//! A slow, direct re-derivation of the playability rules over a char matrix.
//! Shares no code with the library validator: doors come from brute-force
//! perfect matchings, components from union-find, and neighbourhoods are
//! enumerated explicitly.

use std::collections::{BTreeMap, BTreeSet};

pub type Cell = (usize, usize);

pub struct Room {
    pub rows: Vec<Vec<char>>,
}

fn walkable(ch: char) -> bool {
    matches!(ch, 'A' | 'B' | 'C')
}

fn wall(ch: char) -> bool {
    matches!(ch, 'E' | '#')
}

fn unwalkable(ch: char) -> bool {
    wall(ch) || ch == 'F'
}

fn traversable(ch: char) -> bool {
    walkable(ch) || ch == 'J'
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }
    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.0[root] != root {
            root = self.0[root];
        }
        let mut x = x;
        while self.0[x] != root {
            let next = self.0[x];
            self.0[x] = root;
            x = next;
        }
        root
    }
    fn union(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        self.0[a] = b;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleDoor {
    pub junctions: [Cell; 2],
    pub cells: Vec<Cell>,
}

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct OracleVerdict {
    /// Offending cells per constraint, indexed 0..7 for C1..C7.
    pub cells: [BTreeSet<Cell>; 7],
    pub doors: Vec<OracleDoor>,
}

impl OracleVerdict {
    pub fn passes(&self, constraint: usize) -> bool {
        self.cells[constraint].is_empty()
    }
    pub fn playable(&self) -> bool {
        self.cells.iter().all(BTreeSet::is_empty)
    }
}

impl Room {
    pub fn parse(text: &str) -> Room {
        Room {
            rows: text.lines().map(|l| l.chars().collect()).collect(),
        }
    }

    fn h(&self) -> usize {
        self.rows.len()
    }
    fn w(&self) -> usize {
        self.rows[0].len()
    }
    fn at(&self, (r, c): Cell) -> char {
        self.rows[r][c]
    }
    fn cells(&self) -> Vec<Cell> {
        (0..self.h()).flat_map(|r| (0..self.w()).map(move |c| (r, c))).collect()
    }
    fn on_border(&self, (r, c): Cell) -> bool {
        r == 0 || c == 0 || r == self.h() - 1 || c == self.w() - 1
    }
    fn is_corner(&self, (r, c): Cell) -> bool {
        (r == 0 || r == self.h() - 1) && (c == 0 || c == self.w() - 1)
    }

    /// Each wall as its non-corner cells in order, with the door span.
    fn walls(&self) -> Vec<(Vec<Cell>, usize)> {
        let (h, w) = (self.h(), self.w());
        vec![
            ((1..w - 1).map(|c| (0, c)).collect(), 3),
            ((1..w - 1).map(|c| (h - 1, c)).collect(), 3),
            ((1..h - 1).map(|r| (r, 0)).collect(), 2),
            ((1..h - 1).map(|r| (r, w - 1)).collect(), 2),
        ]
    }

    /// All perfect matchings of `nodes` using only `edges`.
    fn matchings(nodes: &[usize], edges: &BTreeSet<(usize, usize)>) -> Vec<Vec<(usize, usize)>> {
        let Some((&first, rest)) = nodes.split_first() else {
            return vec![Vec::new()];
        };
        let mut out = Vec::new();
        for (k, &other) in rest.iter().enumerate() {
            let pair = (first.min(other), first.max(other));
            if edges.contains(&pair) {
                let remaining: Vec<usize> = rest.iter().enumerate().filter(|&(i, _)| i != k).map(|(_, &n)| n).collect();
                for mut m in Room::matchings(&remaining, edges) {
                    m.push(pair);
                    out.push(m);
                }
            }
        }
        out
    }

    /// Doors and junctions that cannot belong to any door.
    ///
    /// Two junctions on the same wall can form a door when they sit exactly
    /// one span apart with only walkable tiles between. A group of junctions
    /// joined by such candidate pairs is accepted when it has exactly one
    /// perfect matching; otherwise every junction in the group is rejected.
    pub fn doors(&self) -> (Vec<OracleDoor>, BTreeSet<Cell>) {
        let mut bad: BTreeSet<Cell> = self
            .cells()
            .into_iter()
            .filter(|&p| self.at(p) == 'J' && (!self.on_border(p) || self.is_corner(p)))
            .collect();
        let mut doors = Vec::new();
        for (line, span) in self.walls() {
            let js: Vec<usize> = (0..line.len()).filter(|&i| self.at(line[i]) == 'J').collect();
            let mut edges = BTreeSet::new();
            for &a in &js {
                for &b in &js {
                    if b == a + span && (a + 1..b).all(|k| walkable(self.at(line[k]))) {
                        edges.insert((a, b));
                    }
                }
            }
            let mut uf = UnionFind::new(line.len());
            for &(a, b) in &edges {
                uf.union(a, b);
            }
            let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for &j in &js {
                groups.entry(uf.find(j)).or_default().push(j);
            }
            for group in groups.values() {
                let ms = Room::matchings(group, &edges);
                if ms.len() == 1 {
                    for &(a, b) in &ms[0] {
                        doors.push(OracleDoor {
                            junctions: [line[a], line[b]],
                            cells: (a..=b).map(|k| line[k]).collect(),
                        });
                    }
                } else {
                    bad.extend(group.iter().map(|&j| line[j]));
                }
            }
        }
        (doors, bad)
    }

    /// Traversable cells lying in some all-traversable 2x2 window.
    pub fn wide_region(&self) -> BTreeSet<Cell> {
        let (h, w) = (self.h(), self.w());
        self.cells()
            .into_iter()
            .filter(|&(r, c)| {
                traversable(self.at((r, c)))
                    && [(0, 0), (0, 1), (1, 0), (1, 1)].iter().any(|&(dr, dc)| {
                        // Window with its top-left at (r - dr, c - dc).
                        let (Some(r0), Some(c0)) = (r.checked_sub(dr), c.checked_sub(dc)) else {
                            return false;
                        };
                        r0 + 1 < h
                            && c0 + 1 < w
                            && [(r0, c0), (r0, c0 + 1), (r0 + 1, c0), (r0 + 1, c0 + 1)]
                                .iter()
                                .all(|&q| traversable(self.at(q)))
                    })
            })
            .collect()
    }

    /// Union-find over 4-adjacent cells satisfying `keep`.
    fn components(&self, keep: impl Fn(Cell) -> bool) -> UnionFind {
        let w = self.w();
        let mut uf = UnionFind::new(self.h() * w);
        for (r, c) in self.cells() {
            if !keep((r, c)) {
                continue;
            }
            if c + 1 < w && keep((r, c + 1)) {
                uf.union(r * w + c, r * w + c + 1);
            }
            if r + 1 < self.h() && keep((r + 1, c)) {
                uf.union(r * w + c, (r + 1) * w + c);
            }
        }
        uf
    }

    pub fn check(&self) -> OracleVerdict {
        let (h, w) = (self.h(), self.w());
        let mut v = OracleVerdict::default();
        let interior: Vec<Cell> = self.cells().into_iter().filter(|&p| !self.on_border(p)).collect();

        // C1
        let walk = interior.iter().filter(|&&p| walkable(self.at(p))).count();
        if walk * 2 <= interior.len() {
            v.cells[0] = interior.iter().copied().filter(|&p| !walkable(self.at(p))).collect();
        }

        // Region components and doors.
        let region = self.wide_region();
        let mut region_uf = self.components(|p| region.contains(&p));
        let (doors, bad_junctions) = self.doors();
        let door_components: Vec<BTreeSet<usize>> = doors
            .iter()
            .map(|d| {
                d.cells
                    .iter()
                    .filter(|p| region.contains(p))
                    .map(|&(r, c)| region_uf.find(r * w + c))
                    .collect()
            })
            .collect();

        // C2
        let touched: BTreeSet<usize> = door_components.iter().flatten().copied().collect();
        let path: BTreeSet<Cell> = region
            .iter()
            .copied()
            .filter(|&(r, c)| touched.contains(&region_uf.find(r * w + c)))
            .collect();
        let mut obstacle_uf = self.components(|p| unwalkable(self.at(p)));
        let border_obstacles: Vec<Cell> =
            self.cells().into_iter().filter(|&p| self.on_border(p) && unwalkable(self.at(p))).collect();
        for pair in border_obstacles.windows(2) {
            obstacle_uf.union(pair[0].0 * w + pair[0].1, pair[1].0 * w + pair[1].1);
        }
        let touches_path = |(r, c): Cell| {
            (r.saturating_sub(1)..=(r + 1).min(h - 1))
                .any(|rr| (c.saturating_sub(1)..=(c + 1).min(w - 1)).any(|cc| (rr, cc) != (r, c) && path.contains(&(rr, cc))))
        };
        let guarded: Vec<Cell> =
            interior.iter().copied().filter(|&p| unwalkable(self.at(p)) && touches_path(p)).collect();
        for &p in &guarded {
            for &q in &guarded {
                let chebyshev = p.0.abs_diff(q.0).max(p.1.abs_diff(q.1));
                if p != q && chebyshev < 2 && obstacle_uf.find(p.0 * w + p.1) != obstacle_uf.find(q.0 * w + q.1) {
                    v.cells[1].insert(p);
                }
            }
        }

        // C4
        for r in 0..h - 1 {
            for c in 0..w - 1 {
                let block = [(r, c), (r, c + 1), (r + 1, c), (r + 1, c + 1)];
                if block.iter().all(|&q| wall(self.at(q))) {
                    v.cells[3].extend(block);
                }
            }
        }

        // C5
        let count = |ch: char| self.cells().into_iter().filter(|&p| self.at(p) == ch).count();
        let counts = [('A', count('A')), ('B', count('B')), ('C', count('C'))];
        let top = counts.iter().map(|x| x.1).max().unwrap();
        let leaders: Vec<char> = counts.iter().filter(|x| x.1 == top).map(|x| x.0).collect();
        if top == 0 {
            v.cells[4] = interior.iter().copied().collect();
        } else if leaders.len() > 1 {
            v.cells[4] = self.cells().into_iter().filter(|&p| leaders.contains(&self.at(p))).collect();
        }

        // C6
        v.cells[5] = bad_junctions;
        if doors.len() >= 2 {
            let connected = (0..doors.len()).any(|i| {
                (i + 1..doors.len()).any(|j| !door_components[i].is_disjoint(&door_components[j]))
            });
            if !connected {
                v.cells[5].extend(doors.iter().flat_map(|d| d.junctions));
            }
        }

        // C7
        if w % 2 == 1 {
            v.cells[6].extend((0..h).map(|r| (r, w - 1)));
        }
        if h % 2 == 1 {
            v.cells[6].extend((0..w).map(|c| (h - 1, c)));
        }

        v.doors = doors;
        v
    }
}
