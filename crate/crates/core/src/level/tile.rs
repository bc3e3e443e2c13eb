use std::fmt;

use serde::{Deserialize, Serialize};

/// One room tile. The alphabet is fixed at seven symbols.
///
/// The derived ordering (`A < B < C < E < # < F < J`) is the tie-break order
/// used by the census.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tile {
    #[serde(rename = "A")]
    A,
    #[serde(rename = "B")]
    B,
    #[serde(rename = "C")]
    C,
    #[serde(rename = "E")]
    E,
    #[serde(rename = "#")]
    Hash,
    #[serde(rename = "F")]
    F,
    #[serde(rename = "J")]
    J,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TileClass {
    Walkable,
    Wall,
    Water,
    Junction,
}

impl Tile {
    pub const ALL: [Tile; 7] = [Tile::A, Tile::B, Tile::C, Tile::E, Tile::Hash, Tile::F, Tile::J];
    pub const WALKABLE: [Tile; 3] = [Tile::A, Tile::B, Tile::C];
    pub const WALLS: [Tile; 2] = [Tile::E, Tile::Hash];

    pub fn from_char(ch: char) -> Option<Tile> {
        Some(match ch {
            'A' => Tile::A,
            'B' => Tile::B,
            'C' => Tile::C,
            'E' => Tile::E,
            '#' => Tile::Hash,
            'F' => Tile::F,
            'J' => Tile::J,
            _ => return None,
        })
    }

    pub fn as_char(self) -> char {
        match self {
            Tile::A => 'A',
            Tile::B => 'B',
            Tile::C => 'C',
            Tile::E => 'E',
            Tile::Hash => '#',
            Tile::F => 'F',
            Tile::J => 'J',
        }
    }

    pub fn class(self) -> TileClass {
        match self {
            Tile::A | Tile::B | Tile::C => TileClass::Walkable,
            Tile::E | Tile::Hash => TileClass::Wall,
            Tile::F => TileClass::Water,
            Tile::J => TileClass::Junction,
        }
    }

    pub fn is_walkable(self) -> bool {
        self.class() == TileClass::Walkable
    }

    pub fn is_wall(self) -> bool {
        self.class() == TileClass::Wall
    }

    pub fn is_water(self) -> bool {
        self == Tile::F
    }

    /// Walls and water. Junctions are door markers and stay passable.
    pub fn is_unwalkable(self) -> bool {
        matches!(self.class(), TileClass::Wall | TileClass::Water)
    }

    pub fn is_traversable(self) -> bool {
        matches!(self.class(), TileClass::Walkable | TileClass::Junction)
    }

    pub(crate) fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Tile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn char_mapping_round_trips() {
        for t in Tile::ALL {
            assert_eq!(Tile::from_char(t.as_char()), Some(t));
        }
        assert_eq!(Tile::from_char('D'), None);
        assert_eq!(Tile::from_char('.'), None);
    }

    #[test]
    fn class_partition() {
        let walkable: Vec<_> = Tile::ALL.iter().filter(|t| t.is_walkable()).collect();
        assert_eq!(walkable, [&Tile::A, &Tile::B, &Tile::C]);
        assert!(Tile::E.is_unwalkable() && Tile::Hash.is_unwalkable() && Tile::F.is_unwalkable());
        assert!(!Tile::J.is_unwalkable());
        assert!(Tile::J.is_traversable());
        assert!(Tile::E < Tile::Hash);
    }
}
