//! Discrete 5x5x3 workspace used by the supervisory-control scenario.
//!
//! x grows to the right, y grows forward (away from the operator), z grows up.
//! Obstacle cells block the gripper; objects rest at z = 0.

use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::world::Zone;

pub const GRID_X: i32 = 5;
pub const GRID_Y: i32 = 5;
pub const GRID_Z: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub x: i32,
    pub y: i32,
    pub z: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32, z: i32) -> Self {
        Self { x, y, z }
    }

    pub fn in_bounds(self) -> bool {
        (0..GRID_X).contains(&self.x) && (0..GRID_Y).contains(&self.y) && (0..GRID_Z).contains(&self.z)
    }

    pub fn same_column(self, other: Cell) -> bool {
        self.x == other.x && self.y == other.y
    }

    pub fn floor(self) -> Cell {
        Cell { z: 0, ..self }
    }

    pub fn step(self, dir: Direction) -> Cell {
        let (dx, dy, dz) = dir.delta();
        Cell::new(self.x + dx, self.y + dy, self.z + dz)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Left,
    Right,
    Up,
    Down,
    Forward,
    Backward,
}

impl Direction {
    pub const ALL: [Direction; 6] = [
        Direction::Up,
        Direction::Left,
        Direction::Right,
        Direction::Forward,
        Direction::Backward,
        Direction::Down,
    ];

    pub fn delta(self) -> (i32, i32, i32) {
        match self {
            Direction::Left => (-1, 0, 0),
            Direction::Right => (1, 0, 0),
            Direction::Forward => (0, 1, 0),
            Direction::Backward => (0, -1, 0),
            Direction::Up => (0, 0, 1),
            Direction::Down => (0, 0, -1),
        }
    }

    pub fn action_name(self) -> &'static str {
        match self {
            Direction::Left => "move_left",
            Direction::Right => "move_right",
            Direction::Up => "move_up",
            Direction::Down => "move_down",
            Direction::Forward => "move_forward",
            Direction::Backward => "move_backward",
        }
    }

    pub fn from_action(name: &str) -> Option<Self> {
        Direction::ALL.into_iter().find(|d| d.action_name() == name)
    }

    pub fn from_word(word: &str) -> Option<Self> {
        match word {
            "left" => Some(Direction::Left),
            "right" => Some(Direction::Right),
            "up" => Some(Direction::Up),
            "down" => Some(Direction::Down),
            "forward" | "forwards" | "ahead" => Some(Direction::Forward),
            "backward" | "backwards" | "back" => Some(Direction::Backward),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridState {
    pub gripper: Cell,
    pub home: Cell,
    pub obstacles: Vec<Cell>,
    pub object_cells: BTreeMap<String, Cell>,
    /// Column of the blue bowl.
    pub bowl_cell: Cell,
    /// Column of the white drop-off area.
    pub white_cell: Cell,
}

impl GridState {
    pub fn is_free(&self, cell: Cell) -> bool {
        cell.in_bounds() && !self.obstacles.contains(&cell)
    }

    /// Symbolic zone of a floor column.
    pub fn zone_for(&self, cell: Cell) -> Zone {
        if cell.same_column(self.bowl_cell) {
            Zone::Bowl
        } else if cell.same_column(self.white_cell) {
            Zone::TableRight
        } else {
            Zone::TableCenter
        }
    }

    /// Shortest obstacle-free move sequence between two cells (BFS, fixed
    /// neighbor order so the result is deterministic).
    pub fn path(&self, from: Cell, to: Cell) -> Option<Vec<Direction>> {
        if !self.is_free(from) || !self.is_free(to) {
            return None;
        }
        let mut parent: HashMap<Cell, (Cell, Direction)> = HashMap::new();
        let mut queue = VecDeque::from([from]);
        let mut seen = std::collections::HashSet::from([from]);
        while let Some(cell) = queue.pop_front() {
            if cell == to {
                let mut moves = Vec::new();
                let mut cursor = to;
                while cursor != from {
                    let (prev, dir) = parent[&cursor];
                    moves.push(dir);
                    cursor = prev;
                }
                moves.reverse();
                return Some(moves);
            }
            for dir in Direction::ALL {
                let next = cell.step(dir);
                if self.is_free(next) && seen.insert(next) {
                    parent.insert(next, (cell, dir));
                    queue.push_back(next);
                }
            }
        }
        None
    }
}
