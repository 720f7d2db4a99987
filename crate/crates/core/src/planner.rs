//! Rotation-penalized shortest paths and action derivation.
//!
//! The search is uniform-cost over `(cell, heading)` states. A step that
//! keeps the current heading costs 1 and a step that changes it costs 2.
//! Routes are ordered by `(moves, cost)`: the path is always a shortest one in
//! cells, and among those the turn-weighted cost is minimal. A backward search
//! from the goal gives the optimal remaining key of every state; the path is
//! then read off forwards, keeping the heading whenever that stays optimal.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::Action;
use crate::scene::{Cell, GridMap, Pose, Rotation};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedPath {
    /// Start cell first, goal cell last, consecutive cells 4-adjacent.
    pub cells: Vec<Cell>,
    pub start_rotation: Rotation,
    /// Turn-weighted cost: 1 per straight step, 2 per turning step.
    pub cost: u32,
}

impl PlannedPath {
    pub fn moves(&self) -> usize {
        self.cells.len().saturating_sub(1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSequence {
    /// Terminated by exactly one `Done`.
    pub actions: Vec<Action>,
    pub final_rotation: Rotation,
}

impl ActionSequence {
    pub fn move_count(&self) -> usize {
        self.actions
            .iter()
            .filter(|&&a| a == Action::MoveAhead)
            .count()
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlanError {
    #[error("start cell {0} is not reachable")]
    StartNotReachable(Cell),
    #[error("goal cell {0} is not reachable")]
    GoalNotReachable(Cell),
    #[error("No path found from {from} to {to}")]
    NoPathFound { from: Cell, to: Cell },
}

/// Reachable cell whose center is closest to `position`; ties go to the
/// smaller `(row, col)`. `None` only for a grid without reachable cells.
pub fn nearest_grid_point(grid: &GridMap, position: [f64; 2]) -> Option<Cell> {
    let mut best: Option<(f64, Cell)> = None;
    // reachable_cells() is already in (row, col) order, so strict `<` keeps
    // the first of equally distant cells.
    for &cell in grid.reachable_cells() {
        let (cx, cy) = grid.center_unchecked(cell);
        let (dx, dy) = (position[0] - cx, position[1] - cy);
        let d2 = dx * dx + dy * dy;
        if best.is_none_or(|(b, _)| d2 < b) {
            best = Some((d2, cell));
        }
    }
    best.map(|(_, c)| c)
}

pub fn step_cost(heading: Rotation, direction: Rotation) -> u32 {
    if heading == direction {
        1
    } else {
        2
    }
}

/// Lexicographic `(moves, cost)` of an optimal route.
pub type RouteKey = (u32, u32);

const UNREACHED: RouteKey = (u32::MAX, u32::MAX);

fn state_index(cell_idx: usize, r: Rotation) -> usize {
    cell_idx * 4 + r.quarter_index()
}

fn add_step(key: RouteKey, heading: Rotation, dir: Rotation) -> RouteKey {
    (key.0 + 1, key.1 + step_cost(heading, dir))
}

/// Optimal remaining `(moves, cost)` from every `(cell, heading)` state to
/// `goal`, indexed by `grid.index(cell) * 4 + heading`; unreachable states
/// hold `(u32::MAX, u32::MAX)`.
#[derive(Debug, Clone)]
pub struct CostToGo {
    goal: Cell,
    keys: Vec<RouteKey>,
}

impl CostToGo {
    /// Uniform-cost search backwards from the goal.
    pub fn new(grid: &GridMap, goal: Cell) -> Self {
        let n_states = grid.width() as usize * grid.height() as usize * 4;
        let mut keys = vec![UNREACHED; n_states];
        let mut heap = BinaryHeap::new();
        let mut seq: u64 = 0;
        if let Some(gi) = grid.index(goal).filter(|_| grid.is_reachable(goal)) {
            for r in Rotation::ALL {
                keys[state_index(gi, r)] = (0, 0);
                heap.push(Reverse(((0u32, 0u32), seq, goal, r)));
                seq += 1;
            }
        }
        while let Some(Reverse((key, _, cell, arrived))) = heap.pop() {
            if key > keys[state_index(grid.index(cell).unwrap(), arrived)] {
                continue;
            }
            // predecessors: any heading at the cell behind us, stepping `arrived`
            let prev = cell.step(arrived.right().right());
            if !grid.is_reachable(prev) {
                continue;
            }
            let pi = grid.index(prev).unwrap();
            for heading in Rotation::ALL {
                let k = add_step(key, heading, arrived);
                let ps = state_index(pi, heading);
                if k < keys[ps] {
                    keys[ps] = k;
                    seq += 1;
                    heap.push(Reverse((k, seq, prev, heading)));
                }
            }
        }
        CostToGo { goal, keys }
    }

    pub fn goal(&self) -> Cell {
        self.goal
    }

    pub fn key(&self, grid: &GridMap, pose: Pose) -> Option<RouteKey> {
        let i = grid.index(pose.cell)?;
        Some(self.keys[state_index(i, pose.rotation)]).filter(|&k| k != UNREACHED)
    }

    /// Whether a step in `dir` from `pose` starts an optimal route.
    pub fn is_optimal_step(&self, grid: &GridMap, pose: Pose, dir: Rotation) -> bool {
        let next = pose.cell.step(dir);
        if !grid.is_reachable(next) {
            return false;
        }
        match (self.key(grid, pose), self.key(grid, Pose::new(next, dir))) {
            (Some(here), Some(there)) => add_step(there, pose.rotation, dir) == here,
            _ => false,
        }
    }
}

/// Shortest path in cells; among those, minimal turn-weighted cost. Where
/// several optimal steps exist the agent keeps its heading, otherwise the
/// first of north, east, south, west is taken.
pub fn plan_shortest_path(
    grid: &GridMap,
    start: Pose,
    goal: Cell,
) -> Result<PlannedPath, PlanError> {
    if !grid.is_reachable(start.cell) {
        return Err(PlanError::StartNotReachable(start.cell));
    }
    if !grid.is_reachable(goal) {
        return Err(PlanError::GoalNotReachable(goal));
    }
    let table = CostToGo::new(grid, goal);
    plan_with(grid, &table, start)
}

/// Walks an optimal route using a precomputed cost-to-go table.
pub fn plan_with(grid: &GridMap, table: &CostToGo, start: Pose) -> Result<PlannedPath, PlanError> {
    let Some(total) = table.key(grid, start) else {
        return Err(PlanError::NoPathFound {
            from: start.cell,
            to: table.goal(),
        });
    };
    let mut pose = start;
    let mut cells = vec![start.cell];
    while pose.cell != table.goal() {
        let dir = std::iter::once(pose.rotation)
            .chain(Rotation::ALL)
            .find(|&d| table.is_optimal_step(grid, pose, d))
            .expect("a state with finite cost-to-go has an optimal successor");
        pose = Pose::new(pose.cell.step(dir), dir);
        cells.push(pose.cell);
    }
    Ok(PlannedPath {
        cells,
        start_rotation: start.rotation,
        cost: total.1,
    })
}

/// Rotation actions turning `from` into `to`: one turn toward the matching
/// side for 90 degrees, two right turns for 180.
pub fn rotation_actions(from: Rotation, to: Rotation) -> Vec<Action> {
    match from.quarter_turns_to(to) {
        0 => vec![],
        1 => vec![Action::RotateRight],
        2 => vec![Action::RotateRight, Action::RotateRight],
        _ => vec![Action::RotateLeft],
    }
}

/// Cardinal heading from a cell center toward `target`.
///
/// Picks the axis with the larger displacement. On a tie the current heading
/// wins if it points toward the target, otherwise the first of north, east,
/// south, west that does.
pub fn heading_toward(grid: &GridMap, cell: Cell, target: [f64; 2], current: Rotation) -> Rotation {
    let (cx, cy) = grid.center_unchecked(cell);
    let (dx, dy) = (target[0] - cx, target[1] - cy);
    let horizontal = if dx > 0.0 {
        Some(Rotation::East)
    } else if dx < 0.0 {
        Some(Rotation::West)
    } else {
        None
    };
    let vertical = if dy > 0.0 {
        Some(Rotation::North)
    } else if dy < 0.0 {
        Some(Rotation::South)
    } else {
        None
    };
    match (dx.abs().partial_cmp(&dy.abs()), horizontal, vertical) {
        (_, None, None) => current,
        (Some(std::cmp::Ordering::Greater), Some(h), _) => h,
        (Some(std::cmp::Ordering::Less), _, Some(v)) => v,
        (_, Some(h), Some(v)) => {
            if current == h || current == v {
                current
            } else {
                h.min(v)
            }
        }
        (_, Some(h), None) => h,
        (_, None, Some(v)) => v,
    }
}

/// Turns a planned path into actions, ending with a view adjustment toward
/// `target` and a single `Done`.
pub fn derive_actions(grid: &GridMap, path: &PlannedPath, target: [f64; 2]) -> ActionSequence {
    let mut heading = path.start_rotation;
    let mut actions = Vec::with_capacity(path.cells.len() + 4);
    for pair in path.cells.windows(2) {
        let (prev, next) = (pair[0], pair[1]);
        let dir = Rotation::from_delta(next.col - prev.col, next.row - prev.row)
            .expect("planned path cells are 4-adjacent");
        if dir != heading {
            actions.extend(rotation_actions(heading, dir));
            heading = dir;
        }
        actions.push(Action::MoveAhead);
    }
    let last = *path.cells.last().expect("path holds at least the start cell");
    let facing = heading_toward(grid, last, target, heading);
    actions.extend(rotation_actions(heading, facing));
    actions.push(Action::Done);
    ActionSequence {
        actions,
        final_rotation: facing,
    }
}
