//! Deterministic episode state machine with symbolic egocentric observations.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::Action;
use crate::housegen::TARGET_HEIGHT_RANGE_M;
use crate::scene::{Cell, House, ObjectInstance, Pose};

pub const MAX_STEPS: u32 = 200;
pub const SUCCESS_RADIUS_M: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub max_steps: u32,
    pub view_range_m: f64,
    /// Half of the horizontal field of view.
    pub half_fov_deg: f64,
    pub window_half_width: u32,
    pub success_radius_m: f64,
    /// When false, success only needs the distance condition.
    pub require_visibility: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            max_steps: MAX_STEPS,
            view_range_m: 5.0,
            half_fov_deg: 45.0,
            window_half_width: 5,
            success_radius_m: SUCCESS_RADIUS_M,
            require_visibility: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TerminationCause {
    DoneIssued,
    StepLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimState {
    pub pose: Pose,
    pub steps_taken: u32,
    pub termination: Option<TerminationCause>,
}

impl SimState {
    pub fn terminated(&self) -> bool {
        self.termination.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bearing {
    Ahead,
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibleObject {
    pub id: String,
    pub category: String,
    pub distance_m: f64,
    pub bearing: Bearing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub pose: Pose,
    pub position_m: [f64; 2],
    /// Sorted by distance, then id.
    pub visible_objects: Vec<VisibleObject>,
    pub obstacle_ahead: bool,
    /// Agent-frame occupancy window, farthest row first, agent (`A`) at the
    /// center facing up. `.` reachable, `#` blocked, `o` visible object.
    pub egocentric_grid: Vec<String>,
}

impl Observation {
    pub fn sees(&self, object_id: &str) -> bool {
        self.visible_objects.iter().any(|v| v.id == object_id)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("start cell {0} is not reachable")]
    StartNotReachable(Cell),
    #[error("step() called after the episode terminated")]
    StepAfterTermination,
    #[error("success queried before the episode terminated")]
    SuccessBeforeTermination,
}

pub struct Simulator<'h> {
    house: &'h House,
    config: SimConfig,
    state: SimState,
}

impl<'h> Simulator<'h> {
    pub fn new(house: &'h House, start: Pose, config: SimConfig) -> Result<Self, SimError> {
        if !house.grid().is_reachable(start.cell) {
            return Err(SimError::StartNotReachable(start.cell));
        }
        Ok(Simulator {
            house,
            config,
            state: SimState {
                pose: start,
                steps_taken: 0,
                termination: None,
            },
        })
    }

    /// Continues from a previously captured state.
    pub fn resume(house: &'h House, state: SimState, config: SimConfig) -> Result<Self, SimError> {
        if !house.grid().is_reachable(state.pose.cell) {
            return Err(SimError::StartNotReachable(state.pose.cell));
        }
        Ok(Simulator { house, config, state })
    }

    pub fn house(&self) -> &'h House {
        self.house
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn pose(&self) -> Pose {
        self.state.pose
    }

    pub fn step(&mut self, action: Action) -> Result<Observation, SimError> {
        if self.state.terminated() {
            return Err(SimError::StepAfterTermination);
        }
        let pose = &mut self.state.pose;
        match action {
            Action::MoveAhead => {
                let next = pose.cell.step(pose.rotation);
                if self.house.grid().is_reachable(next) {
                    pose.cell = next;
                }
            }
            Action::RotateRight => pose.rotation = pose.rotation.right(),
            Action::RotateLeft => pose.rotation = pose.rotation.left(),
            Action::Done => self.state.termination = Some(TerminationCause::DoneIssued),
        }
        self.state.steps_taken += 1;
        if self.state.termination.is_none() && self.state.steps_taken >= self.config.max_steps {
            self.state.termination = Some(TerminationCause::StepLimit);
        }
        Ok(self.observe())
    }

    pub fn observe(&self) -> Observation {
        observe(self.house, self.state.pose, &self.config)
    }

    pub fn visible(&self, obj: &ObjectInstance) -> bool {
        visible_from(self.house, self.state.pose, obj, &self.config)
    }

    pub fn distance_to(&self, obj: &ObjectInstance) -> f64 {
        distance(self.house, self.state.pose.cell, obj)
    }

    pub fn is_success(&self, target: &ObjectInstance) -> Result<bool, SimError> {
        if !self.state.terminated() {
            return Err(SimError::SuccessBeforeTermination);
        }
        Ok(success_at(self.house, self.state.pose, target, &self.config))
    }
}

/// Success predicate evaluated at a pose, regardless of termination.
pub fn success_at(house: &House, pose: Pose, target: &ObjectInstance, config: &SimConfig) -> bool {
    distance(house, pose.cell, target) < config.success_radius_m
        && (!config.require_visibility || visible_from(house, pose, target, config))
}

fn distance(house: &House, cell: Cell, obj: &ObjectInstance) -> f64 {
    let (x, y) = house.grid().center_unchecked(cell);
    (obj.position[0] - x).hypot(obj.position[1] - y)
}

/// Range, field of view, line of sight and height band, all required.
pub fn visible_from(house: &House, pose: Pose, obj: &ObjectInstance, config: &SimConfig) -> bool {
    let (hlo, hhi) = TARGET_HEIGHT_RANGE_M;
    if !(obj.height_m >= hlo && obj.height_m <= hhi) {
        return false;
    }
    if distance(house, pose.cell, obj) > config.view_range_m {
        return false;
    }
    let obj_cell = house.object_cell(obj);
    if obj_cell == pose.cell {
        return true;
    }
    match relative_angle_deg(house, pose, obj) {
        Some(angle) if angle.abs() <= config.half_fov_deg + 1e-9 => {}
        _ => return false,
    }
    line_of_sight(house, pose.cell, obj_cell)
}

/// Signed angle of the object relative to the facing direction, positive to
/// the right. `None` when the object sits at the agent center.
fn relative_angle_deg(house: &House, pose: Pose, obj: &ObjectInstance) -> Option<f64> {
    let (x, y) = house.grid().center_unchecked(pose.cell);
    let (dx, dy) = (obj.position[0] - x, obj.position[1] - y);
    let (fx, fy) = pose.rotation.delta();
    let (rx, ry) = pose.rotation.right().delta();
    let along = dx * fx as f64 + dy * fy as f64;
    let lateral = dx * rx as f64 + dy * ry as f64;
    if along == 0.0 && lateral == 0.0 {
        return None;
    }
    Some(lateral.atan2(along).to_degrees())
}

/// Bresenham walk between two cells; the endpoints themselves never block.
pub fn line_of_sight(house: &House, from: Cell, to: Cell) -> bool {
    bresenham(from, to)
        .into_iter()
        .filter(|&c| c != from && c != to)
        .all(|c| !house.blocks_vision(c))
}

pub(crate) fn bresenham(from: Cell, to: Cell) -> Vec<Cell> {
    let (mut x, mut y) = (from.col, from.row);
    let dx = (to.col - x).abs();
    let dy = -(to.row - y).abs();
    let sx = if x < to.col { 1 } else { -1 };
    let sy = if y < to.row { 1 } else { -1 };
    let mut err = dx + dy;
    let mut cells = vec![from];
    while (x, y) != (to.col, to.row) {
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
        cells.push(Cell::new(x, y));
    }
    cells
}

pub fn observe(house: &House, pose: Pose, config: &SimConfig) -> Observation {
    let grid = house.grid();
    let (x, y) = grid.center_unchecked(pose.cell);
    let mut visible: Vec<(VisibleObject, Cell)> = house
        .objects()
        .iter()
        .filter(|o| visible_from(house, pose, o, config))
        .map(|o| {
            let angle = relative_angle_deg(house, pose, o).unwrap_or(0.0);
            let bearing = if angle.abs() <= 15.0 {
                Bearing::Ahead
            } else if angle > 0.0 {
                Bearing::Right
            } else {
                Bearing::Left
            };
            (
                VisibleObject {
                    id: o.id.clone(),
                    category: o.category.clone(),
                    distance_m: distance(house, pose.cell, o),
                    bearing,
                },
                house.object_cell(o),
            )
        })
        .collect();
    visible.sort_by(|a, b| {
        a.0.distance_m
            .total_cmp(&b.0.distance_m)
            .then_with(|| a.0.id.cmp(&b.0.id))
    });

    let h = config.window_half_width as i32;
    let (fx, fy) = pose.rotation.delta();
    let (rx, ry) = pose.rotation.right().delta();
    let mut window = Vec::with_capacity((2 * h + 1) as usize);
    for fwd in (-h..=h).rev() {
        let mut line = String::with_capacity((2 * h + 1) as usize);
        for side in -h..=h {
            let cell = Cell::new(
                pose.cell.col + fwd * fx + side * rx,
                pose.cell.row + fwd * fy + side * ry,
            );
            let ch = if fwd == 0 && side == 0 {
                'A'
            } else if visible.iter().any(|(_, c)| *c == cell) {
                'o'
            } else if grid.is_reachable(cell) {
                '.'
            } else {
                '#'
            };
            line.push(ch);
        }
        window.push(line);
    }

    Observation {
        pose,
        position_m: [x, y],
        visible_objects: visible.into_iter().map(|(v, _)| v).collect(),
        obstacle_ahead: !grid.is_reachable(pose.cell.step(pose.rotation)),
        egocentric_grid: window,
    }
}
