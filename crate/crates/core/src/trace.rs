//! Per-step instruction and chain-of-thought response compilation, plus
//! MoveAhead downsampling and conflict filtering.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::Action;
use crate::episode::Episode;
use crate::planner::CostToGo;
use crate::scene::{Cell, GridMap, House, Rotation, CELL_SIZE_M};
use crate::sim::{Bearing, Observation};
use crate::util::{derive_seed, fmt2, fmt_point, sha256_hex};

/// Recent (position, rotation, action) rows shown per instruction.
pub const HISTORY_STEPS: usize = 8;
/// Recent rows that also carry a view block.
pub const HISTORY_VIEWS: usize = 4;
pub const NONE_MARKER: &str = "none";

pub mod templates {
    //! Template texts. Placeholders are `[name]`; nothing else varies.

    pub const INTRODUCTION: &str = "You are an agent placed in a 3D environment. Your step length is 0.25 meters, and your rotation degree is 90.
The possible actions are:
1. MoveAhead: Moves the agent forward by 0.25 meters in the direction it is currently facing. For example, if the agent is at (x, y) facing 0 degrees (north), MoveAhead will result in (x, y + 0.25). If the agent is facing 90 degrees (east), MoveAhead will result in (x + 0.25, y). If the agent is facing 180 degrees (south), MoveAhead will result in (x, y - 0.25). If the agent is facing 270 degrees (west), MoveAhead will result in (x - 0.25, y).
2. RotateRight: Rotate right for 90 degrees (clockwise).
3. RotateLeft: Rotate left for 90 degrees. (counterclockwise).
4. Done: Indicate that you are near to the target object and finish the task.";

    pub const EPISODE_INFO: &str = "You need to find a [obj_type] at the position [obj_pos]. To achieve this, we recommend you move to the position [grid_obj_pos] with a rotation of [grid_obj_rotation].
Currently, you are at [agent_pos] with a rotation of [agent_rotation].
Current View: [current_view]";

    /// Appended to `EPISODE_INFO` in gold-label mode.
    pub const GOLD_LABEL: &str = "
The difference to the target object is [position_diff].";

    pub const HISTORY_HEADER: &str = "The history of recent states are:";
    pub const HISTORY_ROW: &str =
        "Position: [recent_agent_pos], Rotation: [recent_agent_rotation], Action: [recent_action]";
    pub const HISTORY_ROW_WITH_VIEW: &str = "Position: [recent_agent_pos], Rotation: [recent_agent_rotation], Current View: [recent_agent_image], Action: [recent_action]";

    pub const PREDICTION: &str = "Please generate the next step given the above states with the following steps: 1) Consider your rotation and position. 2) Check the images to see obstacles or the target object. 3) Decide the action.";

    pub const MOVE: &str = "1) In the direction of my rotation, [agent_rotation] degrees ([cardinal_direction]), the difference to the target object is [position_diff]m. I need to move further [cardinal_direction].
2) There is no obstacle in front of me in recent images.
3) MoveAhead";

    pub const DONE: &str = "1) My position and rotation are equal to the recommended one.
2) I can see the target [obj_type] in the image of the current state.
3) Done";

    pub const ROTATE_ZERO_DIFF: &str = "1) In the direction of my rotation, [agent_rotation] degrees ([cardinal_direction]), the difference to the recommended position is 0.00m. Thus, I need to move in another direction, where the difference is [other_position_diff]m, and the rotation is [other_agent_rotation] degrees.
2) Obstacles don't affect rotation.
3) [action]";

    pub const ROTATE_OBSTACLE: &str = "1) In the direction of my rotation, [agent_rotation] degrees ([cardinal_direction]), the difference compared to the target object is [position_diff]m.
2) There are obstacles in front of me, as shown in current images. I need to rotate in another direction. In the other direction, the difference is [other_position_diff]m, and the rotation is [other_agent_rotation] degrees.
3) [action]";

    pub const ROTATE_VIEW_ADJUST: &str = "1) My position is the same as the recommended one: [grid_obj_pos]. However, my rotation is [agent_rotation] degrees, facing [cardinal_direction]. I need to adjust the rotation to center the target within its field of view.
2) Obstacles don't affect rotation.
3) [action]";
}

/// Substitutes every `[name]` placeholder from `values`.
pub fn fill(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + 64);
    let mut rest = template;
    while let Some(open) = rest.find('[') {
        let Some(close) = rest[open..].find(']') else {
            break;
        };
        let name = &rest[open + 1..open + close];
        match values.iter().find(|(k, _)| *k == name) {
            Some((_, v)) => {
                out.push_str(&rest[..open]);
                out.push_str(v);
            }
            None => out.push_str(&rest[..open + close + 1]),
        }
        rest = &rest[open + close + 1..];
    }
    out.push_str(rest);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scenario {
    MoveScenario,
    DoneScenario,
    RotateZeroDiff,
    RotateObstacle,
    RotateViewAdjust,
}

impl Scenario {
    pub fn template(self) -> &'static str {
        match self {
            Scenario::MoveScenario => templates::MOVE,
            Scenario::DoneScenario => templates::DONE,
            Scenario::RotateZeroDiff => templates::ROTATE_ZERO_DIFF,
            Scenario::RotateObstacle => templates::ROTATE_OBSTACLE,
            Scenario::RotateViewAdjust => templates::ROTATE_VIEW_ADJUST,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TraceError {
    #[error("step {step} is outside episode {episode_id} ({len} actions)")]
    StepOutOfRange {
        episode_id: String,
        step: usize,
        len: usize,
    },
    #[error("rotation at step {step} of episode {episode_id} fits no scenario")]
    UnclassifiableRotation { episode_id: String, step: usize },
    #[error("episode {episode_id} refers to house {house_id}, got {got}")]
    HouseMismatch {
        episode_id: String,
        house_id: String,
        got: String,
    },
    #[error("keep rate {0} is outside [0, 1]")]
    InvalidKeepRate(f64),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceOptions {
    /// Append the exact difference to the recommended position to part 2.
    pub gold_label: bool,
    /// Spell position differences as `a - b = d`.
    pub diff_eq: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub episode_id: String,
    pub step_index: usize,
    pub instruction: String,
    pub response: String,
    pub action: Action,
    pub scenario: Scenario,
    pub state_key: String,
}

fn check_step(episode: &Episode, step: usize) -> Result<(), TraceError> {
    if step >= episode.len() {
        return Err(TraceError::StepOutOfRange {
            episode_id: episode.id.clone(),
            step,
            len: episode.len(),
        });
    }
    Ok(())
}

fn bearing_word(b: Bearing) -> &'static str {
    match b {
        Bearing::Ahead => "ahead",
        Bearing::Left => "left",
        Bearing::Right => "right",
    }
}

/// Delimited symbolic stand-in for a camera frame.
pub fn render_view(obs: &Observation) -> String {
    let mut s = String::from("<view>\n");
    for row in &obs.egocentric_grid {
        s.push_str(row);
        s.push('\n');
    }
    s.push_str("visible: ");
    if obs.visible_objects.is_empty() {
        s.push_str(NONE_MARKER);
    } else {
        let items: Vec<String> = obs
            .visible_objects
            .iter()
            .map(|v| format!("{} {}m {}", v.category, fmt2(v.distance_m), bearing_word(v.bearing)))
            .collect();
        s.push_str(&items.join("; "));
    }
    s.push_str("\n</view>");
    s
}

/// Quarter-meter displacement from `cell` to the recommended cell.
fn displacement(episode: &Episode, cell: Cell) -> (i32, i32) {
    (
        episode.recommended_cell.col - cell.col,
        episode.recommended_cell.row - cell.row,
    )
}

/// Signed displacement to the recommended cell along `facing`, in cells.
pub fn forward_cells(episode: &Episode, cell: Cell, facing: Rotation) -> i32 {
    let (dc, dr) = displacement(episode, cell);
    let (fx, fy) = facing.delta();
    dc * fx + dr * fy
}

fn cells_to_m(n: i32) -> f64 {
    n as f64 * CELL_SIZE_M
}

/// Position difference along `facing`, optionally spelled as an equation over
/// the coordinate on that axis.
fn axis_diff_text(episode: &Episode, obs: &Observation, facing: Rotation, opts: &TraceOptions) -> String {
    let diff = fmt2(cells_to_m(forward_cells(episode, obs.pose.cell, facing)));
    if !opts.diff_eq {
        return diff;
    }
    let axis = match facing {
        Rotation::East | Rotation::West => 0,
        Rotation::North | Rotation::South => 1,
    };
    let (target, agent) = (episode.recommended_position[axis], obs.position_m[axis]);
    let (a, b) = match facing {
        Rotation::East | Rotation::North => (target, agent),
        Rotation::West | Rotation::South => (agent, target),
    };
    format!("{} - {} = {}", fmt2(a), fmt2(b), diff)
}

fn point_diff_text(episode: &Episode, obs: &Observation, opts: &TraceOptions) -> String {
    let (dc, dr) = displacement(episode, obs.pose.cell);
    let diff = fmt_point([cells_to_m(dc), cells_to_m(dr)]);
    if opts.diff_eq {
        format!(
            "{} - {} = {}",
            fmt_point(episode.recommended_position),
            fmt_point(obs.position_m),
            diff
        )
    } else {
        diff
    }
}

fn history_block(episode: &Episode, step: usize) -> String {
    let mut lines = vec![templates::HISTORY_HEADER.to_string()];
    for slot in 0..HISTORY_STEPS {
        let with_view = slot >= HISTORY_STEPS - HISTORY_VIEWS;
        let template = if with_view {
            templates::HISTORY_ROW_WITH_VIEW
        } else {
            templates::HISTORY_ROW
        };
        let past = (step + slot).checked_sub(HISTORY_STEPS);
        let row = match past {
            Some(j) => {
                let obs = &episode.observations[j];
                let view = if with_view { render_view(obs) } else { String::new() };
                fill(
                    template,
                    &[
                        ("recent_agent_pos", &fmt_point(obs.position_m)),
                        ("recent_agent_rotation", &obs.pose.rotation.to_string()),
                        ("recent_agent_image", &view),
                        ("recent_action", episode.actions.actions[j].as_str()),
                    ],
                )
            }
            None => fill(
                template,
                &[
                    ("recent_agent_pos", NONE_MARKER),
                    ("recent_agent_rotation", NONE_MARKER),
                    ("recent_agent_image", NONE_MARKER),
                    ("recent_action", NONE_MARKER),
                ],
            ),
        };
        lines.push(row);
    }
    lines.join("\n")
}

pub fn compile_instruction(episode: &Episode, step: usize, opts: &TraceOptions) -> Result<String, TraceError> {
    check_step(episode, step)?;
    let obs = &episode.observations[step];
    let mut info = fill(
        templates::EPISODE_INFO,
        &[
            ("obj_type", &episode.target_category),
            ("obj_pos", &fmt_point(episode.target_position)),
            ("grid_obj_pos", &fmt_point(episode.recommended_position)),
            ("grid_obj_rotation", &episode.recommended_rotation.to_string()),
            ("agent_pos", &fmt_point(obs.position_m)),
            ("agent_rotation", &obs.pose.rotation.to_string()),
            ("current_view", &render_view(obs)),
        ],
    );
    if opts.gold_label {
        info.push_str(&fill(
            templates::GOLD_LABEL,
            &[("position_diff", &point_diff_text(episode, obs, opts))],
        ));
    }
    Ok([
        templates::INTRODUCTION.to_string(),
        info,
        history_block(episode, step),
        templates::PREDICTION.to_string(),
    ]
    .join("\n\n"))
}

/// Response scenario of the rotation at `step`: view adjustment at the
/// recommended cell, zero (or negative) remaining difference along the facing
/// axis, or an obstacle, meaning no optimal route continues straight ahead.
/// The second rotation of an about-turn is judged from where the turn began.
pub fn classify_rotation_scenario(
    grid: &GridMap,
    episode: &Episode,
    step: usize,
) -> Result<Scenario, TraceError> {
    classify_with(grid, &CostToGo::new(grid, episode.recommended_cell), episode, step)
}

fn classify_with(grid: &GridMap, table: &CostToGo, episode: &Episode, step: usize) -> Result<Scenario, TraceError> {
    check_step(episode, step)?;
    let pose = episode.observations[step].pose;
    if pose.cell == episode.recommended_cell {
        return Ok(Scenario::RotateViewAdjust);
    }
    if forward_cells(episode, pose.cell, pose.rotation) <= 0 {
        return Ok(Scenario::RotateZeroDiff);
    }
    // walk back to the first rotation of the run at this cell
    let mut first = step;
    while first > 0 && episode.actions.actions[first - 1].is_rotation() {
        first -= 1;
    }
    let blocked = [step, first].into_iter().any(|t| {
        let p = episode.observations[t].pose;
        !table.is_optimal_step(grid, p, p.rotation)
    });
    if blocked {
        return Ok(Scenario::RotateObstacle);
    }
    Err(TraceError::UnclassifiableRotation {
        episode_id: episode.id.clone(),
        step,
    })
}

/// Heading at the end of the run of rotations starting at `step`.
fn heading_after_rotations(episode: &Episode, step: usize) -> Rotation {
    let mut heading = episode.observations[step].pose.rotation;
    for a in episode.actions.actions[step..].iter().take_while(|a| a.is_rotation()) {
        heading = match a {
            Action::RotateRight => heading.right(),
            _ => heading.left(),
        };
    }
    heading
}

pub fn compile_response(
    grid: &GridMap,
    episode: &Episode,
    step: usize,
    opts: &TraceOptions,
) -> Result<(String, Scenario), TraceError> {
    response_with(grid, &CostToGo::new(grid, episode.recommended_cell), episode, step, opts)
}

fn response_with(
    grid: &GridMap,
    table: &CostToGo,
    episode: &Episode,
    step: usize,
    opts: &TraceOptions,
) -> Result<(String, Scenario), TraceError> {
    check_step(episode, step)?;
    let obs = &episode.observations[step];
    let action = episode.actions.actions[step];
    let rotation = obs.pose.rotation.to_string();
    let scenario = match action {
        Action::MoveAhead => Scenario::MoveScenario,
        Action::Done => Scenario::DoneScenario,
        _ => classify_with(grid, table, episode, step)?,
    };
    let other = heading_after_rotations(episode, step);
    let text = match scenario {
        Scenario::MoveScenario => fill(
            templates::MOVE,
            &[
                ("agent_rotation", &rotation),
                ("cardinal_direction", obs.pose.rotation.compass()),
                ("position_diff", &axis_diff_text(episode, obs, obs.pose.rotation, opts)),
            ],
        ),
        Scenario::DoneScenario => fill(templates::DONE, &[("obj_type", &episode.target_category)]),
        Scenario::RotateZeroDiff => fill(
            templates::ROTATE_ZERO_DIFF,
            &[
                ("agent_rotation", &rotation),
                ("cardinal_direction", obs.pose.rotation.compass()),
                ("other_position_diff", &axis_diff_text(episode, obs, other, opts)),
                ("other_agent_rotation", &other.to_string()),
                ("action", action.as_str()),
            ],
        ),
        Scenario::RotateObstacle => fill(
            templates::ROTATE_OBSTACLE,
            &[
                ("agent_rotation", &rotation),
                ("cardinal_direction", obs.pose.rotation.compass()),
                ("position_diff", &axis_diff_text(episode, obs, obs.pose.rotation, opts)),
                ("other_position_diff", &axis_diff_text(episode, obs, other, opts)),
                ("other_agent_rotation", &other.to_string()),
                ("action", action.as_str()),
            ],
        ),
        Scenario::RotateViewAdjust => fill(
            templates::ROTATE_VIEW_ADJUST,
            &[
                ("grid_obj_pos", &fmt_point(episode.recommended_position)),
                ("agent_rotation", &rotation),
                ("cardinal_direction", obs.pose.rotation.compass()),
                ("action", action.as_str()),
            ],
        ),
    };
    Ok((text, scenario))
}

pub fn state_key(house_id: &str, target_object_id: &str, instruction: &str) -> String {
    sha256_hex(format!("{house_id}\n{target_object_id}\n{instruction}").as_bytes())
}

pub fn compile_episode(house: &House, episode: &Episode, opts: &TraceOptions) -> Result<Vec<TraceStep>, TraceError> {
    if house.id() != episode.house_id {
        return Err(TraceError::HouseMismatch {
            episode_id: episode.id.clone(),
            house_id: episode.house_id.clone(),
            got: house.id().to_string(),
        });
    }
    let table = CostToGo::new(house.grid(), episode.recommended_cell);
    (0..episode.len())
        .map(|step| {
            let instruction = compile_instruction(episode, step, opts)?;
            let (response, scenario) = response_with(house.grid(), &table, episode, step, opts)?;
            Ok(TraceStep {
                episode_id: episode.id.clone(),
                step_index: step,
                state_key: state_key(&episode.house_id, &episode.target_object_id, &instruction),
                instruction,
                response,
                action: episode.actions.actions[step],
                scenario,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionCounts {
    pub move_ahead: usize,
    pub rotate_left: usize,
    pub rotate_right: usize,
    pub done: usize,
}

impl ActionCounts {
    pub fn from_steps(steps: &[TraceStep]) -> Self {
        let mut c = ActionCounts::default();
        for s in steps {
            *c.get_mut(s.action) += 1;
        }
        c
    }

    fn get_mut(&mut self, a: Action) -> &mut usize {
        match a {
            Action::MoveAhead => &mut self.move_ahead,
            Action::RotateLeft => &mut self.rotate_left,
            Action::RotateRight => &mut self.rotate_right,
            Action::Done => &mut self.done,
        }
    }

    pub fn get(&self, a: Action) -> usize {
        match a {
            Action::MoveAhead => self.move_ahead,
            Action::RotateLeft => self.rotate_left,
            Action::RotateRight => self.rotate_right,
            Action::Done => self.done,
        }
    }

    pub fn total(&self) -> usize {
        self.move_ahead + self.rotate_left + self.rotate_right + self.done
    }

    /// Share of `a`; 0 for an empty corpus.
    pub fn proportion(&self, a: Action) -> f64 {
        match self.total() {
            0 => 0.0,
            t => self.get(a) as f64 / t as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub action: Action,
    pub before_count: usize,
    pub before_proportion: f64,
    pub after_count: usize,
    pub after_proportion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostprocessReport {
    pub keep_rate: f64,
    pub before: ActionCounts,
    pub after: ActionCounts,
    pub move_ahead_dropped: usize,
    pub conflict_groups: usize,
    pub conflict_steps_removed: usize,
}

impl PostprocessReport {
    /// Rows in MoveAhead, RotateLeft, RotateRight, Done order.
    pub fn histogram(&self) -> Vec<HistogramRow> {
        [Action::MoveAhead, Action::RotateLeft, Action::RotateRight, Action::Done]
            .into_iter()
            .map(|a| HistogramRow {
                action: a,
                before_count: self.before.get(a),
                before_proportion: self.before.proportion(a),
                after_count: self.after.get(a),
                after_proportion: self.after.proportion(a),
            })
            .collect()
    }
}

/// Seeded MoveAhead downsampling followed by removal of every state_key group
/// whose steps disagree on the action.
pub fn postprocess(
    steps: Vec<TraceStep>,
    keep_rate: f64,
    seed: u64,
) -> Result<(Vec<TraceStep>, PostprocessReport), TraceError> {
    if !(0.0..=1.0).contains(&keep_rate) {
        return Err(TraceError::InvalidKeepRate(keep_rate));
    }
    let before = ActionCounts::from_steps(&steps);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "postprocess"));
    let kept: Vec<TraceStep> = steps
        .into_iter()
        .filter(|s| s.action != Action::MoveAhead || rng.gen_bool(keep_rate))
        .collect();
    let move_ahead_dropped = before.move_ahead - ActionCounts::from_steps(&kept).move_ahead;

    let mut labels: HashMap<&str, Action> = HashMap::new();
    let mut conflicting: BTreeMap<String, ()> = BTreeMap::new();
    for s in &kept {
        match labels.get(s.state_key.as_str()) {
            Some(&a) if a != s.action => {
                conflicting.insert(s.state_key.clone(), ());
            }
            Some(_) => {}
            None => {
                labels.insert(&s.state_key, s.action);
            }
        }
    }
    let before_filter = kept.len();
    let out: Vec<TraceStep> = kept
        .into_iter()
        .filter(|s| !conflicting.contains_key(&s.state_key))
        .collect();
    let report = PostprocessReport {
        keep_rate,
        before,
        after: ActionCounts::from_steps(&out),
        move_ahead_dropped,
        conflict_groups: conflicting.len(),
        conflict_steps_removed: before_filter - out.len(),
    };
    Ok((out, report))
}

/// `state_key`s that map to more than one action.
pub fn conflicting_keys(steps: &[TraceStep]) -> Vec<String> {
    let mut seen: BTreeMap<&str, Action> = BTreeMap::new();
    let mut bad = BTreeMap::new();
    for s in steps {
        if let Some(&a) = seen.get(s.state_key.as_str()) {
            if a != s.action {
                bad.insert(s.state_key.clone(), ());
            }
        } else {
            seen.insert(&s.state_key, s.action);
        }
    }
    bad.into_keys().collect()
}
