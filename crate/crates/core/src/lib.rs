//! Grid-world open-vocabulary object navigation.
//!
//! Procedural houses, rotation-penalized shortest-path demonstrations,
//! chain-of-thought instruction/response traces, a behavior-cloning softmax
//! policy, and SR/SPL/SEL evaluation of navigation agents.

pub mod action;
pub mod bc;
pub mod cli;
pub mod desc;
pub mod episode;
pub mod eval;
pub mod housegen;
pub mod planner;
pub mod render;
pub mod scene;
pub mod sim;
pub mod taxonomy;
pub mod trace;
pub mod util;

pub use action::Action;
pub use episode::{sample_episodes, Episode};
pub use housegen::{generate_house, GenerationSpec};
pub use planner::{derive_actions, nearest_grid_point, plan_shortest_path, ActionSequence, PlannedPath};
pub use scene::{load_house, save_house, Cell, GridMap, House, ObjectInstance, Pose, Room, Rotation};
pub use sim::{Observation, SimConfig, Simulator};
