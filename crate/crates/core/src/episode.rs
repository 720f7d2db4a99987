//! Episode sampling: start pose and target, planned demonstration, replayed
//! observations. Plus corpus statistics and a seeded house partition.

use std::collections::{BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::housegen::TARGET_HEIGHT_RANGE_M;
use crate::planner::{derive_actions, nearest_grid_point, plan_shortest_path, ActionSequence, PlannedPath};
use crate::scene::{Cell, House, ObjectInstance, Pose, Rotation};
use crate::sim::{Observation, SimConfig, Simulator};
use crate::util::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub id: String,
    pub house_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
    pub initial_pose: Pose,
    pub target_category: String,
    pub target_object_id: String,
    pub target_position: [f64; 2],
    pub recommended_cell: Cell,
    pub recommended_position: [f64; 2],
    pub recommended_rotation: Rotation,
    pub path: PlannedPath,
    pub actions: ActionSequence,
    /// `observations[t]` is the state before `actions.actions[t]`; the final
    /// entry is the terminal state.
    pub observations: Vec<Observation>,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.actions.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.actions.is_empty()
    }

    /// Meters covered by the demonstration.
    pub fn demo_length_m(&self) -> f64 {
        self.actions.move_count() as f64 * crate::scene::CELL_SIZE_M
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleConfig {
    /// Attempts per episode slot before giving up on it.
    pub retries_per_slot: u32,
    pub sim: SimConfig,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            retries_per_slot: 20,
            sim: SimConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SkipReason {
    /// No path from the start cell to the target's nearest grid point.
    NoPath,
    /// The demonstration ends out of range or without sight of the target.
    NotObservable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub slot: usize,
    pub object_id: String,
    pub reason: SkipReason,
}

#[derive(Debug, Error, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlotError {
    #[error("no eligible target left in house {house_id}")]
    NoEligibleTarget { house_id: String },
    #[error("no reachable target after {attempts} attempts in house {house_id}")]
    NoReachableTarget { house_id: String, attempts: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotFailure {
    pub slot: usize,
    pub error: SlotError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleReport {
    pub episodes: Vec<Episode>,
    pub skipped: Vec<SkipRecord>,
    pub unfilled: Vec<SlotFailure>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SampleError {
    #[error("episode count must be at least 1")]
    ZeroCount,
    #[error("house {0} has no reachable cell")]
    NoReachableCell(String),
}

pub fn is_target_height(obj: &ObjectInstance) -> bool {
    obj.height_m >= TARGET_HEIGHT_RANGE_M.0 && obj.height_m <= TARGET_HEIGHT_RANGE_M.1
}

/// Samples up to `n` episodes with pairwise distinct target categories.
pub fn sample_episodes(
    house: &House,
    n: usize,
    seed: u64,
    config: &SampleConfig,
) -> Result<SampleReport, SampleError> {
    if n == 0 {
        return Err(SampleError::ZeroCount);
    }
    let cells = house.grid().reachable_cells();
    if cells.is_empty() {
        return Err(SampleError::NoReachableCell(house.id().to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, house.id()));
    let mut used: HashSet<&str> = HashSet::new();
    let mut report = SampleReport {
        episodes: Vec::new(),
        skipped: Vec::new(),
        unfilled: Vec::new(),
    };

    for slot in 0..n {
        let mut filled = false;
        let mut exhausted = false;
        for _ in 0..config.retries_per_slot {
            let eligible: Vec<&ObjectInstance> = house
                .objects()
                .iter()
                .filter(|o| is_target_height(o) && !used.contains(o.category.as_str()))
                .collect();
            if eligible.is_empty() {
                exhausted = true;
                break;
            }
            let start = Pose::new(
                cells[rng.gen_range(0..cells.len())],
                Rotation::ALL[rng.gen_range(0..4)],
            );
            let target = *eligible.choose(&mut rng).unwrap();
            match build_episode(house, start, target, &config.sim) {
                Ok(mut ep) => {
                    ep.id = format!("{}-ep{:02}", house.id(), report.episodes.len());
                    used.insert(target.category.as_str());
                    report.episodes.push(ep);
                    filled = true;
                    break;
                }
                Err(reason) => report.skipped.push(SkipRecord {
                    slot,
                    object_id: target.id.clone(),
                    reason,
                }),
            }
        }
        if exhausted {
            // nothing can change for later slots either
            for s in slot..n {
                report.unfilled.push(SlotFailure {
                    slot: s,
                    error: SlotError::NoEligibleTarget {
                        house_id: house.id().to_string(),
                    },
                });
            }
            break;
        }
        if !filled {
            report.unfilled.push(SlotFailure {
                slot,
                error: SlotError::NoReachableTarget {
                    house_id: house.id().to_string(),
                    attempts: config.retries_per_slot,
                },
            });
        }
    }
    Ok(report)
}

/// Plans, derives and replays one demonstration; the episode id is left empty.
pub fn build_episode(
    house: &House,
    start: Pose,
    target: &ObjectInstance,
    sim: &SimConfig,
) -> Result<Episode, SkipReason> {
    let grid = house.grid();
    let goal = nearest_grid_point(grid, target.position).ok_or(SkipReason::NoPath)?;
    let path = plan_shortest_path(grid, start, goal).map_err(|_| SkipReason::NoPath)?;
    let actions = derive_actions(grid, &path, target.position);

    let mut simulator = Simulator::new(house, start, *sim).map_err(|_| SkipReason::NoPath)?;
    let mut observations = vec![simulator.observe()];
    for &a in &actions.actions {
        match simulator.step(a) {
            Ok(obs) => observations.push(obs),
            Err(_) => return Err(SkipReason::NotObservable),
        }
    }
    if simulator.is_success(target) != Ok(true) {
        return Err(SkipReason::NotObservable);
    }
    let recommended_position = grid.center_unchecked(goal);
    Ok(Episode {
        id: String::new(),
        house_id: house.id().to_string(),
        split: None,
        initial_pose: start,
        target_category: target.category.clone(),
        target_object_id: target.id.clone(),
        target_position: target.position,
        recommended_cell: goal,
        recommended_position: [recommended_position.0, recommended_position.1],
        recommended_rotation: actions.final_rotation,
        path,
        actions,
        observations,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub houses: usize,
    pub scene_types: usize,
    pub rooms_per_house: f64,
    pub room_size_m2: f64,
    pub object_types_per_house: f64,
    pub objects_per_house: f64,
    pub object_types: usize,
    pub episodes: usize,
    pub target_categories: usize,
    pub actions_per_episode: f64,
    pub moves_per_episode: f64,
}

pub fn corpus_stats(houses: &[House], episodes: &[Episode]) -> StatsReport {
    let mut report = StatsReport::default();
    let nh = houses.len();
    if nh > 0 {
        let rooms: usize = houses.iter().map(|h| h.rooms().len()).sum();
        let room_area: f64 = houses
            .iter()
            .flat_map(|h| h.rooms())
            .map(|r| r.area_m2())
            .sum();
        let per_house_types: usize = houses
            .iter()
            .map(|h| {
                h.objects()
                    .iter()
                    .map(|o| o.category.as_str())
                    .collect::<HashSet<_>>()
                    .len()
            })
            .sum();
        let objects: usize = houses.iter().map(|h| h.objects().len()).sum();
        report.houses = nh;
        report.scene_types = houses
            .iter()
            .map(|h| h.scene_type())
            .collect::<BTreeSet<_>>()
            .len();
        report.rooms_per_house = rooms as f64 / nh as f64;
        report.room_size_m2 = if rooms > 0 { room_area / rooms as f64 } else { 0.0 };
        report.object_types_per_house = per_house_types as f64 / nh as f64;
        report.objects_per_house = objects as f64 / nh as f64;
        report.object_types = houses
            .iter()
            .flat_map(|h| h.objects())
            .map(|o| o.category.as_str())
            .collect::<HashSet<_>>()
            .len();
    }
    let ne = episodes.len();
    if ne > 0 {
        report.episodes = ne;
        report.target_categories = episodes
            .iter()
            .map(|e| e.target_category.as_str())
            .collect::<HashSet<_>>()
            .len();
        report.actions_per_episode =
            episodes.iter().map(|e| e.len()).sum::<usize>() as f64 / ne as f64;
        report.moves_per_episode =
            episodes.iter().map(|e| e.actions.move_count()).sum::<usize>() as f64 / ne as f64;
    }
    report
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub train: Vec<String>,
    pub valid: Vec<String>,
    pub test: Vec<String>,
}

/// Seeded house-level split; `valid + test` must not exceed the house count.
pub fn partition_houses(ids: &[String], valid: usize, test: usize, seed: u64) -> Option<Partition> {
    if valid + test > ids.len() {
        return None;
    }
    let mut sorted: Vec<String> = ids.to_vec();
    sorted.sort();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "partition"));
    sorted.shuffle(&mut rng);
    let test_ids = sorted.split_off(sorted.len() - test);
    let valid_ids = sorted.split_off(sorted.len() - valid);
    Some(Partition {
        train: sorted,
        valid: valid_ids,
        test: test_ids,
    })
}
