//! Linear softmax behavior cloning over symbolic state features.

use std::collections::HashSet;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::Action;
use crate::episode::Episode;
use crate::scene::Pose;
use crate::sim::Observation;

pub const ACTIONS: usize = 4;
pub const FEATURE_DIM: usize = 30;
/// Index of the constant feature.
pub const BIAS: usize = FEATURE_DIM - 1;
/// Displacement features are clamped to this many cells.
pub const DISPLACEMENT_CLAMP: f64 = 8.0;
pub const DIVERGENCE_LOSS: f64 = 1e6;

pub type Features = [f64; FEATURE_DIM];

/// Whether the agent-frame window marks `(forward, side)` as blocked. Cells
/// outside the window count as open.
fn window_blocked(obs: &Observation, forward: i32, side: i32) -> bool {
    let h = (obs.egocentric_grid.len() / 2) as i32;
    if forward.abs() > h || side.abs() > h {
        return false;
    }
    obs.egocentric_grid[(h - forward) as usize].as_bytes()[(h + side) as usize] == b'#'
}

/// Whether the straight run of `len` cells along the agent-frame axis
/// `(df, ds)` is open in the window.
fn run_open(obs: &Observation, df: i32, ds: i32, len: i32) -> bool {
    (1..=len).all(|k| !window_blocked(obs, k * df, k * ds))
}

/// Feature layout:
///
/// | index | feature |
/// |---|---|
/// | 0, 1 | forward and rightward displacement to the recommended cell, in cells (agent frame, clamped) |
/// | 2..6 | heading one-hot (N, E, S, W) |
/// | 6 | obstacle ahead |
/// | 7 | target visible |
/// | 8..13 | previous action one-hot (four actions, then none) |
/// | 13 | target ahead, run ahead open in the view |
/// | 14, 15 | target ahead, run ahead blocked, target to the right (or straight) / left |
/// | 16, 17 | target level with the agent, to the right / left |
/// | 18, 19 | target behind, to the right (or straight behind) / left |
/// | 20 | at the recommended pose |
/// | 21, 22 | at the recommended cell, turn right (or about) / left to its rotation |
/// | 23 | run toward the target's side open in the view |
/// | 24, 25 | cell to the left / right blocked |
/// | 26 | target behind right after a rotation |
/// | 27, 28 | target behind / ahead but blocked, with the cell on the target's side blocked |
/// | 29 | bias |
pub fn features(obs: &Observation, recommended: Pose, target_id: &str, prev: Option<Action>) -> Features {
    let mut x = [0.0; FEATURE_DIM];
    let goal = recommended.cell;
    let (dc, dr) = (goal.col - obs.pose.cell.col, goal.row - obs.pose.cell.row);
    let (fx, fy) = obs.pose.rotation.delta();
    let (rx, ry) = obs.pose.rotation.right().delta();
    let forward = dc * fx + dr * fy;
    let right = dc * rx + dr * ry;
    x[0] = (forward as f64).clamp(-DISPLACEMENT_CLAMP, DISPLACEMENT_CLAMP);
    x[1] = (right as f64).clamp(-DISPLACEMENT_CLAMP, DISPLACEMENT_CLAMP);
    x[2 + obs.pose.rotation.quarter_index()] = 1.0;
    x[6] = obs.obstacle_ahead as u8 as f64;
    x[7] = obs.sees(target_id) as u8 as f64;
    x[8 + prev.map_or(4, Action::index)] = 1.0;
    let slot = if obs.pose.cell == goal {
        match obs.pose.rotation.quarter_turns_to(recommended.rotation) {
            0 => 20,
            3 => 22,
            _ => 21,
        }
    } else if forward > 0 && !obs.obstacle_ahead && run_open(obs, 1, 0, forward) {
        13
    } else if forward > 0 {
        if right >= 0 { 14 } else { 15 }
    } else if forward == 0 {
        if right > 0 { 16 } else { 17 }
    } else if right >= 0 {
        18
    } else {
        19
    };
    x[slot] = 1.0;
    x[23] = (right != 0 && run_open(obs, 0, right.signum(), right.abs())) as u8 as f64;
    x[24] = window_blocked(obs, 0, -1) as u8 as f64;
    x[25] = window_blocked(obs, 0, 1) as u8 as f64;
    x[26] = (forward < 0 && prev.is_some_and(Action::is_rotation)) as u8 as f64;
    let side_blocked = if right >= 0 { x[25] } else { x[24] };
    x[27] = if forward < 0 { side_blocked } else { 0.0 };
    x[28] = if matches!(slot, 14 | 15) { side_blocked } else { 0.0 };
    x[BIAS] = 1.0;
    x
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: Features,
    pub action: Action,
}

/// One sample per demonstrated step. With `selection`, only the listed
/// `(episode_id, step_index)` pairs are kept.
pub fn samples_from_episodes(episodes: &[Episode], selection: Option<&HashSet<(String, usize)>>) -> Vec<Sample> {
    let mut out = Vec::new();
    for ep in episodes {
        for (t, &a) in ep.actions.actions.iter().enumerate() {
            if let Some(sel) = selection {
                if !sel.contains(&(ep.id.clone(), t)) {
                    continue;
                }
            }
            let prev = t.checked_sub(1).map(|p| ep.actions.actions[p]);
            out.push(Sample {
                x: features(
                    &ep.observations[t],
                    Pose::new(ep.recommended_cell, ep.recommended_rotation),
                    &ep.target_object_id,
                    prev,
                ),
                action: a,
            });
        }
    }
    out
}

/// Row-major 4 x FEATURE_DIM weights, one row per action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub feature_dim: usize,
    pub actions: Vec<Action>,
    pub weights: Vec<Vec<f64>>,
}

impl Default for PolicyParams {
    fn default() -> Self {
        PolicyParams::zeros()
    }
}

#[derive(Debug, Error)]
pub enum BcError {
    #[error("batch is empty")]
    EmptyBatch,
    #[error("sample {0} has a non-finite feature")]
    NonFinite(usize),
    #[error("learning rate must be positive, got {0}")]
    BadLearningRate(f64),
    #[error("batch size must be at least 1")]
    BadBatchSize,
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64, curve: Vec<f64> },
    #[error("params declare dimension {declared}, expected {expected}x{FEATURE_DIM}")]
    BadShape { declared: usize, expected: usize },
    #[error("params contain a non-finite weight")]
    NonFiniteParams,
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl PolicyParams {
    pub fn zeros() -> Self {
        PolicyParams {
            feature_dim: FEATURE_DIM,
            actions: Action::ALL.to_vec(),
            weights: vec![vec![0.0; FEATURE_DIM]; ACTIONS],
        }
    }

    pub fn validate(&self) -> Result<(), BcError> {
        if self.feature_dim != FEATURE_DIM
            || self.actions != Action::ALL
            || self.weights.len() != ACTIONS
            || self.weights.iter().any(|r| r.len() != FEATURE_DIM)
        {
            return Err(BcError::BadShape {
                declared: self.feature_dim,
                expected: ACTIONS,
            });
        }
        if self.weights.iter().flatten().any(|w| !w.is_finite()) {
            return Err(BcError::NonFiniteParams);
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, BcError> {
        let p: PolicyParams = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("params serialize");
        s.push('\n');
        s
    }

    pub fn logits(&self, x: &Features) -> [f64; ACTIONS] {
        let mut z = [0.0; ACTIONS];
        for (k, row) in self.weights.iter().enumerate() {
            z[k] = row.iter().zip(x).map(|(w, v)| w * v).sum();
        }
        z
    }

    pub fn probabilities(&self, x: &Features) -> [f64; ACTIONS] {
        softmax(&self.logits(x))
    }

    /// Argmax action; ties go to the lowest action index.
    pub fn act(&self, x: &Features) -> Action {
        argmax_action(&self.logits(x))
    }
}

pub fn argmax_action(z: &[f64; ACTIONS]) -> Action {
    let mut best = 0;
    for k in 1..ACTIONS {
        if z[k] > z[best] {
            best = k;
        }
    }
    Action::ALL[best]
}

fn log_sum_exp(z: &[f64; ACTIONS]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

pub fn softmax(z: &[f64; ACTIONS]) -> [f64; ACTIONS] {
    let lse = log_sum_exp(z);
    let mut p = [0.0; ACTIONS];
    for k in 0..ACTIONS {
        p[k] = (z[k] - lse).exp();
    }
    p
}

/// Mean negative log-likelihood plus `l2/2 * |W|^2`, with its exact gradient.
pub fn nll_loss(params: &PolicyParams, batch: &[&Sample], l2: f64) -> Result<(f64, Vec<Vec<f64>>), BcError> {
    if batch.is_empty() {
        return Err(BcError::EmptyBatch);
    }
    let n = batch.len() as f64;
    let mut grad = vec![vec![0.0; FEATURE_DIM]; ACTIONS];
    let mut loss = 0.0;
    for (i, s) in batch.iter().enumerate() {
        if s.x.iter().any(|v| !v.is_finite()) {
            return Err(BcError::NonFinite(i));
        }
        let z = params.logits(&s.x);
        let lse = log_sum_exp(&z);
        let a = s.action.index();
        loss += lse - z[a];
        for k in 0..ACTIONS {
            let coef = (z[k] - lse).exp() - if k == a { 1.0 } else { 0.0 };
            for (g, v) in grad[k].iter_mut().zip(&s.x) {
                *g += coef * v / n;
            }
        }
    }
    loss /= n;
    if l2 != 0.0 {
        let mut sq = 0.0;
        for (grow, wrow) in grad.iter_mut().zip(&params.weights) {
            for (g, w) in grow.iter_mut().zip(wrow) {
                *g += l2 * w;
                sq += w * w;
            }
        }
        loss += 0.5 * l2 * sq;
    }
    Ok((loss, grad))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub l2_penalty: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            batch_size: 64,
            epochs: 100,
            seed: 0,
            l2_penalty: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: PolicyParams,
    /// Full-corpus loss after each epoch; entry 0 is the initial loss.
    pub loss_curve: Vec<f64>,
}

impl TrainOutcome {
    pub fn loss_csv(&self) -> String {
        let mut s = String::from("epoch,loss\n");
        for (e, l) in self.loss_curve.iter().enumerate() {
            s.push_str(&format!("{e},{l}\n"));
        }
        s
    }

    pub fn write_loss_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(self.loss_csv().as_bytes())
    }
}

/// Seeded mini-batch gradient descent from zero weights.
pub fn train(samples: &[Sample], config: &TrainConfig) -> Result<TrainOutcome, BcError> {
    if samples.is_empty() {
        return Err(BcError::EmptyBatch);
    }
    if !(config.learning_rate > 0.0) {
        return Err(BcError::BadLearningRate(config.learning_rate));
    }
    if config.batch_size == 0 {
        return Err(BcError::BadBatchSize);
    }
    let all: Vec<&Sample> = samples.iter().collect();
    let mut params = PolicyParams::zeros();
    let mut curve = vec![nll_loss(&params, &all, config.l2_penalty)?.0];
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &samples[i]).collect();
            let (_, grad) = nll_loss(&params, &batch, config.l2_penalty)?;
            for (wrow, grow) in params.weights.iter_mut().zip(&grad) {
                for (w, g) in wrow.iter_mut().zip(grow) {
                    *w -= config.learning_rate * g;
                }
            }
        }
        let loss = nll_loss(&params, &all, config.l2_penalty)?.0;
        curve.push(loss);
        if !loss.is_finite() || loss > DIVERGENCE_LOSS {
            return Err(BcError::Diverged { epoch, loss, curve });
        }
    }
    Ok(TrainOutcome {
        params,
        loss_curve: curve,
    })
}

pub fn accuracy(params: &PolicyParams, samples: &[Sample]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let hits = samples.iter().filter(|s| params.act(&s.x) == s.action).count();
    hits as f64 / samples.len() as f64
}

/// Rolls the greedy policy out in the simulator from the episode's start.
pub fn run_policy(
    params: &PolicyParams,
    house: &crate::scene::House,
    episode: &Episode,
    sim: &crate::sim::SimConfig,
) -> crate::eval::Trajectory {
    let mut agent = crate::eval::PolicyAgent::new(params.clone(), episode);
    crate::eval::run_episode(&mut agent, house, episode, sim)
}
