//! Agent interface, baseline agents, and SR/SPL/SEL evaluation.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver};
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::Action;
use crate::bc::{features, PolicyParams};
use crate::episode::Episode;
use crate::planner::rotation_actions;
use crate::scene::{Cell, House, Pose, Rotation, CELL_SIZE_M};
use crate::sim::{Observation, SimConfig, Simulator, TerminationCause};
use crate::trace::{HISTORY_STEPS, HISTORY_VIEWS};
use crate::util::derive_seed;

/// What the agent is told about its goal (the episode-specific block).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskInfo {
    pub target_category: String,
    pub target_object_id: String,
    pub target_position: [f64; 2],
    pub recommended_cell: Cell,
    pub recommended_position: [f64; 2],
    pub recommended_rotation: Rotation,
}

impl TaskInfo {
    pub fn from_episode(ep: &Episode) -> Self {
        TaskInfo {
            target_category: ep.target_category.clone(),
            target_object_id: ep.target_object_id.clone(),
            target_position: ep.target_position,
            recommended_cell: ep.recommended_cell,
            recommended_position: ep.recommended_position,
            recommended_rotation: ep.recommended_rotation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub pose: Pose,
    pub position_m: [f64; 2],
    pub action: Action,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub view: Option<Observation>,
}

/// Everything an agent may look at before choosing an action.
#[derive(Debug, Clone, Serialize)]
pub struct AgentContext<'a> {
    pub step: u32,
    pub task: &'a TaskInfo,
    pub observation: &'a Observation,
    /// Oldest first, at most eight entries; the last four carry views.
    pub history: &'a [HistoryEntry],
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AgentError {
    #[error("agent replied {0:?}, which is not an action")]
    InvalidAction(String),
    #[error("agent process: {0}")]
    Process(String),
    #[error("agent closed its output")]
    Closed,
}

pub trait Agent {
    fn act(&mut self, ctx: &AgentContext<'_>) -> Result<Action, AgentError>;
}

/// Builds a fresh agent per episode so no state leaks between episodes.
pub trait AgentFactory: Sync {
    fn name(&self) -> String;
    fn create(&self, episode: &Episode) -> Result<Box<dyn Agent>, AgentError>;
}

pub struct RandomAgent {
    rng: ChaCha8Rng,
}

impl RandomAgent {
    pub fn new(seed: u64) -> Self {
        RandomAgent {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Agent for RandomAgent {
    fn act(&mut self, _: &AgentContext<'_>) -> Result<Action, AgentError> {
        Ok(Action::ALL[self.rng.gen_range(0..4)])
    }
}

pub struct RandomFactory {
    pub seed: u64,
}

impl AgentFactory for RandomFactory {
    fn name(&self) -> String {
        "random".into()
    }
    fn create(&self, ep: &Episode) -> Result<Box<dyn Agent>, AgentError> {
        Ok(Box::new(RandomAgent::new(derive_seed(self.seed, &ep.id))))
    }
}

/// Replays the stored demonstration.
pub struct OracleAgent {
    actions: Vec<Action>,
    next: usize,
}

impl OracleAgent {
    pub fn new(ep: &Episode) -> Self {
        OracleAgent {
            actions: ep.actions.actions.clone(),
            next: 0,
        }
    }
}

impl Agent for OracleAgent {
    fn act(&mut self, _: &AgentContext<'_>) -> Result<Action, AgentError> {
        let a = self.actions.get(self.next).copied().unwrap_or(Action::Done);
        self.next += 1;
        Ok(a)
    }
}

pub struct OracleFactory;

impl AgentFactory for OracleFactory {
    fn name(&self) -> String {
        "oracle".into()
    }
    fn create(&self, ep: &Episode) -> Result<Box<dyn Agent>, AgentError> {
        Ok(Box::new(OracleAgent::new(ep)))
    }
}

/// Memoryless: keeps going while that reduces the Manhattan distance to the
/// recommended cell, otherwise turns toward the axis with more remaining
/// distance; at the recommended cell it turns to the recommended rotation and
/// stops.
pub struct GreedyAgent;

impl Agent for GreedyAgent {
    fn act(&mut self, ctx: &AgentContext<'_>) -> Result<Action, AgentError> {
        Ok(greedy_action(ctx.observation, ctx.task))
    }
}

pub fn greedy_action(obs: &Observation, task: &TaskInfo) -> Action {
    let pose = obs.pose;
    let goal = task.recommended_cell;
    if pose.cell == goal {
        return match rotation_actions(pose.rotation, task.recommended_rotation).first() {
            Some(&a) => a,
            None => Action::Done,
        };
    }
    let (dc, dr) = (goal.col - pose.cell.col, goal.row - pose.cell.row);
    let reduces = |r: Rotation| {
        let (x, y) = r.delta();
        x * dc + y * dr > 0
    };
    if reduces(pose.rotation) && !obs.obstacle_ahead {
        return Action::MoveAhead;
    }
    let horizontal = if dc > 0 { Rotation::East } else { Rotation::West };
    let vertical = if dr > 0 { Rotation::North } else { Rotation::South };
    let mut candidates = if dc.abs() >= dr.abs() {
        vec![horizontal, vertical]
    } else {
        vec![vertical, horizontal]
    };
    candidates.retain(|&r| reduces(r) && r != pose.rotation);
    match candidates.first() {
        Some(&r) => rotation_actions(pose.rotation, r)[0],
        None => Action::RotateRight,
    }
}

pub struct GreedyFactory;

impl AgentFactory for GreedyFactory {
    fn name(&self) -> String {
        "greedy".into()
    }
    fn create(&self, _: &Episode) -> Result<Box<dyn Agent>, AgentError> {
        Ok(Box::new(GreedyAgent))
    }
}

pub struct PolicyAgent {
    params: PolicyParams,
    prev: Option<Action>,
}

impl PolicyAgent {
    pub fn new(params: PolicyParams, _episode: &Episode) -> Self {
        PolicyAgent { params, prev: None }
    }
}

impl Agent for PolicyAgent {
    fn act(&mut self, ctx: &AgentContext<'_>) -> Result<Action, AgentError> {
        let x = features(
            ctx.observation,
            Pose::new(ctx.task.recommended_cell, ctx.task.recommended_rotation),
            &ctx.task.target_object_id,
            self.prev,
        );
        let a = self.params.act(&x);
        self.prev = Some(a);
        Ok(a)
    }
}

pub struct PolicyFactory {
    pub params: PolicyParams,
}

impl AgentFactory for PolicyFactory {
    fn name(&self) -> String {
        "policy".into()
    }
    fn create(&self, ep: &Episode) -> Result<Box<dyn Agent>, AgentError> {
        Ok(Box::new(PolicyAgent::new(self.params.clone(), ep)))
    }
}

/// One child process per episode speaking line-delimited JSON on stdio.
/// A reply slower than `timeout` counts as RotateRight.
pub struct ExternalAgent {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    timeout: Duration,
}

impl ExternalAgent {
    pub fn spawn(program: &str, args: &[String], timeout: Duration) -> Result<Self, AgentError> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| AgentError::Process(format!("{program}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(ExternalAgent {
            child,
            stdin,
            lines: rx,
            timeout,
        })
    }
}

impl Agent for ExternalAgent {
    fn act(&mut self, ctx: &AgentContext<'_>) -> Result<Action, AgentError> {
        let mut line = serde_json::to_string(ctx).expect("context serializes");
        line.push('\n');
        self.stdin
            .write_all(line.as_bytes())
            .and_then(|_| self.stdin.flush())
            .map_err(|e| AgentError::Process(e.to_string()))?;
        match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(reply)) => reply
                .trim()
                .parse()
                .map_err(|_| AgentError::InvalidAction(reply.trim().to_string())),
            Ok(Err(e)) => Err(AgentError::Process(e.to_string())),
            Err(mpsc::RecvTimeoutError::Timeout) => Ok(Action::RotateRight),
            Err(mpsc::RecvTimeoutError::Disconnected) => Err(AgentError::Closed),
        }
    }
}

impl Drop for ExternalAgent {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

pub struct ExternalFactory {
    pub program: String,
    pub args: Vec<String>,
    pub timeout: Duration,
}

impl AgentFactory for ExternalFactory {
    fn name(&self) -> String {
        format!("external:{}", self.program)
    }
    fn create(&self, _: &Episode) -> Result<Box<dyn Agent>, AgentError> {
        Ok(Box::new(ExternalAgent::spawn(&self.program, &self.args, self.timeout)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Termination {
    DoneIssued,
    StepLimit,
    ProtocolViolation,
}

impl From<TerminationCause> for Termination {
    fn from(c: TerminationCause) -> Self {
        match c {
            TerminationCause::DoneIssued => Termination::DoneIssued,
            TerminationCause::StepLimit => Termination::StepLimit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// Pose before each action, then the final pose.
    pub poses: Vec<Pose>,
    pub actions: Vec<Action>,
    pub termination: Termination,
    pub success: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Trajectory {
    /// Meters actually traveled; blocked moves do not count.
    pub fn path_length_m(&self) -> f64 {
        self.poses
            .windows(2)
            .filter(|w| w[0].cell != w[1].cell)
            .count() as f64
            * CELL_SIZE_M
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut out: Vec<Cell> = Vec::new();
        for p in &self.poses {
            if out.last() != Some(&p.cell) {
                out.push(p.cell);
            }
        }
        out
    }
}

/// Runs one episode to termination with an already-built agent.
pub fn run_episode(agent: &mut dyn Agent, house: &House, ep: &Episode, sim: &SimConfig) -> Trajectory {
    let task = TaskInfo::from_episode(ep);
    let fail = |poses: Vec<Pose>, actions: Vec<Action>, msg: String| Trajectory {
        poses,
        actions,
        termination: Termination::ProtocolViolation,
        success: false,
        error: Some(msg),
    };
    let mut simulator = match Simulator::new(house, ep.initial_pose, *sim) {
        Ok(s) => s,
        Err(e) => return fail(vec![ep.initial_pose], Vec::new(), e.to_string()),
    };
    let mut obs = simulator.observe();
    let mut poses = vec![obs.pose];
    let mut actions = Vec::new();
    let mut history: Vec<HistoryEntry> = Vec::new();
    loop {
        let ctx = AgentContext {
            step: simulator.state().steps_taken,
            task: &task,
            observation: &obs,
            history: &history,
        };
        let action = match agent.act(&ctx) {
            Ok(a) => a,
            Err(e) => return fail(poses, actions, e.to_string()),
        };
        let next = simulator.step(action).expect("loop stops at termination");
        history.push(HistoryEntry {
            pose: obs.pose,
            position_m: obs.position_m,
            action,
            view: Some(obs),
        });
        if history.len() > HISTORY_STEPS {
            history.remove(0);
        }
        let n = history.len();
        if n > HISTORY_VIEWS {
            history[n - HISTORY_VIEWS - 1].view = None;
        }
        actions.push(action);
        poses.push(next.pose);
        obs = next;
        if let Some(cause) = simulator.state().termination {
            let target = house.object(&ep.target_object_id);
            let success = match target {
                Some(t) => simulator.is_success(t).unwrap_or(false),
                None => false,
            };
            return Trajectory {
                poses,
                actions,
                termination: cause.into(),
                success,
                error: None,
            };
        }
    }
}

pub fn spl_term(success: bool, shortest: f64, taken: f64) -> f64 {
    if !success {
        return 0.0;
    }
    let m = shortest.max(taken);
    if m == 0.0 {
        1.0
    } else {
        shortest / m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub episode_id: String,
    pub house_id: String,
    pub split: Option<String>,
    pub success: bool,
    pub l_path_m: f64,
    pub p_path_m: f64,
    pub l_actions: usize,
    pub p_actions: usize,
    pub termination_cause: Termination,
    pub trajectory: Trajectory,
}

impl EpisodeOutcome {
    pub fn spl(&self) -> f64 {
        spl_term(self.success, self.l_path_m, self.p_path_m)
    }

    pub fn sel(&self) -> f64 {
        spl_term(self.success, self.l_actions as f64, self.p_actions as f64)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub episodes: usize,
    pub sr: f64,
    pub spl: f64,
    pub sel: f64,
}

impl Aggregate {
    pub fn of<'a>(outcomes: impl IntoIterator<Item = &'a EpisodeOutcome>) -> Self {
        let (mut n, mut s, mut p, mut e) = (0usize, 0.0, 0.0, 0.0);
        for o in outcomes {
            n += 1;
            s += o.success as u8 as f64;
            p += o.spl();
            e += o.sel();
        }
        if n == 0 {
            return Aggregate::default();
        }
        let n_f = n as f64;
        Aggregate {
            episodes: n,
            sr: s / n_f,
            spl: p / n_f,
            sel: e / n_f,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub agent: String,
    pub overall: Aggregate,
    pub splits: BTreeMap<String, Aggregate>,
    pub episodes: Vec<EpisodeOutcome>,
}

impl EvalReport {
    pub fn from_outcomes(agent: String, episodes: Vec<EpisodeOutcome>) -> Self {
        let mut by_split: BTreeMap<String, Vec<&EpisodeOutcome>> = BTreeMap::new();
        for o in &episodes {
            if let Some(s) = &o.split {
                by_split.entry(s.clone()).or_default().push(o);
            }
        }
        let splits = by_split
            .into_iter()
            .map(|(k, v)| (k, Aggregate::of(v)))
            .collect();
        EvalReport {
            agent,
            overall: Aggregate::of(&episodes),
            splits,
            episodes,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "episode_id,house_id,split,success,l_path_m,p_path_m,l_actions,p_actions,termination_cause\n",
        );
        for o in &self.episodes {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{:?}\n",
                o.episode_id,
                o.house_id,
                o.split.as_deref().unwrap_or(""),
                o.success as u8,
                o.l_path_m,
                o.p_path_m,
                o.l_actions,
                o.p_actions,
                o.termination_cause
            ));
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub sim: SimConfig,
    /// Worker threads; 0 means available parallelism.
    pub jobs: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            sim: SimConfig::default(),
            jobs: 0,
        }
    }
}

pub fn evaluate_episode(factory: &dyn AgentFactory, house: Option<&House>, ep: &Episode, sim: &SimConfig) -> EpisodeOutcome {
    let trajectory = match (house, factory.create(ep)) {
        (None, _) => Trajectory {
            poses: vec![ep.initial_pose],
            actions: Vec::new(),
            termination: Termination::ProtocolViolation,
            success: false,
            error: Some(format!("house {} not loaded", ep.house_id)),
        },
        (Some(_), Err(e)) => Trajectory {
            poses: vec![ep.initial_pose],
            actions: Vec::new(),
            termination: Termination::ProtocolViolation,
            success: false,
            error: Some(e.to_string()),
        },
        (Some(h), Ok(mut agent)) => run_episode(agent.as_mut(), h, ep, sim),
    };
    EpisodeOutcome {
        episode_id: ep.id.clone(),
        house_id: ep.house_id.clone(),
        split: ep.split.clone(),
        success: trajectory.success,
        l_path_m: ep.demo_length_m(),
        p_path_m: trajectory.path_length_m(),
        l_actions: ep.len(),
        p_actions: trajectory.actions.len(),
        termination_cause: trajectory.termination,
        trajectory,
    }
}

/// Evaluates every episode (in parallel, one agent per episode); outcomes keep
/// the input order.
pub fn evaluate(
    factory: &dyn AgentFactory,
    houses: &HashMap<String, House>,
    episodes: &[Episode],
    config: &EvalConfig,
) -> EvalReport {
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .expect("thread pool");
    let outcomes = pool.install(|| {
        episodes
            .par_iter()
            .map(|ep| evaluate_episode(factory, houses.get(&ep.house_id), ep, &config.sim))
            .collect()
    });
    EvalReport::from_outcomes(factory.name(), outcomes)
}
