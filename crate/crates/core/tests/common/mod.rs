//! Oracles and fixtures shared by the integration and acceptance tests. The
//! oracles are written independently of the library's implementations.
#![allow(dead_code)]

use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::cmp::Reverse;

use objnav::scene::Rotation;
use objnav::{Cell, GridMap, House, ObjectInstance, Pose};
use objnav::bc::{self, PolicyParams, Sample, ACTIONS, FEATURE_DIM};
use objnav::Action;
use rand::Rng;

pub const DIRS: [(i32, i32); 4] = [(0, 1), (1, 0), (0, -1), (-1, 0)];

/// Random obstacle field restricted to the connected component of a random
/// open cell. Returns the grid and that component's cells.
pub fn random_connected_grid(rng: &mut impl Rng, max_side: u32) -> (GridMap, Vec<Cell>) {
    loop {
        let w = rng.gen_range(1..=max_side);
        let h = rng.gen_range(1..=max_side);
        let open_p: f64 = rng.gen_range(0.55..0.95);
        let open: Vec<Cell> = (0..h as i32)
            .flat_map(|r| (0..w as i32).map(move |c| Cell::new(c, r)))
            .filter(|_| rng.gen_bool(open_p))
            .collect();
        if open.is_empty() {
            continue;
        }
        let seed = open[rng.gen_range(0..open.len())];
        let set: std::collections::HashSet<Cell> = open.into_iter().collect();
        let mut comp = vec![seed];
        let mut seen = std::collections::HashSet::from([seed]);
        let mut i = 0;
        while i < comp.len() {
            let c = comp[i];
            i += 1;
            for (dc, dr) in DIRS {
                let n = Cell::new(c.col + dc, c.row + dr);
                if set.contains(&n) && seen.insert(n) {
                    comp.push(n);
                }
            }
        }
        let grid = GridMap::new(w, h, (0, 0), comp.clone()).unwrap();
        return (grid, comp);
    }
}

/// Unweighted BFS distance in moves.
pub fn bfs_distance(grid: &GridMap, from: Cell, to: Cell) -> Option<usize> {
    let mut dist: HashMap<Cell, usize> = HashMap::from([(from, 0)]);
    let mut queue = VecDeque::from([from]);
    while let Some(c) = queue.pop_front() {
        if c == to {
            return Some(dist[&c]);
        }
        for (dc, dr) in DIRS {
            let n = Cell::new(c.col + dc, c.row + dr);
            if grid.is_reachable(n) && !dist.contains_key(&n) {
                dist.insert(n, dist[&c] + 1);
                queue.push_back(n);
            }
        }
    }
    None
}

fn dir_index(r: Rotation) -> usize {
    match r {
        Rotation::North => 0,
        Rotation::East => 1,
        Rotation::South => 2,
        Rotation::West => 3,
    }
}

/// Dijkstra over (cell, heading) with an arbitrary ordered key. `step`
/// extends a key by one move from `heading` in direction `dir`.
fn state_dijkstra<K: Ord + Copy>(
    grid: &GridMap,
    start: Pose,
    goal: Cell,
    zero: K,
    step: impl Fn(K, usize, usize) -> K,
) -> Option<K> {
    let mut best: HashMap<(Cell, usize), K> = HashMap::new();
    let mut heap = BinaryHeap::new();
    let s = (start.cell, dir_index(start.rotation));
    best.insert(s, zero);
    heap.push(Reverse((zero, s.0.col, s.0.row, s.1)));
    while let Some(Reverse((k, col, row, d))) = heap.pop() {
        let c = Cell::new(col, row);
        if best.get(&(c, d)).is_some_and(|&b| k > b) {
            continue;
        }
        if c == goal {
            return Some(k);
        }
        for (nd, (dc, dr)) in DIRS.iter().enumerate() {
            let n = Cell::new(c.col + dc, c.row + dr);
            if !grid.is_reachable(n) {
                continue;
            }
            let nk = step(k, d, nd);
            if best.get(&(n, nd)).is_none_or(|&b| nk < b) {
                best.insert((n, nd), nk);
                heap.push(Reverse((nk, n.col, n.row, nd)));
            }
        }
    }
    None
}

/// Minimum turn-weighted cost: 1 per straight move, 2 per turning move.
pub fn min_turn_cost(grid: &GridMap, start: Pose, goal: Cell) -> Option<u32> {
    state_dijkstra(grid, start, goal, 0u32, |k, d, nd| k + if d == nd { 1 } else { 2 })
}

/// Minimum `(moves, turn-weighted cost)` in lexicographic order.
pub fn min_moves_then_cost(grid: &GridMap, start: Pose, goal: Cell) -> Option<(u32, u32)> {
    state_dijkstra(grid, start, goal, (0u32, 0u32), |k, d, nd| {
        (k.0 + 1, k.1 + if d == nd { 1 } else { 2 })
    })
}

/// Turn-weighted cost of an explicit cell path.
pub fn path_turn_cost(start: Rotation, cells: &[Cell]) -> u32 {
    let mut heading = dir_index(start);
    let mut cost = 0;
    for w in cells.windows(2) {
        let d = (w[1].col - w[0].col, w[1].row - w[0].row);
        let nd = DIRS.iter().position(|&x| x == d).expect("4-adjacent");
        cost += if nd == heading { 1 } else { 2 };
        heading = nd;
    }
    cost
}

/// Full-table LCS, the textbook recurrence.
pub fn lcs_table(a: &[String], b: &[String]) -> usize {
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            t[i][j] = if a[i - 1] == b[j - 1] {
                t[i - 1][j - 1] + 1
            } else {
                t[i - 1][j].max(t[i][j - 1])
            };
        }
    }
    t[a.len()][b.len()]
}

/// ROUGE-L F1 from precision and recall.
pub fn rouge_oracle(candidate: &[String], reference: &[String]) -> f64 {
    if candidate.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let lcs = lcs_table(candidate, reference) as f64;
    if lcs == 0.0 {
        return 0.0;
    }
    let p = lcs / candidate.len() as f64;
    let r = lcs / reference.len() as f64;
    2.0 * p * r / (p + r)
}

/// A single-room house over `grid` holding `objects`.
pub fn house_on(grid: GridMap, objects: Vec<ObjectInstance>) -> House {
    let (w, h) = (grid.width() as i32, grid.height() as i32);
    let room = objnav::Room {
        name: "room-0".into(),
        min_cell: Cell::new(0, 0),
        max_cell: Cell::new(w - 1, h - 1),
    };
    let category = objnav::taxonomy::category_of("bakery").unwrap();
    House::new("grid", "bakery", category, grid, vec![room], objects).unwrap()
}

/// Houses `seed..seed + n` with default generation parameters.
pub fn generated_houses(seed: u64, n: u64) -> Vec<House> {
    (seed..seed + n)
        .map(|s| objnav::generate_house(s, &Default::default()).unwrap())
        .collect()
}

/// Episodes for every house, concatenated in house order.
pub fn sampled_episodes(houses: &[House], per_house: usize, seed: u64) -> Vec<objnav::Episode> {
    houses
        .iter()
        .flat_map(|h| objnav::sample_episodes(h, per_house, seed, &Default::default()).unwrap().episodes)
        .collect()
}

pub fn house_index(houses: &[House]) -> HashMap<String, House> {
    houses.iter().map(|h| (h.id().to_string(), h.clone())).collect()
}

/// Max relative error between the analytic gradient and central differences
/// at h = 1e-5 for one random draw; also returns the batch size used.
pub fn gradient_check(rng: &mut impl Rng) -> (f64, usize) {
    let mut params = PolicyParams::zeros();
    for row in params.weights.iter_mut() {
        for w in row.iter_mut() {
            *w = rng.gen_range(-1.0..1.0);
        }
    }
    let n = rng.gen_range(1..12);
    let batch: Vec<Sample> = (0..n)
        .map(|_| {
            let mut x = [0.0; FEATURE_DIM];
            for v in x.iter_mut() {
                *v = rng.gen_range(-2.0..2.0);
            }
            Sample { x, action: Action::ALL[rng.gen_range(0..ACTIONS)] }
        })
        .collect();
    let l2 = rng.gen_range(0.0..0.1);
    let refs: Vec<&Sample> = batch.iter().collect();
    let (_, grad) = bc::nll_loss(&params, &refs, l2).unwrap();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for a in 0..ACTIONS {
        for j in 0..FEATURE_DIM {
            let mut p = params.clone();
            p.weights[a][j] += h;
            let up = bc::nll_loss(&p, &refs, l2).unwrap().0;
            p.weights[a][j] -= 2.0 * h;
            let down = bc::nll_loss(&p, &refs, l2).unwrap().0;
            let numeric = (up - down) / (2.0 * h);
            let rel = (numeric - grad[a][j]).abs() / numeric.abs().max(grad[a][j].abs()).max(1e-3);
            worst = worst.max(rel);
        }
    }
    (worst, n)
}

