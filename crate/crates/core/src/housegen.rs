//! Procedural multi-room houses for desk-scale experiments.
//!
//! Rooms come from recursive rectangle splitting with one-cell walls; every
//! split wall gets exactly one door cell. Furniture blocks are carved out of
//! room interiors only while the reachable set stays 4-connected, and objects
//! are scattered on furniture cells.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::{Cell, GridMap, House, HouseError, ObjectInstance, Room, CELL_SIZE_M};
use crate::taxonomy::{self, SceneCategory};

/// Inclusive height band of observable targets, in meters.
pub const TARGET_HEIGHT_RANGE_M: (f64, f64) = (0.3, 2.0);

const MIN_ROOM_SIDE: i32 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationSpec {
    pub room_count: u32,
    /// Target area of each room in cells, inclusive.
    pub cells_per_room_range: (u32, u32),
    /// Objects per room cell.
    pub object_density: f64,
    /// Object category vocabulary; empty selects the built-in vocabulary.
    pub category_pool: Vec<String>,
    pub height_range_m: (f64, f64),
    /// Fraction of room cells turned into furniture.
    pub furniture_fraction: f64,
    pub opaque_probability: f64,
    /// Distinct categories per object placed.
    pub category_ratio: f64,
    /// Pin the scene type instead of drawing it from the taxonomy.
    pub scene_type: Option<String>,
}

impl Default for GenerationSpec {
    fn default() -> Self {
        GenerationSpec {
            room_count: 3,
            cells_per_room_range: (64, 144),
            object_density: 0.376,
            category_pool: Vec::new(),
            height_range_m: (0.05, 2.6),
            furniture_fraction: 0.15,
            opaque_probability: 0.35,
            category_ratio: 0.29,
            scene_type: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error("invalid generation spec: {0}")]
    InvalidSpec(String),
    #[error("rooms do not fit: {0}")]
    Infeasible(String),
    #[error(transparent)]
    House(#[from] HouseError),
}

#[derive(Debug, Clone, Copy)]
struct Rect {
    c0: i32,
    r0: i32,
    c1: i32,
    r1: i32,
}

impl Rect {
    fn width(&self) -> i32 {
        self.c1 - self.c0 + 1
    }
    fn height(&self) -> i32 {
        self.r1 - self.r0 + 1
    }
    fn contains(&self, c: Cell) -> bool {
        c.col >= self.c0 && c.col <= self.c1 && c.row >= self.r0 && c.row <= self.r1
    }
}

/// A wall line produced by one split: cells `(fixed, t)` for vertical walls
/// or `(t, fixed)` for horizontal ones, `t` in `lo..=hi`.
#[derive(Debug, Clone, Copy)]
struct SplitWall {
    vertical: bool,
    fixed: i32,
    lo: i32,
    hi: i32,
}

/// Generates a house; output is a pure function of `(seed, spec)`.
pub fn generate_house(seed: u64, spec: &GenerationSpec) -> Result<House, GenerationError> {
    validate(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let (category, scene_type) = match &spec.scene_type {
        Some(t) => {
            let c = taxonomy::category_of(t)
                .ok_or_else(|| GenerationError::InvalidSpec(format!("unknown scene type {t:?}")))?;
            (c, t.clone())
        }
        None => {
            let all: Vec<(SceneCategory, &str)> = taxonomy::all_scene_types().collect();
            let (c, t) = all[rng.gen_range(0..all.len())];
            (c, t.to_string())
        }
    };

    let n = spec.room_count as usize;
    let (lo, hi) = spec.cells_per_room_range;
    let areas: Vec<u32> = (0..n).map(|_| rng.gen_range(lo..=hi)).collect();
    let total: f64 = areas.iter().map(|&a| a as f64).sum();
    let wall_cells = (n as f64 - 1.0) * (total / n as f64).sqrt();
    let aspect: f64 = rng.gen_range(0.75..1.35);
    let interior = total + wall_cells;
    let w = ((interior * aspect).sqrt().round() as i32).max(MIN_ROOM_SIDE);
    let h = ((interior / w as f64).round() as i32).max(MIN_ROOM_SIDE);

    // One-cell wall ring around the interior.
    let outer = Rect {
        c0: 1,
        r0: 1,
        c1: w,
        r1: h,
    };
    let mut rects = Vec::new();
    let mut walls = Vec::new();
    split(outer, &areas, &mut rng, &mut rects, &mut walls)?;

    let width = (w + 2) as u32;
    let height = (h + 2) as u32;
    let idx = |c: Cell| (c.row as usize) * width as usize + c.col as usize;
    let mut reachable = vec![false; width as usize * height as usize];
    for r in &rects {
        for row in r.r0..=r.r1 {
            for col in r.c0..=r.c1 {
                reachable[idx(Cell::new(col, row))] = true;
            }
        }
    }

    // Doors: both neighbors across the wall must be room cells.
    let mut protected = vec![false; reachable.len()];
    let mut doors = Vec::new();
    for wall in &walls {
        let candidates: Vec<(Cell, Cell, Cell)> = (wall.lo..=wall.hi)
            .map(|t| {
                if wall.vertical {
                    (
                        Cell::new(wall.fixed, t),
                        Cell::new(wall.fixed - 1, t),
                        Cell::new(wall.fixed + 1, t),
                    )
                } else {
                    (
                        Cell::new(t, wall.fixed),
                        Cell::new(t, wall.fixed - 1),
                        Cell::new(t, wall.fixed + 1),
                    )
                }
            })
            .filter(|(_, a, b)| reachable[idx(*a)] && reachable[idx(*b)])
            .collect();
        let &(door, a, b) = candidates
            .choose(&mut rng)
            .ok_or_else(|| GenerationError::Infeasible("no room for a door".into()))?;
        doors.push(door);
        for c in [door, a, b] {
            protected[idx(c)] = true;
        }
    }
    for d in &doors {
        reachable[idx(*d)] = true;
    }

    // Furniture.
    let mut furniture: Vec<Cell> = Vec::new();
    let mut reachable_count = reachable.iter().filter(|&&r| r).count();
    for r in &rects {
        let area = (r.width() * r.height()) as f64;
        let target = (area * spec.furniture_fraction).round() as usize;
        let mut placed = 0usize;
        let mut attempts = 0;
        while placed < target && attempts < 400 {
            attempts += 1;
            let (pw, ph) = [(1, 1), (2, 1), (1, 2), (2, 2)][rng.gen_range(0..4)];
            if pw > r.width() || ph > r.height() {
                continue;
            }
            let along_wall = rng.gen_bool(0.7);
            let (c0, r0) = if along_wall {
                match rng.gen_range(0..4) {
                    0 => (rng.gen_range(r.c0..=r.c1 - pw + 1), r.r0),
                    1 => (rng.gen_range(r.c0..=r.c1 - pw + 1), r.r1 - ph + 1),
                    2 => (r.c0, rng.gen_range(r.r0..=r.r1 - ph + 1)),
                    _ => (r.c1 - pw + 1, rng.gen_range(r.r0..=r.r1 - ph + 1)),
                }
            } else {
                (
                    rng.gen_range(r.c0..=r.c1 - pw + 1),
                    rng.gen_range(r.r0..=r.r1 - ph + 1),
                )
            };
            let piece: Vec<Cell> = (0..ph)
                .flat_map(|dr| (0..pw).map(move |dc| Cell::new(c0 + dc, r0 + dr)))
                .collect();
            if piece
                .iter()
                .any(|&c| !r.contains(c) || !reachable[idx(c)] || protected[idx(c)])
            {
                continue;
            }
            for &c in &piece {
                reachable[idx(c)] = false;
            }
            if connected_count(&reachable, width, height) == reachable_count - piece.len() {
                reachable_count -= piece.len();
                placed += piece.len();
                furniture.extend(piece);
            } else {
                for &c in &piece {
                    reachable[idx(c)] = true;
                }
            }
        }
    }
    furniture.sort_by_key(|c| (c.row, c.col));

    let room_area: u64 = rects.iter().map(|r| (r.width() * r.height()) as u64).sum();
    let object_count = ((room_area as f64 * spec.object_density).round() as usize).max(1);
    let vocabulary = if spec.category_pool.is_empty() {
        builtin_vocabulary()
    } else {
        spec.category_pool.clone()
    };
    let type_count = ((object_count as f64 * spec.category_ratio).round() as usize)
        .clamp(1, vocabulary.len());
    let types: Vec<&String> = rand::seq::index::sample(&mut rng, vocabulary.len(), type_count)
        .into_iter()
        .map(|i| &vocabulary[i])
        .collect();

    let reachable_cells: Vec<Cell> = (0..height as i32)
        .flat_map(|row| (0..width as i32).map(move |col| Cell::new(col, row)))
        .filter(|&c| reachable[idx(c)])
        .collect();
    let anchors = if furniture.is_empty() {
        &reachable_cells
    } else {
        &furniture
    };
    let (hmin, hmax) = spec.height_range_m;
    let mut objects = Vec::with_capacity(object_count);
    for i in 0..object_count {
        let cell = anchors[rng.gen_range(0..anchors.len())];
        let jx: f64 = rng.gen_range(-0.1..0.1);
        let jy: f64 = rng.gen_range(-0.1..0.1);
        let x = round_to(cell.col as f64 * CELL_SIZE_M + jx, 1000.0);
        let y = round_to(cell.row as f64 * CELL_SIZE_M + jy, 1000.0);
        let height_m = if hmax > hmin {
            round_to(rng.gen_range(hmin..hmax), 100.0)
        } else {
            hmin
        };
        objects.push(ObjectInstance {
            id: format!("obj_{i:03}"),
            category: types[rng.gen_range(0..types.len())].clone(),
            position: [x, y],
            height_m,
            opaque: rng.gen_bool(spec.opaque_probability),
        });
    }
    let (tlo, thi) = TARGET_HEIGHT_RANGE_M;
    if !objects
        .iter()
        .any(|o| o.height_m >= tlo && o.height_m <= thi)
    {
        objects[0].height_m = 1.0;
    }

    let rooms = rects
        .iter()
        .enumerate()
        .map(|(i, r)| Room {
            name: format!("{scene_type} {}", i + 1),
            min_cell: Cell::new(r.c0, r.r0),
            max_cell: Cell::new(r.c1, r.r1),
        })
        .collect();
    let grid = GridMap::new(width, height, (0, 0), reachable_cells)
        .map_err(|e| GenerationError::Infeasible(e.to_string()))?;
    Ok(House::new(
        format!("house-{seed:06}"),
        scene_type,
        category,
        grid,
        rooms,
        objects,
    )?)
}

fn validate(spec: &GenerationSpec) -> Result<(), GenerationError> {
    let bad = |m: &str| Err(GenerationError::InvalidSpec(m.to_string()));
    if spec.room_count < 1 {
        return bad("room_count must be >= 1");
    }
    if !(spec.object_density > 0.0 && spec.object_density <= 1.0) {
        return bad("object_density must lie in (0, 1]");
    }
    let (lo, hi) = spec.cells_per_room_range;
    if lo > hi || lo < (MIN_ROOM_SIDE * MIN_ROOM_SIDE) as u32 {
        return bad("cells_per_room_range must be ordered and at least 9 cells");
    }
    let (hmin, hmax) = spec.height_range_m;
    if !(hmin >= 0.0 && hmax >= hmin) {
        return bad("height_range_m must be ordered and non-negative");
    }
    if !(0.0..1.0).contains(&spec.furniture_fraction) {
        return bad("furniture_fraction must lie in [0, 1)");
    }
    if !(0.0..=1.0).contains(&spec.opaque_probability) {
        return bad("opaque_probability must lie in [0, 1]");
    }
    if !(spec.category_ratio > 0.0) {
        return bad("category_ratio must be positive");
    }
    Ok(())
}

fn split(
    rect: Rect,
    areas: &[u32],
    rng: &mut ChaCha8Rng,
    rooms: &mut Vec<Rect>,
    walls: &mut Vec<SplitWall>,
) -> Result<(), GenerationError> {
    if areas.len() == 1 {
        rooms.push(rect);
        return Ok(());
    }
    let k = areas.len() / 2;
    let a1: f64 = areas[..k].iter().map(|&a| a as f64).sum();
    let a2: f64 = areas[k..].iter().map(|&a| a as f64).sum();
    let share = a1 / (a1 + a2) * rng.gen_range(0.9..1.1);

    let prefer_vertical = rect.width() >= rect.height();
    for vertical in [prefer_vertical, !prefer_vertical] {
        let span = if vertical { rect.width() } else { rect.height() };
        // `first` cells, one wall cell, `span - first - 1` cells.
        if span - 1 < 2 * MIN_ROOM_SIDE {
            continue;
        }
        let first = (((span - 1) as f64 * share).round() as i32)
            .clamp(MIN_ROOM_SIDE, span - 1 - MIN_ROOM_SIDE);
        let (left, right, wall) = if vertical {
            let wc = rect.c0 + first;
            (
                Rect { c1: wc - 1, ..rect },
                Rect { c0: wc + 1, ..rect },
                SplitWall {
                    vertical: true,
                    fixed: wc,
                    lo: rect.r0,
                    hi: rect.r1,
                },
            )
        } else {
            let wr = rect.r0 + first;
            (
                Rect { r1: wr - 1, ..rect },
                Rect { r0: wr + 1, ..rect },
                SplitWall {
                    vertical: false,
                    fixed: wr,
                    lo: rect.c0,
                    hi: rect.c1,
                },
            )
        };
        walls.push(wall);
        split(left, &areas[..k], rng, rooms, walls)?;
        split(right, &areas[k..], rng, rooms, walls)?;
        return Ok(());
    }
    Err(GenerationError::Infeasible(format!(
        "{}x{} block cannot hold {} rooms",
        rect.width(),
        rect.height(),
        areas.len()
    )))
}

fn connected_count(reachable: &[bool], width: u32, height: u32) -> usize {
    let Some(start) = reachable.iter().position(|&r| r) else {
        return 0;
    };
    let w = width as usize;
    let mut seen = vec![false; reachable.len()];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    let mut count = 0;
    while let Some(i) = queue.pop_front() {
        count += 1;
        let (col, row) = (i % w, i / w);
        let mut push = |j: usize| {
            if reachable[j] && !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        };
        if col > 0 {
            push(i - 1);
        }
        if col + 1 < w {
            push(i + 1);
        }
        if row > 0 {
            push(i - w);
        }
        if row + 1 < height as usize {
            push(i + w);
        }
    }
    count
}

fn round_to(v: f64, scale: f64) -> f64 {
    (v * scale).round() / scale
}

const ADJECTIVES: &[&str] = &[
    "vintage", "wooden", "red", "blue", "ceramic", "glass", "leather", "striped", "antique",
    "modern", "small", "large", "golden", "rustic", "velvet", "metal", "painted", "woven",
    "green", "black", "white", "marble", "wicker", "floral",
];

const NOUNS: &[&str] = &[
    "bench", "soda can", "mug", "lamp", "vase", "bookshelf", "armchair", "clock", "teapot",
    "pillow", "basket", "stool", "mirror", "plant pot", "picture frame", "guitar", "globe",
    "laptop", "radio", "candle", "bowl", "jar", "toy robot", "trophy", "fan", "kettle",
    "blender", "speaker", "backpack", "umbrella", "suitcase", "chessboard", "typewriter",
    "telescope", "birdcage", "hat", "shoe rack", "coat hanger", "desk organizer", "microscope",
    "easel", "violin", "drum", "printer", "monitor", "keyboard", "bread basket", "cake stand",
    "wine rack", "toolbox", "fire extinguisher", "trash bin", "water cooler", "coffee maker",
    "lantern", "sculpture", "jewelry box", "record player", "tissue box", "alarm clock",
    "magazine rack", "fruit bowl", "spray bottle", "dumbbell", "yoga mat", "hair dryer",
    "first aid kit", "pool cue", "dart board", "snow globe", "cash register", "mannequin",
];

/// Adjective-noun product plus the bare nouns, sorted.
pub fn builtin_vocabulary() -> Vec<String> {
    let mut words: Vec<String> = NOUNS.iter().map(|n| n.to_string()).collect();
    for a in ADJECTIVES {
        for n in NOUNS {
            words.push(format!("{a} {n}"));
        }
    }
    words.sort();
    words
}
